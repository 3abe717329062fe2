"""Energy/latency accounting of schedule traces and analytic operation counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .costs import CostTable
from .trace import ScheduleTrace

# payload bits that count toward energy-per-bit: data in through DACs, out through ADCs
BIT_KINDS = ("dac_write", "adc_read")


@dataclass(frozen=True)
class StageRow:
    stage: str
    energy_pj: float
    latency_ns: float
    bits: int


@dataclass(frozen=True)
class EnergyReport:
    total_energy_pj: float
    total_latency_ns: float
    total_bits: int
    total_ops: int
    epb_fj_per_bit: float
    gops: float
    epb_defined: bool
    stages: tuple = ()
    energy_by_kind: dict = field(default_factory=dict)
    counts_by_kind: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "total_energy_pj": self.total_energy_pj,
            "total_latency_ns": self.total_latency_ns,
            "total_bits": self.total_bits,
            "total_ops": self.total_ops,
            "epb_fj_per_bit": self.epb_fj_per_bit,
            "epb_defined": self.epb_defined,
            "gops": self.gops,
        }


def stage_latency(trace: ScheduleTrace) -> dict:
    """Per-stage latency: serial entries add; lanes run concurrently (slowest lane wins)."""
    serial, lanes = {}, {}
    for s in trace.stage_latencies:
        if s.lane is None:
            serial.setdefault(s.stage, []).append(s.ns)
        else:
            lanes.setdefault(s.stage, {}).setdefault(s.lane, []).append(s.ns)
    out = {}
    for stage in trace.stages():
        ser = math.fsum(serial.get(stage, ()))
        par = max((math.fsum(v) for v in lanes.get(stage, {}).values()), default=0.0)
        out[stage] = ser + par
    return out


def account_trace(trace: ScheduleTrace, cost: CostTable, total_ops: int = 0) -> EnergyReport:
    """Energy, latency, EPB and GOPS of a trace under a cost table.

    Every event kind must have a cost entry; sums are exactly rounded
    (``math.fsum``) so results do not depend on event order. EPB is reported
    as 0 with ``epb_defined=False`` when no payload bits were moved.
    """
    per_stage = {}
    by_kind = {}
    counts = {}
    all_e = []
    bits = 0
    stage_bits = {}
    for ev in trace.events:
        if ev.kind not in cost.events:
            raise ValueError(f"no cost entry for event kind {ev.kind!r} (stage {ev.stage!r})")
        e = cost.events[ev.kind].energy(ev.count, ev.payload_bits)
        all_e.append(e)
        per_stage.setdefault(ev.stage, []).append(e)
        by_kind.setdefault(ev.kind, []).append(e)
        counts[ev.kind] = counts.get(ev.kind, 0) + ev.count
        if ev.kind in BIT_KINDS:
            bits += ev.payload_bits
            stage_bits[ev.stage] = stage_bits.get(ev.stage, 0) + ev.payload_bits
    lat = stage_latency(trace)
    rows = tuple(
        StageRow(s, math.fsum(per_stage.get(s, ())), lat.get(s, 0.0), stage_bits.get(s, 0))
        for s in trace.stages()
    )
    energy = math.fsum(all_e)
    latency = math.fsum(lat.values())
    epb_ok = bits > 0
    return EnergyReport(
        total_energy_pj=energy,
        total_latency_ns=latency,
        total_bits=bits,
        total_ops=int(total_ops),
        epb_fj_per_bit=energy * 1000.0 / bits if epb_ok else 0.0,
        gops=total_ops / latency if latency > 0 else 0.0,
        epb_defined=epb_ok,
        stages=rows,
        energy_by_kind={k: math.fsum(v) for k, v in sorted(by_kind.items())},
        counts_by_kind=dict(sorted(counts.items())),
    )


def matmul_macs(m: int, k: int, n: int) -> int:
    return m * k * n


def attention_macs(spec, s_q: Optional[int] = None, s_k: Optional[int] = None) -> int:
    """MACs of one MHA block as executed (reordered score product, output linear)."""
    s_q = spec.seq_len if s_q is None else s_q
    s_k = spec.seq_len if s_k is None else s_k
    d, dk = spec.d_model, spec.d_k
    head = (s_q * d * dk          # Q = X W_Q
            + s_q * dk * d        # Q W_K^T
            + s_q * d * s_k       # (.) X^T
            + s_k * d * dk        # V = X W_V
            + s_q * s_k * dk)     # softmax(S) V
    return spec.n_heads * head + s_q * d * d


def ffn_macs(spec, tokens: Optional[int] = None) -> int:
    tokens = spec.seq_len if tokens is None else tokens
    return 2 * tokens * spec.d_model * spec.d_ff


def transformer_macs(spec) -> int:
    layer = attention_macs(spec) + ffn_macs(spec)
    n = spec.n_layers
    if spec.variant in ("encoder_only", "decoder_only"):
        return n * layer
    if spec.variant == "vit":
        return n * layer + spec.seq_len * spec.d_model * spec.head_width
    if spec.variant == "encoder_decoder":
        return n * layer + n * (layer + attention_macs(spec))
    raise ValueError(f"unknown variant {spec.variant!r}")


def gnn_macs(graph, model) -> int:
    from .ghost import layer_neighbors

    total = 0
    for layer in model.layers:
        deg = sum(len(layer_neighbors(graph, v, layer.self_loops)) for v in range(graph.vertex_count))
        total += deg * layer.f_in + graph.vertex_count * layer.f_in * layer.f_out
    return total


def op_count(spec, graph=None) -> int:
    """MAC-equivalent operations of a workload.

    ``spec`` may be a transformer spec, a GNN model spec (with ``graph``), or
    an ``(m, k, n)`` matmul shape.
    """
    from .ghost import GnnModelSpec
    from .tron import TransformerModelSpec

    if isinstance(spec, TransformerModelSpec):
        return transformer_macs(spec)
    if isinstance(spec, GnnModelSpec):
        if graph is None:
            raise ValueError("GNN op count needs the graph")
        return gnn_macs(graph, spec)
    if isinstance(spec, tuple) and len(spec) == 3:
        return matmul_macs(*spec)
    raise TypeError(f"cannot count operations of {type(spec).__name__}")

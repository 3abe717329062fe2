"""Run orchestration: config validation, workloads, reference executors, reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import (
    HardwareConfig, fmt, load_hardware, load_weights, read_json, rounded, write_matrix_csv,
)
from .costs import CostTable, load_cost_table
from .ghost import GhostConfig, GnnModelSpec, Graph, load_graph, read_matrix_csv, run_gnn
from .perf import EnergyReport, account_trace, op_count
from .trace import EVENT_KINDS, ScheduleTrace
from .tron import TransformerModelSpec, TransformerWeights, run_transformer

REPORT_COLUMNS = (
    "workload", "mode", "seed", "total_energy_pj", "total_latency_ns", "total_bits", "total_ops",
    "epb_fj_per_bit", "epb_defined", "gops", "quant_max_rel_error",
)


class ConfigError(ValueError):
    """Invalid inputs; carries one diagnostic per violated rule."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics))


@dataclass
class Workload:
    kind: str  # "tron" or "ghost"
    hardware: HardwareConfig
    cost: CostTable
    tron_spec: Optional[TransformerModelSpec] = None
    weights: Optional[TransformerWeights] = None
    X: Optional[np.ndarray] = None
    Y: Optional[np.ndarray] = None
    graph: Optional[Graph] = None
    gnn_spec: Optional[GnnModelSpec] = None
    lanes_v: int = 8
    partition_n: int = 64


@dataclass
class RunResult:
    output: np.ndarray
    trace: ScheduleTrace
    report: EnergyReport
    quant_max_rel_error: float
    mode: str
    seed: int


@dataclass
class RunManifest:
    subcommand: str
    inputs: dict
    seed: int
    mode: str
    options: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def _diag(role: str, path, exc: Exception) -> str:
    return f"{role} ({path}): {exc}"


def validate_config(paths: dict, lanes: int = 8, partition: int = 64) -> Workload:
    """Load every input named in ``paths`` and check cross-field invariants.

    Recognised roles: hardware, cost, spec, weights, input, decoder_input
    (transformer); graph, features, gnn_spec (GNN). Raises :class:`ConfigError`
    listing every problem, each prefixed with the offending input.
    """
    diags = []
    hw = HardwareConfig()
    cost = CostTable()
    try:
        hw = load_hardware(paths.get("hardware"))
        diags += [f"hardware ({paths.get('hardware', '<default>')}): {p}" for p in hw.problems()]
    except (OSError, ValueError, TypeError) as e:
        diags.append(_diag("hardware", paths.get("hardware"), e))
    try:
        cost = load_cost_table(paths.get("cost"))
        missing = cost.missing_kinds()
        if missing:
            diags.append(f"cost ({paths.get('cost', '<default>')}): events: no entry for {missing}")
    except (OSError, ValueError, TypeError) as e:
        diags.append(_diag("cost", paths.get("cost"), e))
    if lanes < 1:
        diags.append(f"--lanes: must be >= 1, got {lanes}")
    if partition < 1:
        diags.append(f"--partition: must be >= 1, got {partition}")

    wl = Workload("ghost" if "graph" in paths else "tron", hw, cost, lanes_v=lanes, partition_n=partition)
    if wl.kind == "tron" and "spec" in paths:
        try:
            wl.tron_spec = TransformerModelSpec.from_dict(read_json(paths["spec"]))
            diags += [f"spec ({paths['spec']}): {p}" for p in wl.tron_spec.problems()]
        except (OSError, ValueError, TypeError) as e:
            diags.append(_diag("spec", paths["spec"], e))
        if wl.tron_spec is not None and not wl.tron_spec.problems():
            if "weights" in paths:
                try:
                    wl.weights = TransformerWeights.from_named(wl.tron_spec, load_weights(paths["weights"]))
                except (OSError, ValueError, KeyError) as e:
                    diags.append(_diag("weights", paths["weights"], e))
            for role, attr in (("input", "X"), ("decoder_input", "Y")):
                if role not in paths:
                    continue
                try:
                    m = read_matrix_csv(paths[role])
                    want = (wl.tron_spec.seq_len, wl.tron_spec.d_model)
                    if role == "input" and m.shape != want:
                        diags.append(f"{role} ({paths[role]}): shape {m.shape} != (seq_len, d_model) {want}")
                    setattr(wl, attr, m)
                except (OSError, ValueError) as e:
                    diags.append(_diag(role, paths[role], e))
    if wl.kind == "ghost":
        try:
            wl.graph = load_graph(paths["graph"], paths["features"])
        except KeyError:
            diags.append("features: --features is required with --graph")
        except (OSError, ValueError) as e:
            diags.append(_diag("graph", f"{paths['graph']}, {paths.get('features')}", e))
        if "gnn_spec" in paths:
            try:
                sp = Path(paths["gnn_spec"])
                wl.gnn_spec = GnnModelSpec.from_dict(read_json(sp), sp.parent)
                f_in = wl.graph.f_in if wl.graph is not None else None
                diags += [f"spec ({sp}): {p}" for p in wl.gnn_spec.problems(f_in)]
            except (OSError, ValueError, TypeError, KeyError) as e:
                diags.append(_diag("spec", paths["gnn_spec"], e))
    if diags:
        raise ConfigError(diags)
    return wl


def quant_error(float_out, quant_out) -> float:
    """max |quant - float| / max |float| (0 when the float output is all zero)."""
    f = np.asarray(float_out, dtype=float)
    q = np.asarray(quant_out, dtype=float)
    denom = float(np.max(np.abs(f))) if f.size else 0.0
    err = float(np.max(np.abs(q - f))) if f.size else 0.0
    return err / denom if denom > 0 else err


def run_reference(wl: Workload, mode: str) -> np.ndarray:
    """Pure digital execution (``float_ref`` or ``quant_ref``); no trace."""
    if mode not in ("float_ref", "quant_ref"):
        raise ValueError(f"reference mode must be float_ref or quant_ref, got {mode!r}")
    return _execute(wl, mode, 0)[0]


def _execute(wl: Workload, mode: str, seed: int):
    engine = wl.hardware.engine(wl.cost, seed)
    if wl.kind == "tron":
        return run_transformer(wl.tron_spec, wl.weights, wl.X, mode, engine, wl.Y)
    cfg = GhostConfig(wl.lanes_v, wl.partition_n, engine)
    return run_gnn(wl.graph, wl.gnn_spec, cfg, mode)


def run_workload(wl: Workload, mode: str = "photonic", seed: int = 0) -> RunResult:
    out, trace = _execute(wl, mode, seed)
    f = run_reference(wl, "float_ref")
    q = run_reference(wl, "quant_ref")
    ops = op_count(wl.tron_spec) if wl.kind == "tron" else op_count(wl.gnn_spec, wl.graph)
    report = account_trace(trace, wl.cost, ops)
    return RunResult(out, trace, report, quant_error(f, q), mode, seed)


def report_row(result: RunResult, workload: str) -> dict:
    s = result.report.summary()
    row = {"workload": workload, "mode": result.mode, "seed": result.seed}
    row.update(s)
    row["quant_max_rel_error"] = result.quant_max_rel_error
    return row


def report_json(result: RunResult, workload: str) -> dict:
    r = result.report
    return {
        "summary": {k: rounded(v) for k, v in report_row(result, workload).items()},
        "energy_by_kind_pj": {k: rounded(v) for k, v in r.energy_by_kind.items()},
        "counts_by_kind": r.counts_by_kind,
        "stages": [
            {"stage": s.stage, "energy_pj": rounded(s.energy_pj), "latency_ns": rounded(s.latency_ns), "bits": s.bits}
            for s in r.stages
        ],
    }


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit_report(result: RunResult, outdir, manifest: Optional[RunManifest] = None, workload: str = "") -> dict:
    """Write report.csv, report.json, stages.csv, trace.csv, output.csv and manifest.json."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report.csv": csv_text(REPORT_COLUMNS, [report_row(result, workload)]),
            "report.json": json.dumps(report_json(result, workload), indent=2) + "\n",
            "stages.csv": csv_text(
                ("stage", "energy_pj", "latency_ns", "bits"),
                [{"stage": s.stage, "energy_pj": s.energy_pj, "latency_ns": s.latency_ns, "bits": s.bits}
                 for s in result.report.stages],
            ),
            "trace.csv": result.trace.to_csv(),
        }
        for name, text in files.items():
            (out / name).write_text(text)
        write_matrix_csv(out / "output.csv", result.output)
        if manifest is not None:
            (out / "manifest.json").write_text(manifest.to_json())
    except OSError as e:
        raise OSError(f"cannot write report to {out}: {e}") from e
    return {name: out / name for name in (*files, "output.csv")}


def read_trace_csv(path) -> ScheduleTrace:
    with open(path, newline="") as fh:
        return ScheduleTrace.from_csv_rows(csv.DictReader(fh))


__all__ = [
    "ConfigError", "Workload", "RunResult", "RunManifest", "validate_config", "run_reference",
    "run_workload", "emit_report", "quant_error", "read_trace_csv", "EVENT_KINDS",
]

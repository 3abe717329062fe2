"""Acceptance suite: one test per primary criterion.

Each test records a PASS/FAIL line (with its measured figure and runtime);
the lines are printed at the end of the pytest session, or directly when
this file is run as a script.
"""

import json
import math
import time
from contextlib import contextmanager
from dataclasses import replace
from fractions import Fraction
from importlib import resources

import numpy as np
import pytest

from photonic_accel.cli import main
from photonic_accel.config import fmt
from photonic_accel.costs import load_cost_table
from photonic_accel.devices import (
    MRDevice, WavelengthGrid, crosstalk_profile, design_bank, half_linewidth_nm, heterodyne_crosstalk,
    resonant_wavelength, resonant_wavelength_nm, through_transmission,
)
from photonic_accel.engine import Executor
from photonic_accel.ghost import GhostConfig, GnnLayerSpec, Graph, aggregate, combine, partition_graph
from photonic_accel.harness import read_trace_csv, run_reference, run_workload, validate_config
from photonic_accel.kernels import exact_softmax, lut_softmax
from photonic_accel.perf import account_trace
from photonic_accel.trace import EVENT_KINDS, ScheduleTrace
from photonic_accel.tron import HeadWeights, attention_scores_decomposed, prepare_offline_operands

from conftest import EXAMPLES

pytestmark = pytest.mark.acceptance

RESULTS = {}


@contextmanager
def criterion(n, title, limit_s=None):
    """Record PASS/FAIL for criterion ``n``; the body may set ``info['detail']``."""
    info = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield info
        dt = time.perf_counter() - t0
        if limit_s is not None:
            assert dt < limit_s, f"runtime {dt:.1f} s exceeds {limit_s} s"
    except BaseException as e:
        dt = time.perf_counter() - t0
        RESULTS[n] = f"[criterion {n}] FAIL  {title}: {e} ({dt:.2f} s)"
        raise
    RESULTS[n] = f"[criterion {n}] PASS  {title}: {info['detail']} ({dt:.2f} s)"


def tron_paths(name):
    d = EXAMPLES / name
    return {"spec": d / "spec.json", "weights": d / "weights.bin", "input": d / "input.csv",
            "hardware": EXAMPLES / "hardware.json"}


def ghost_paths():
    d = EXAMPLES / "karate_gcn"
    return {"graph": d / "graph.txt", "features": d / "features.csv", "gnn_spec": d / "spec.json",
            "hardware": EXAMPLES / "hardware.json"}


def test_c1_reordered_attention_identity():
    with criterion(1, "reordered score product identity (1000 triples)", 10.0) as info:
        r = np.random.default_rng(20240601)
        ex = Executor("float_ref")
        worst = 0.0
        for _ in range(1000):
            s, d, dk = int(r.integers(1, 17)), int(r.integers(1, 65)), int(r.integers(1, 17))
            X = r.normal(size=(s, d))
            head = HeadWeights(r.normal(size=(d, dk)), r.normal(size=(d, dk)), r.normal(size=(d, dk)))
            ops = prepare_offline_operands(X, [head])
            lhs = attention_scores_decomposed(X, head, ops, ex)
            Q = X @ head.W_Q
            rhs = Q @ (X @ head.W_K).T / math.sqrt(dk)
            worst = max(worst, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
        info["detail"] = f"max relative deviation {worst:.3e}"
        assert worst <= 1e-5


def test_c2_photonic_equals_quantized():
    with criterion(2, "photonic == quant_ref, noise off", 60.0) as info:
        wl = validate_config(tron_paths("encoder_2l"))
        sp = wl.tron_spec
        assert (sp.n_layers, sp.d_model, sp.n_heads, sp.seq_len, sp.variant) == (2, 64, 4, 16, "encoder_only")
        p = run_workload(wl, "photonic", 0).output
        q = run_reference(wl, "quant_ref")
        assert np.array_equal(p, q), "transformer outputs differ"
        gw = validate_config(ghost_paths())
        assert gw.graph.vertex_count == 34 and len(gw.gnn_spec.layers) == 2
        assert all(l.aggregator == "sum" for l in gw.gnn_spec.layers)
        gp = run_workload(gw, "photonic", 0).output
        gq = run_reference(gw, "quant_ref")
        assert np.array_equal(gp, gq), "GNN outputs differ"
        info["detail"] = f"{p.size} + {gp.size} elements identical"


def _random_graph(r):
    n = int(r.integers(1, 201))
    m = int(r.integers(0, 1001))
    edges = r.integers(0, n, size=(m, 2))
    w = r.uniform(0.5, 2.0, size=m) if r.random() < 0.5 else None
    return Graph.from_edges(n, edges, r.normal(size=(n, int(r.integers(1, 9)))), w)


def _dense_adjacency(g, layer):
    A = np.zeros((g.vertex_count, g.vertex_count))
    for v, u in g.edges():
        A[v, u] = g.weight(v, list(g.neighbors[v]).index(u))
    if layer.self_loops:
        idx = np.arange(g.vertex_count)
        A[idx, idx] = np.where(A[idx, idx] == 0, 1.0, A[idx, idx])
    if layer.gcn_norm:
        d = A.sum(axis=1)
        inv = np.where(d > 0, 1 / np.sqrt(np.where(d > 0, d, 1)), 0)
        A = inv[:, None] * A * inv[None, :]
    return A


def test_c3_gnn_dense_oracle():
    with criterion(3, "GNN float aggregate+combine vs dense A.X.W, 3 schedules", 120.0) as info:
        r = np.random.default_rng(7)
        ex = Executor("float_ref")
        worst = 0.0
        for _ in range(50):
            g = _random_graph(r)
            f_out = int(r.integers(1, 9))
            layer = GnnLayerSpec(g.f_in, f_out, "sum", "relu", bool(r.random() < 0.5), bool(r.random() < 0.5))
            W = r.normal(size=(g.f_in, f_out))
            ref = _dense_adjacency(g, layer) @ g.features @ W
            outs = []
            for V, N in ((1, 1), (4, 16), (32, 256)):
                sched = partition_graph(g, GhostConfig(V, N), layer.self_loops)
                outs.append(combine(aggregate(g, g.features, layer, sched, ex), W, ex))
            for o in outs[1:]:
                assert np.array_equal(o, outs[0]), "schedule changed the result"
            scale = max(float(np.max(np.abs(ref))), 1e-300) if ref.size else 1.0
            worst = max(worst, float(np.max(np.abs(outs[0] - ref), initial=0.0)) / scale)
        info["detail"] = f"max relative deviation {worst:.3e}, schedule-invariant"
        assert worst <= 1e-5


def test_c4_device_analytics():
    with criterion(4, "device analytics (resonance, half-linewidth point, crosstalk)") as info:
        r = np.random.default_rng(99)
        worst_res = 0.0
        for _ in range(100):
            R, m, n = r.uniform(1, 50), int(r.integers(1, 300)), r.uniform(1.5, 4.0)
            off = r.uniform(-5, 5)
            d = MRDevice(R, m, n, 1e4, tuning_offset_nm=off)
            hand = 2 * math.pi * R * n / m + off / 1000.0
            worst_res = max(worst_res, abs(resonant_wavelength(d) - hand) / hand)
        assert worst_res <= 1e-9
        worst_t = 0.0
        for _ in range(100):
            d = MRDevice(r.uniform(2, 20), int(r.integers(10, 100)), r.uniform(2, 3), r.uniform(1e3, 1e5),
                         extinction_floor=r.uniform(0, 0.99))
            t = through_transmission(d, resonant_wavelength_nm(d) + half_linewidth_nm(d))
            worst_t = max(worst_t, abs(t - (1 + d.extinction_floor) / 2) / ((1 + d.extinction_floor) / 2))
        assert worst_t <= 1e-9
        # symmetry: rings with one common linewidth on 3 equally spaced channels
        g3 = WavelengthGrid(1550.0, 1.6, 3, 18.0)
        delta = 0.1
        bank = [replace(x, q_factor=resonant_wavelength_nm(x) / (2 * delta))
                for x in design_bank(g3, MRDevice(5.0, 48, 2.368, 8000.0))]
        x0, x2 = heterodyne_crosstalk(g3, bank, 0), heterodyne_crosstalk(g3, bank, 2)
        sym = abs(x0 - x2) / x0
        assert sym <= 1e-12
        # 20-point CS sweep with every aggressor beyond the half-linewidth
        tmpl = MRDevice(5.0, 48, 2.368, 8000.0)
        prev = None
        for cs in np.linspace(0.2, 2.0, 20):
            g = WavelengthGrid(1550.0, float(cs), 5, 30.0)
            bank = design_bank(g, tmpl)
            assert cs > max(half_linewidth_nm(x) for x in bank)
            xt = crosstalk_profile(g, bank)
            if prev is not None:
                assert np.all(xt <= prev), f"crosstalk rose at CS {cs}"
            prev = xt
        info["detail"] = f"resonance {worst_res:.1e}, T(delta) {worst_t:.1e}, symmetry {sym:.1e}"


def test_c5_lut_softmax():
    with criterion(5, "LUT softmax accuracy (10000 random 8-vectors)") as info:
        v = np.random.default_rng(5).uniform(-10, 10, size=(10000, 8))
        out = lut_softmax(v)
        dev = float(np.max(np.abs(out - exact_softmax(v))))
        sums = float(np.max(np.abs(out.sum(axis=1) - 1)))
        info["detail"] = f"max deviation {dev:.2e}, max row-sum error {sums:.1e}"
        assert dev <= 1e-3 and sums <= 1e-6


def _spreadsheet(trace_csv, cost_json):
    """Energy/bits summed straight from trace.csv rows and the raw cost JSON."""
    raw = json.loads(cost_json)["events"]
    energy, bits, counts = Fraction(0), 0, {}
    for row in read_trace_csv(trace_csv).events:
        e = raw[row.kind]
        cell = row.count * e.get("energy_pj", 0.0) + row.payload_bits * e.get("energy_fj_per_bit", 0.0) / 1000.0
        energy += Fraction(cell)
        if row.kind in ("dac_write", "adc_read"):
            bits += row.payload_bits
        counts[row.kind] = counts.get(row.kind, 0) + row.count
    return float(energy), bits, counts


def test_c6_accounting_consistency(tmp_path):
    with criterion(6, "accounting vs independent spreadsheet; additivity and scaling") as info:
        out = tmp_path / "tiny"
        args = ["--quiet", "tron", "run"]
        p = tron_paths("tiny_transformer")
        for k in ("spec", "weights", "input", "hardware"):
            args += [f"--{k}", str(p[k])]
        assert main(args + ["--report", str(out)]) == 0
        cost_json = resources.files("photonic_accel.data").joinpath("default_cost.json").read_text()
        energy, bits, counts = _spreadsheet(out / "trace.csv", cost_json)
        header, values = (out / "report.csv").read_text().splitlines()
        rep = dict(zip(header.split(","), values.split(",")))
        assert rep["total_energy_pj"] == fmt(energy)
        assert int(rep["total_bits"]) == bits
        full = account_trace(read_trace_csv(out / "trace.csv"), load_cost_table())
        assert full.total_energy_pj == energy and full.counts_by_kind == dict(sorted(counts.items()))

        r = np.random.default_rng(6)
        cost = load_cost_table()
        kinds = list(EVENT_KINDS)
        for _ in range(100):
            a, b = ScheduleTrace(), ScheduleTrace()
            for t in (a, b):
                for _ in range(int(r.integers(0, 40))):
                    t.emit(kinds[int(r.integers(len(kinds)))], int(r.integers(0, 10**5)), int(r.integers(0, 10**6)),
                           stage=f"s{int(r.integers(3))}")
                t.latency(float(r.uniform(0.1, 10)))
            ea, eb = account_trace(a, cost).total_energy_pj, account_trace(b, cost).total_energy_pj
            assert math.isclose(account_trace(a + b, cost).total_energy_pj, ea + eb, rel_tol=1e-12)
            ra, rd = account_trace(a, cost, 1000), account_trace(a, cost.scaled(2.0), 1000)
            assert rd.total_energy_pj == 2 * ra.total_energy_pj and rd.epb_fj_per_bit == 2 * ra.epb_fj_per_bit
            assert rd.gops == ra.gops
        info["detail"] = f"total {fmt(energy)} pJ over {bits} bits matches; 100 synthetic traces ok"


def test_c7_quantization_fidelity():
    with criterion(7, "float_ref vs quant_ref error reported deterministically") as info:
        parts = []
        for name, paths in (("tiny_transformer", tron_paths("tiny_transformer")),
                            ("encoder_2l", tron_paths("encoder_2l")), ("karate_gcn", ghost_paths())):
            wl = validate_config(paths)
            e1 = run_workload(wl, "photonic", 1).quant_max_rel_error
            e2 = run_workload(validate_config(paths), "photonic", 1).quant_max_rel_error
            assert e1 == e2 and math.isfinite(e1) and e1 >= 0
            parts.append(f"{name} {fmt(e1)}")
        info["detail"] = ", ".join(parts)


def test_c8_determinism(tmp_path):
    with criterion(8, "same seed gives byte-identical reports and traces") as info:
        runs = {}
        for name in ("tiny_transformer", "encoder_2l"):
            p = tron_paths(name)
            runs[name] = ["tron", "run"] + [x for k in ("spec", "weights", "input", "hardware") for x in (f"--{k}", str(p[k]))]
        g = ghost_paths()
        runs["karate_gcn"] = ["ghost", "run", "--graph", str(g["graph"]), "--features", str(g["features"]),
                              "--spec", str(g["gnn_spec"]), "--hardware", str(g["hardware"])]
        compared = 0
        for name, args in runs.items():
            for noise in ([], ["--noise"]):
                dirs = [tmp_path / f"{name}{len(noise)}_{i}" for i in range(2)]
                for d in dirs:
                    assert main(["--quiet", *args, *noise, "--seed", "42", "--report", str(d)]) == 0
                for f in ("report.csv", "report.json", "stages.csv", "trace.csv", "output.csv"):
                    assert (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes(), f"{name}: {f} differs"
                    compared += 1
        for sw in ("sweep_q.json", "sweep_tiny.json"):
            dirs = [tmp_path / f"{sw}_{i}" for i in range(2)]
            for d in dirs:
                assert main(["--quiet", "sweep", "--grid", str(EXAMPLES / sw), "--report", str(d)]) == 0
            assert (dirs[0] / "sweep.csv").read_bytes() == (dirs[1] / "sweep.csv").read_bytes()
            compared += 1
        info["detail"] = f"{compared} file pairs identical"


if __name__ == "__main__":
    import sys
    raise SystemExit(pytest.main([__file__, "-q", *sys.argv[1:]]))

"""Design-space sweeps over dotted configuration keys."""

from __future__ import annotations

import copy
import itertools
from pathlib import Path

from .config import HardwareConfig, read_json
from .costs import CostTable, load_cost_table
from .devices import validate_bank
from .harness import ConfigError, run_workload, validate_config

RESULT_COLUMNS = (
    "feasible", "violations", "snr_violations", "fsr_violations", "tuning_violations",
    "total_energy_pj", "total_latency_ns", "total_bits", "total_ops", "epb_fj_per_bit",
    "epb_defined", "gops", "quant_max_rel_error", "error",
)

WORKLOAD_DEFAULTS = {"mode": "photonic", "seed": 0, "lanes": 8, "partition": 64}


def resolve_base(base: dict, base_dir=None) -> dict:
    """Inline hardware/cost files and fill defaults so every sweepable key exists."""
    root = Path(base_dir or ".")
    hw = base.get("hardware") or {}
    if isinstance(hw, str):
        hw = read_json(root / hw)
    cost = base.get("cost")
    cost = load_cost_table(root / cost if isinstance(cost, str) else None) if not isinstance(cost, dict) else CostTable.from_dict(cost)
    out = {"hardware": HardwareConfig.from_dict(hw).to_dict(), "cost": cost.to_dict(), "workload": None}
    wl = base.get("workload")
    if wl:
        wl = dict(WORKLOAD_DEFAULTS, **wl)
        for k in ("spec", "weights", "input", "decoder_input", "graph", "features"):
            if isinstance(wl.get(k), str):
                wl[k] = str(root / wl[k])
        out["workload"] = wl
    return out


def _set(d: dict, key: str, value):
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise KeyError(f"invalid sweep key {key!r}")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise KeyError(f"invalid sweep key {key!r}")
    node[parts[-1]] = value


def grid_points(grid: dict):
    """Lexicographic order: keys sorted, each key's values in the order given."""
    keys = sorted(grid)
    for combo in itertools.product(*(grid[k] for k in keys)):
        yield dict(zip(keys, combo))


def run_point(cfg: dict) -> dict:
    row = dict.fromkeys(RESULT_COLUMNS, None)
    row["feasible"] = False
    try:
        hw = HardwareConfig.from_dict(cfg["hardware"])
        cost = CostTable.from_dict(cfg["cost"])
    except (TypeError, ValueError) as e:
        row["error"] = str(e)
        return row
    problems = hw.problems()
    if problems:
        row["error"] = problems[0]
        return row
    wl = cfg.get("workload")
    seed = int(wl["seed"]) if wl else 0
    viol = validate_bank(hw.grid(), hw.bank(), hw.noise(seed), cost)
    row["violations"] = len(viol)
    for rule in ("snr", "fsr", "tuning"):
        row[f"{rule}_violations"] = sum(v.rule == rule for v in viol)
    row["feasible"] = not viol
    if wl:
        roles = {k: wl[k] for k in ("spec", "weights", "input", "decoder_input", "graph", "features") if wl.get(k)}
        if "graph" in roles:
            roles["gnn_spec"] = roles.pop("spec")
        try:
            workload = validate_config(roles, int(wl["lanes"]), int(wl["partition"]))
        except ConfigError as e:
            row["feasible"] = False
            row["error"] = e.diagnostics[0]
            return row
        workload.hardware, workload.cost = hw, cost
        res = run_workload(workload, wl["mode"], seed)
        row.update(res.report.summary())
        row["quant_max_rel_error"] = res.quant_max_rel_error
    return row


def sweep(base_config: dict, parameter_grid: dict, base_dir=None) -> tuple:
    """Run every grid point; returns ``(columns, rows)``.

    An empty grid yields the single base-configuration row. Keys must name
    existing fields of the resolved base configuration.
    """
    base = resolve_base(base_config, base_dir)
    for key in parameter_grid:
        _set(copy.deepcopy(base), key, None)
    keys = sorted(parameter_grid)
    rows = []
    for point in grid_points(parameter_grid):
        cfg = copy.deepcopy(base)
        for k, v in point.items():
            _set(cfg, k, v)
        row = dict(point)
        row.update(run_point(cfg))
        rows.append(row)
    return keys + list(RESULT_COLUMNS), rows


def load_sweep(path) -> tuple:
    """Read a sweep file ``{"base": {...} or "base.json", "grid": {...}}``."""
    path = Path(path)
    spec = read_json(path)
    base = spec.get("base", {})
    base_dir = path.parent
    if isinstance(base, str):
        bp = path.parent / base
        base = read_json(bp)
        base_dir = bp.parent
    return base, spec.get("grid", {}), base_dir

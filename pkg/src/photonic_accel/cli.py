"""Command-line entry point.

Subcommands: ``device spectrum``, ``device validate``, ``tron run``,
``ghost run``, ``sweep``, ``reference run`` and ``replay``. Exit codes:
0 success, 2 validation failure, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import fmt, load_hardware, write_matrix_csv
from .costs import load_cost_table
from .devices import through_transmission, validate_bank
from .harness import (
    ConfigError, RunManifest, csv_text, emit_report, quant_error, run_reference, run_workload,
    validate_config,
)
from .sweep import load_sweep, sweep

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class CliError(Exception):
    def __init__(self, msg, code=EXIT_INVALID):
        super().__init__(msg)
        self.code = code


def _say(args, *msg):
    if not getattr(args, "quiet", False):
        print(*msg)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _hw_args(p):
    p.add_argument("--hardware", help="hardware JSON (device, grid, noise); bundled defaults if omitted")
    p.add_argument("--cost", help="cost table JSON; bundled default if omitted")


def _noise_override(wl, noise: bool):
    if noise:
        wl.hardware.heterodyne_enabled = True
        wl.hardware.homodyne_enabled = True


def cmd_device_spectrum(args):
    hw = load_hardware(args.config)
    probs = hw.problems()
    if probs:
        raise CliError("\n".join(f"{args.config}: {p}" for p in probs))
    grid = hw.grid()
    lams = grid.wavelengths()
    lo = args.start if args.start is not None else lams[0] - 2 * grid.channel_spacing_nm
    hi = args.stop if args.stop is not None else lams[-1] + 2 * grid.channel_spacing_nm
    wl = np.linspace(lo, hi, args.points)
    if args.single:
        t = through_transmission(hw.device(), wl)
    else:
        t = np.prod([through_transmission(d, wl) for d in hw.bank()], axis=0)
    text = csv_text(("wavelength_nm", "transmission"), [{"wavelength_nm": a, "transmission": b} for a, b in zip(wl, t)])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_device_validate(args):
    hw = load_hardware(args.config)
    probs = hw.problems()
    if probs:
        raise CliError("\n".join(f"{args.config}: {p}" for p in probs))
    cost = load_cost_table(args.cost)
    viol = validate_bank(hw.grid(), hw.bank(), hw.noise(), cost)
    for v in viol:
        print(f"{args.config}: channel {v.channel}: {v.rule}: {v.detail}")
    if viol:
        return EXIT_INVALID
    _say(args, f"{args.config}: bank valid ({hw.channel_count} channels)")
    return EXIT_OK


def _tron_paths(a) -> dict:
    paths = {"spec": a.spec, "weights": a.weights, "input": a.input}
    if a.decoder_input:
        paths["decoder_input"] = a.decoder_input
    return paths


def _ghost_paths(a) -> dict:
    return {"graph": a.graph, "features": a.features, "gnn_spec": a.spec}


def _common_paths(a, paths):
    for role in ("hardware", "cost"):
        if getattr(a, role, None):
            paths[role] = getattr(a, role)
    return paths


def _load(kind, args):
    paths = _common_paths(args, _tron_paths(args) if kind == "tron" else _ghost_paths(args))
    lanes = getattr(args, "lanes", 8)
    part = getattr(args, "partition", 64)
    wl = validate_config(paths, lanes, part)
    _noise_override(wl, getattr(args, "noise", False))
    return wl, paths


def cmd_run(kind, args):
    wl, paths = _load(kind, args)
    result = run_workload(wl, args.mode, args.seed)
    options = {"noise": bool(args.noise)}
    if kind == "ghost":
        options.update(lanes=args.lanes, partition=args.partition)
    manifest = RunManifest(
        subcommand=f"{kind} run", inputs=paths, seed=args.seed, mode=args.mode, options=options,
        config={"hardware": wl.hardware.to_dict(), "cost": wl.cost.to_dict()},
    )
    if args.report:
        emit_report(result, args.report, manifest, kind)
    r = result.report
    _say(args, f"{kind} {args.mode}: energy {fmt(r.total_energy_pj)} pJ, latency {fmt(r.total_latency_ns)} ns, "
               f"EPB {fmt(r.epb_fj_per_bit)} fJ/bit, {fmt(r.gops)} GOPS, "
               f"float/quant max rel error {fmt(result.quant_max_rel_error)}")
    return EXIT_OK


def cmd_reference(args):
    wl, _ = _load(args.workload, args)
    f = run_reference(wl, "float_ref")
    q = run_reference(wl, "quant_ref")
    err = quant_error(f, q)
    if args.report:
        out = Path(args.report)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(out / "float_ref.csv", f)
        write_matrix_csv(out / "quant_ref.csv", q)
        (out / "reference.json").write_text(json.dumps({"workload": args.workload, "quant_max_rel_error": float(fmt(err))}, indent=2) + "\n")
    _say(args, f"float_ref vs quant_ref max relative error: {fmt(err)}")
    return EXIT_OK


def cmd_sweep(args):
    base, grid, base_dir = load_sweep(args.grid)
    try:
        cols, rows = sweep(base, grid, base_dir)
    except KeyError as e:
        raise CliError(f"{args.grid}: {e.args[0]}") from None
    text = csv_text(cols, rows)
    if args.report:
        out = Path(args.report)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(text)
        _say(args, f"{len(rows)} rows -> {out / 'sweep.csv'}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_replay(args):
    m = RunManifest.from_json(Path(args.manifest).read_text())
    kind = m.subcommand.split()[0]
    ns = argparse.Namespace(
        mode=m.mode, seed=m.seed, report=args.report, quiet=args.quiet, noise=m.options.get("noise", False),
        lanes=m.options.get("lanes", 8), partition=m.options.get("partition", 64),
        hardware=m.inputs.get("hardware"), cost=m.inputs.get("cost"),
        spec=m.inputs.get("spec") or m.inputs.get("gnn_spec"), weights=m.inputs.get("weights"),
        input=m.inputs.get("input"), decoder_input=m.inputs.get("decoder_input"),
        graph=m.inputs.get("graph"), features=m.inputs.get("features"),
    )
    return cmd_run(kind, ns)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonic-accel", description="Silicon-photonic transformer/GNN accelerator simulator.")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = p.add_subparsers(dest="command", required=True)

    dev = sub.add_parser("device", help="MR device and bank tools").add_subparsers(dest="action", required=True)
    sp = dev.add_parser("spectrum", help="through-port transmission CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--start", type=float)
    sp.add_argument("--stop", type=float)
    sp.add_argument("--points", type=int, default=2001)
    sp.add_argument("--single", action="store_true", help="single template ring instead of the whole bank")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_device_spectrum)
    dv = dev.add_parser("validate", help="check bank design rules")
    dv.add_argument("--config", required=True)
    dv.add_argument("--cost")
    dv.set_defaults(func=cmd_device_validate)

    def run_opts(q, kind, with_mode=True):
        if kind == "tron":
            q.add_argument("--spec", required=True)
            q.add_argument("--weights", required=True, help=".bin (with .json shape manifest) or a CSV directory")
            q.add_argument("--input", required=True)
            q.add_argument("--decoder-input")
        else:
            q.add_argument("--graph", required=True)
            q.add_argument("--features", required=True)
            q.add_argument("--spec", required=True)
            q.add_argument("--lanes", type=int, default=8)
            q.add_argument("--partition", type=int, default=64)
        if with_mode:
            q.add_argument("--mode", choices=("float_ref", "quant_ref", "photonic"), default="photonic")
        q.add_argument("--seed", type=_seed, default=0)
        q.add_argument("--noise", action="store_true", help="enable heterodyne and homodyne noise")
        q.add_argument("--report")
        _hw_args(q)

    for kind in ("tron", "ghost"):
        r = sub.add_parser(kind, help=f"{kind} workloads").add_subparsers(dest="action", required=True)
        q = r.add_parser("run")
        run_opts(q, kind)
        q.set_defaults(func=lambda a, k=kind: cmd_run(k, a))

    ref = sub.add_parser("reference", help="float/quantized digital references").add_subparsers(dest="action", required=True)
    rr = ref.add_parser("run").add_subparsers(dest="workload", required=True)
    for kind in ("tron", "ghost"):
        q = rr.add_parser(kind)
        run_opts(q, kind, with_mode=False)
        q.set_defaults(func=cmd_reference)

    sw = sub.add_parser("sweep", help="parameter sweep")
    sw.add_argument("--grid", required=True)
    sw.add_argument("--report")
    sw.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("replay", help="re-run a report's manifest.json")
    rp.add_argument("manifest")
    rp.add_argument("--report", required=True)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        for d in e.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INVALID
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except FileNotFoundError as e:
        print(f"error: {e.filename}: file not found", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # runtime failures surface with a nonzero code
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

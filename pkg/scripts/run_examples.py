"""Run every bundled example in all three modes and print one summary line each.

Reports land in --out/<example>/<mode>/ (default: ./runs).
"""

import argparse
from importlib import resources
from pathlib import Path

from photonic_accel.cli import main as cli

EX = Path(str(resources.files("photonic_accel.data"))) / "examples"


def workloads():
    hw = str(EX / "hardware.json")
    for name in ("tiny_transformer", "encoder_2l"):
        d = EX / name
        yield name, ["tron", "run", "--spec", str(d / "spec.json"), "--weights", str(d / "weights.bin"),
                     "--input", str(d / "input.csv"), "--hardware", hw]
    d = EX / "karate_gcn"
    yield "karate_gcn", ["ghost", "run", "--graph", str(d / "graph.txt"), "--features", str(d / "features.csv"),
                         "--spec", str(d / "spec.json"), "--hardware", hw]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--noise", action="store_true")
    args = ap.parse_args()
    for name, argv in workloads():
        for mode in ("float_ref", "quant_ref", "photonic"):
            out = Path(args.out) / name / mode
            extra = ["--mode", mode, "--seed", args.seed, "--report", str(out)] + (["--noise"] if args.noise else [])
            code = cli(["--quiet", *argv, *extra])
            if code:
                raise SystemExit(f"{name}/{mode}: exit code {code}")
            row = (out / "report.csv").read_text().splitlines()
            vals = dict(zip(row[0].split(","), row[1].split(",")))
            print(f"{name:18s} {mode:10s} energy {vals['total_energy_pj']:>12s} pJ  "
                  f"latency {vals['total_latency_ns']:>10s} ns  GOPS {vals['gops']:>10s}  "
                  f"quant err {vals['quant_max_rel_error']}")


if __name__ == "__main__":
    main()

"""Heterodyne crosstalk and SNR-rule violations of the default bank as CS and Q vary.

Writes a CSV table to stdout (or --out).
"""

import argparse
import csv
import sys
from dataclasses import replace

import numpy as np

from photonic_accel.config import HardwareConfig
from photonic_accel.devices import crosstalk_profile, validate_bank


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spacings", type=float, nargs="+", default=list(np.round(np.linspace(0.4, 2.0, 9), 3)))
    ap.add_argument("--q", type=float, nargs="+", default=[2000.0, 4000.0, 8000.0, 16000.0])
    ap.add_argument("--channels", type=int, default=8)
    ap.add_argument("--out")
    args = ap.parse_args()

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["channel_spacing_nm", "q_factor", "max_crosstalk", "mean_crosstalk", "snr_violations"])
    base = HardwareConfig(channel_count=args.channels)
    for cs in args.spacings:
        for q in args.q:
            hw = replace(base, channel_spacing_nm=cs, q_factor=q, fsr_nm=max(base.fsr_nm, cs * args.channels + 1))
            xt = crosstalk_profile(hw.grid(), hw.bank())
            snr = sum(v.rule == "snr" for v in validate_bank(hw.grid(), hw.bank(), hw.noise()))
            w.writerow([f"{cs:.9g}", f"{q:.9g}", f"{xt.max():.9g}", f"{xt.mean():.9g}", snr])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()

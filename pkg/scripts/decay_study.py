"""Fitted decay exponent of H^* g_RF - g_F for the zw = 1 solutions.

Prints one row per beta: the fitted gamma, the half-step check, the number
of decades used and the window boundary max(-2/c, -4).

    python3 scripts/decay_study.py --betas 0.6 0.7 0.8 0.9
"""

import argparse
import time

from conekahler.errors import InsufficientOuterDomain
from conekahler.monge_ampere import RicciFlatD2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--betas", type=float, nargs="+", default=[0.6, 0.7, 0.8, 0.9])
    ap.add_argument("--dirs", type=int, default=48)
    ap.add_argument("--radii", type=float, nargs="+", default=None)
    args = ap.parse_args()
    print(f"{'beta':>6} {'gamma':>9} {'check':>9} {'decades':>8} {'boundary':>9} {'-4/c':>7} {'secs':>6}")
    for b in args.betas:
        t0 = time.perf_counter()
        rf = RicciFlatD2(b)
        kw = {"radii": tuple(args.radii)} if args.radii else {}
        try:
            fit = rf.decay_diagnostics(n_dirs=args.dirs, **kw)
        except InsufficientOuterDomain as exc:
            print(f"{b:6.2f}  {exc}")
            continue
        print(f"{b:6.2f} {fit.gamma:9.4f} {fit.gamma_check:9.4f} {fit.decades:8.2f} {fit.window[0]:9.3f} "
              f"{-4 / rf.c:7.3f} {time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()

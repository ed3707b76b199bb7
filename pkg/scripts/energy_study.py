"""Numeric curvature energy of the zw = 1 solutions against 1 - beta^2.

    python3 scripts/energy_study.py --betas 0.7 0.8 0.9
"""

import argparse

from conekahler.curvature_energy import energy_numeric


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--betas", type=float, nargs="+", default=[0.7, 0.8, 0.9])
    ap.add_argument("--r-excise", type=float, default=0.04)
    ap.add_argument("--r-outer", type=float, default=10.0)
    args = ap.parse_args()
    print(f"{'beta':>6} {'numeric':>9} {'+-':>8} {'1-b^2':>7} {'gap %':>6}  outer / nut / tube")
    for b in args.betas:
        rep = energy_numeric(b, args.r_excise, args.r_outer)
        parts = " / ".join(f"{rep.parts[k].limit:.4f}" for k in ("outer", "nut", "tube"))
        print(f"{b:6.2f} {rep.numeric:9.4f} {rep.uncertainty:8.4f} {rep.formula:7.4f} "
              f"{100 * rep.relative_gap:6.1f}  {parts}")


if __name__ == "__main__":
    main()

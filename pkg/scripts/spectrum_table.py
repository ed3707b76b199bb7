"""Lowest link eigenvalues and indicial roots for a preset.

    python3 scripts/spectrum_table.py --preset d3-general --beta 0.75
"""

import argparse

from conekahler.flat_cone_metric import preset_base
from conekahler.link_spectrum import LinkMetric, indicial_roots, spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="d2")
    ap.add_argument("--beta", type=float, default=0.8)
    ap.add_argument("--count", type=int, default=12)
    args = ap.parse_args()
    spec = spectrum(LinkMetric(preset_base(args.preset, args.beta)))
    roots = indicial_roots(spec)
    print(f"method {spec.method}")
    print(f"{'m':>3} {'n':>3} {'lambda':>12} {'delta+':>10} {'delta-':>10}")
    for i in range(min(args.count, len(spec.eigenvalues))):
        print(f"{spec.m[i]:3d} {spec.n[i]:3d} {spec.eigenvalues[i]:12.6f} {roots.plus[i]:10.5f} {roots.minus[i]:10.5f}")
    print("roots in (-2, 0):", roots.in_gap().tolist() or "none")


if __name__ == "__main__":
    main()

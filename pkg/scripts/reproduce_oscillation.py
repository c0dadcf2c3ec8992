"""Solve along both discount sequences and tabulate the two cluster points.

    python scripts/reproduce_oscillation.py --n-max 8 --out results/oscillation.csv
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from discounted_maxmin import counterexample as cx


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-min", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--K", type=int, default=None, help="truncation level (default n_max + 4)")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)

    K = args.K or args.n_max + 4
    rep = cx.oscillation_report(args.n_min, args.n_max, K, jobs=args.jobs)

    print(f"{'seq':<11}{'n':>3}  {'discount':>12}  {'X':>10}  {'Y':>10}  {'bound X':>10}  policy")
    for r in rep.rows:
        p = r.policy
        print(f"{r.kind:<11}{r.n:>3}  {r.discount:12.5e}  {r.X:10.6f}  {r.Y:10.6f}  {r.bound_X:10.6f}  "
              f"({p.alpha1:.6f}, {p.beta1:g}, {p.alpha2:.6f}, {p.beta2:g})")
    print(json.dumps(rep.summary(), indent=2))

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with args.out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "n", "discount", "X", "Y", "residual1", "residual2", "bound_X", "bound_Y"])
            for r in rep.rows:
                w.writerow([r.kind, r.n] + [repr(float(v)) for v in
                           (r.discount, r.X, r.Y, r.residual1, r.residual2, r.bound_X, r.bound_Y)])
    return 0 if rep.gap_X > 0 else 1


if __name__ == "__main__":
    sys.exit(main())

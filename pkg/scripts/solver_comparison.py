"""Time the three solvers on the built-in instance over a discount grid.

Prints iterations, wall time and the spread between the solutions per discount.
"""

import argparse
import time

import numpy as np

from discounted_maxmin import counterexample as cx
from discounted_maxmin import solver as sv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=25)
    ap.add_argument("--lambda-min", type=float, default=1e-3)
    ap.add_argument("--points", type=int, default=7)
    args = ap.parse_args(argv)

    inst = cx.build_instance(args.K)
    sv.solve(inst, 1.0)  # compile kernels before timing
    sv.solve(inst, 1.0, sv.SolveConfig(method=sv.MONOTONE))

    print(f"{'lambda':>10}  " + "  ".join(f"{m:>24}" for m in sv.METHODS) + f"  {'spread':>9}")
    for lam in np.logspace(0, np.log10(args.lambda_min), args.points):
        cells, us = [], []
        for m in sv.METHODS:
            t0 = time.perf_counter()
            rep = sv.solve(inst, float(lam), sv.SolveConfig(method=m))
            dt = time.perf_counter() - t0
            cells.append(f"{rep.iterations:>10d} it {dt * 1e3:8.1f} ms")
            us.append(rep.u)
        spread = max(abs(a[k] - b[k]) for a in us for b in us for k in (0, 1))
        print(f"{lam:10.3e}  " + "  ".join(cells) + f"  {spread:9.2e}")


if __name__ == "__main__":
    main()

"""Command-line front end.

Subcommands: ``solve``, ``sweep``, ``sequence``, ``limits``, ``verify``.
Exit codes: 0 success, 1 solve or check failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import checks
from . import counterexample as cx
from .game_core import InstanceError, load_instance
from .solver import METHODS, SolveConfig, auto_method, solve

SWEEP_HEADER = "lambda,X,Y,residual1,residual2,alpha1,beta1,alpha2,beta2,solver,iterations"
SEQUENCE_HEADER = "n,discount,X,Y,residual1,residual2,alpha1,beta1,alpha2,beta2,solver,iterations,bound_X,bound_Y"


class CommandFailed(Exception):
    pass


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return value


def _pick_config(lam: float, method: str, tol: float) -> SolveConfig:
    return SolveConfig(method=auto_method(lam) if method == "auto" else method, residual_tol=tol)


def _instance(args):
    if args.instance is None:
        return cx.build_instance(args.K)
    return load_instance(args.instance)


def cmd_solve(args) -> int:
    instance = _instance(args)
    report = solve(instance, args.lam, _pick_config(args.lam, args.method, args.tol))
    print(json.dumps(report.to_dict()))
    if not report.converged:
        raise CommandFailed(f"{report.method} did not reach tolerance {report.tolerance:g}")
    return 0


def sweep_grid(lam_min: float, lam_max: float, points: int, scale: str) -> np.ndarray:
    if scale == "log":
        grid = np.logspace(np.log10(lam_min), np.log10(lam_max), points)
    else:
        grid = np.linspace(lam_min, lam_max, points)
    return grid[::-1]


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CommandFailed(f"cannot write {out}: {exc.strerror}") from None


def cmd_sweep(args) -> int:
    instance = _instance(args)
    grid = sweep_grid(args.lambda_min, args.lambda_max, args.points, args.scale)

    def run(lam):
        return solve(instance, float(lam), _pick_config(lam, args.method, args.tol))

    reports = cx.ordered_map(run, list(grid), args.jobs)
    lines = [SWEEP_HEADER]
    for rep in reports:
        if not rep.converged:
            raise CommandFailed(f"{rep.method} failed at lambda={rep.discount!r} (residual {rep.max_residual:.3e})")
        p = rep.policy
        lines.append(",".join([
            _num(rep.discount), _num(rep.X), _num(rep.Y), _num(rep.residual1), _num(rep.residual2),
            _num(p.alpha1), _num(p.beta1), _num(p.alpha2), _num(p.beta2), rep.method, str(rep.iterations),
        ]))
    _write("\n".join(lines) + "\n", args.out)
    return 0


def sequence_summary(kind: str, rows, K: int) -> dict:
    tail = rows[-cx.TAIL:]
    limits = [c for c in cx.limit_constants() if c.sequence == kind]
    return {
        "kind": kind,
        "K": K,
        "n": [r.n for r in rows],
        "tail_n": [r.n for r in tail],
        "tail_max_X": max(r.X for r in tail),
        "tail_min_X": min(r.X for r in tail),
        "tail_max_Y": max(r.Y for r in tail),
        "tail_min_Y": min(r.Y for r in tail),
        "min_limit_X": min(c.value for c in limits if c.component == "X"),
        "max_limit_X": max(c.value for c in limits if c.component == "X"),
        "min_limit_Y": min(c.value for c in limits if c.component == "Y"),
        "max_limit_Y": max(c.value for c in limits if c.component == "Y"),
        "limits": [
            {"case": list(c.case), "component": c.component, "expression": c.expression, "value": c.value}
            for c in limits
        ],
    }


def cmd_sequence(args, parser) -> int:
    kind = cx.LAMBDA_SEQ if args.kind == "lambda" else cx.MU_SEQ
    if not 1 <= args.n_min <= args.n_max:
        parser.error(f"need 1 <= --n-min <= --n-max, got {args.n_min}, {args.n_max}")
    K = args.K if args.K is not None else max(12, args.n_max + 2)
    need = cx.required_K(kind, args.n_max)
    if K < need:
        parser.error(f"--K {K} is too small for --kind {args.kind} --n-max {args.n_max}; need --K {need} or more")
    config = SolveConfig(method=args.method, residual_tol=args.tol)
    try:
        rows = cx.sequence_rows(kind, args.n_min, args.n_max, K, config, args.jobs)
    except cx.SolveFailure as exc:
        raise CommandFailed(str(exc)) from None
    if args.out is not None:
        lines = [SEQUENCE_HEADER]
        for r in rows:
            p = r.policy
            lines.append(",".join([
                str(r.n), _num(r.discount), _num(r.X), _num(r.Y), _num(r.residual1), _num(r.residual2),
                _num(p.alpha1), _num(p.beta1), _num(p.alpha2), _num(p.beta2), r.solver, str(r.iterations),
                _num(r.bound_X), _num(r.bound_Y),
            ]))
        _write("\n".join(lines) + "\n", args.out)
    print(json.dumps(sequence_summary(kind, rows, K), indent=2))
    return 0


def cmd_limits(args) -> int:
    print(f"theta_lambda  1/(3/4 - sqrt2/2)  {cx.THETA_LAMBDA!r}")
    print(f"theta_mu  5(3 + 2sqrt2)  {cx.THETA_MU!r}")
    for c in cx.limit_constants():
        print(f"{c.sequence}  ({c.case[0]},{c.case[1]})  {c.component}  {c.expression}  {c.value!r}")
    return 0


def cmd_verify(args) -> int:
    results = checks.run_checks(args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed (seed {args.seed})")
    if failed:
        print("failed: " + ", ".join(failed))
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discounted-maxmin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p, methods=("auto",) + METHODS, default="auto"):
        p.add_argument("--method", choices=methods, default=default)
        p.add_argument("--tol", type=_positive_float, default=1e-12, help="residual tolerance")
        p.add_argument("--K", type=int, default=25, help="truncation level of the built-in instance")

    p = sub.add_parser("solve", help="solve one discounted system and print a JSON report")
    p.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    p.add_argument("--instance", help="instance JSON file (default: built-in instance)")
    solver_flags(p)

    p = sub.add_parser("sweep", help="solve over a discount grid and write CSV (lambda descending)")
    p.add_argument("--lambda-min", type=_positive_float, required=True)
    p.add_argument("--lambda-max", type=_positive_float, required=True)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--scale", choices=("log", "linear"), default="log")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--instance")
    p.add_argument("--jobs", type=int, default=1)
    solver_flags(p)

    p = sub.add_parser("sequence", help="solve along one of the two discount sequences")
    p.add_argument("--kind", choices=("lambda", "mu"), required=True)
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--out", help="CSV path for the per-n rows")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--method", choices=METHODS, default="policy-enum")
    p.add_argument("--tol", type=_positive_float, default=1e-12)
    p.add_argument("--K", type=int, default=None, help="truncation level (default max(12, n_max + 2))")

    sub.add_parser("limits", help="print the limit constants")

    p = sub.add_parser("verify", help="run the seeded invariant suite")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "sweep":
            if not args.lambda_min < args.lambda_max:
                parser.error("--lambda-min must be below --lambda-max")
            if args.points < 2:
                parser.error("--points must be at least 2")
            return cmd_sweep(args)
        if args.command == "sequence":
            return cmd_sequence(args, parser)
        if args.command == "limits":
            return cmd_limits(args)
        return cmd_verify(args)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CommandFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Seeded invariant suite behind ``verify``.

Each check returns ``(ok, detail)``; on failure ``detail`` names the witnessing
inputs.  Every check draws from its own generator derived from the seed and the
check name, so adding or reordering checks does not perturb the others.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import counterexample as cx
from . import game_core as gc
from . import solver as sv

Check = Callable[[np.random.Generator], "tuple[bool, str]"]
REGISTRY: list[tuple[str, Check]] = []


def check(name: str):
    def register(fn: Check) -> Check:
        REGISTRY.append((name, fn))
        return fn

    return register


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def run_checks(seed: int = 0, names=None) -> list[CheckResult]:
    results = []
    for name, fn in REGISTRY:
        if names is not None and name not in names:
            continue
        try:
            ok, detail = fn(_rng(seed, name))
        except Exception as exc:  # a crash is a failed check, reported with its message
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, ok, detail))
    return results


def _unit_grid(n: int = 101):
    return [k / (n - 1) for k in range(n)]


@check("coupling-row-sums-and-offdiagonal-sign")
def _coupling_structure(rng):
    grid = _unit_grid()
    for a in grid:
        for b in grid:
            c = gc.coupling_matrix(a, b)
            if abs(c.c11 + c.c12) > 1e-15 or abs(c.c21 + c.c22) > 1e-15:
                return False, f"row sum nonzero at alpha={a!r}, beta={b!r}: {c}"
            if c.c12 > 0 or c.c21 > 0:
                return False, f"positive off-diagonal at alpha={a!r}, beta={b!r}: {c}"
    return True, "101x101 grid"


@check("coupling-symmetry")
def _coupling_symmetry(rng):
    grid = _unit_grid()
    for a in grid:
        for b in grid:
            c = gc.coupling_matrix(a, b)
            if c.c21 != c.c12 or c.c22 != c.c11:
                return False, f"asymmetric at alpha={a!r}, beta={b!r}: {c}"
    return True, "101x101 grid"


@check("payoff-antisymmetry")
def _payoff(rng):
    for a, b in rng.random((100, 2)):
        if gc.payoff(2, a, b) != -gc.payoff(1, a, b):
            return False, f"L2 != -L1 at alpha={a!r}, beta={b!r}"
    return True, "100 samples"


@check("operator-monotonicity")
def _monotone(rng):
    for _ in range(1000):
        inst = gc.random_instance(rng)
        u = rng.uniform(-10, 10, 2)
        v = rng.uniform(-10, 10, 2)
        i = 1 if (u[0] - v[0]) >= (u[1] - v[1]) else 2
        if gc.bellman(i, u, inst)[0] < gc.bellman(i, v, inst)[0] - 1e-12:
            return False, f"A_{i}(u) < A_{i}(v) for u={tuple(u)}, v={tuple(v)}, instance={gc.instance_to_dict(inst)}"
    return True, "1000 random pairs"


@check("operator-shift-invariance")
def _shift(rng):
    inst = cx.build_instance(12)
    for _ in range(200):
        u = rng.uniform(-10, 10, 2)
        r = rng.uniform(-10, 10)
        for i in (1, 2):
            a = gc.bellman(i, u, inst)[0]
            b = gc.bellman(i, u + r, inst)[0]
            if abs(a - b) > 1e-12:
                return False, f"A_{i} changes under shift r={r!r} at u={tuple(u)}: {a!r} vs {b!r}"
    return True, "200 shifts"


@check("singleton-operator-equals-running-cost")
def _singleton(rng):
    for _ in range(100):
        a1, b1, a2, b2 = rng.random(4)
        inst = gc.SystemInstance((a1,), (a2,), (b1,), (b2,))
        u = rng.uniform(-10, 10, 2)
        if gc.bellman(1, u, inst)[0] != gc.running_cost(1, a1, b1, u):
            return False, f"equation 1 at policy {(a1, b1)}, u={tuple(u)}"
        if gc.bellman(2, u, inst)[0] != gc.running_cost(2, a2, b2, u):
            return False, f"equation 2 at policy {(a2, b2)}, u={tuple(u)}"
    return True, "100 singleton instances"


@check("stationary-point")
def _stationary(rng):
    for K in (1, 5, 12, 25):
        inst = cx.build_instance(K)
        for i in (1, 2):
            value = gc.bellman(i, cx.STATIONARY_POINT, inst)[0]
            if abs(value) > 1e-12:
                return False, f"A_{i}(1/sqrt2, -1/sqrt2) = {value!r} at K={K}"
    return True, "K in 1, 5, 12, 25"


@check("solution-bounds")
def _bounds(rng):
    inst = cx.build_instance(12)
    config = sv.SolveConfig(method=sv.POLICY_ENUM)
    for lam in np.logspace(-6, 0, 50):
        rep = sv.solve(inst, lam, config)
        if not rep.converged:
            return False, f"solve failed at lam={lam!r}"
        if not (-1e-9 <= rep.X <= cx.SQRT2 + 1e-9 and -cx.SQRT2 - 1e-9 <= rep.Y <= 1e-9):
            return False, f"(X, Y) = {tuple(rep.u)} out of bounds at lam={lam!r}"
    return True, "50 log-spaced discounts in [1e-6, 1]"


@check("closed-form-vs-linear-solve")
def _closed_form(rng):
    for _ in range(1000):
        lam = 10 ** rng.uniform(-3, 0)
        a1, a2 = rng.random(2)
        b1, b2 = (int(x) for x in rng.integers(0, 2, 2))
        ref = sv.policy_value(lam, (a1, b1, a2, b2))
        got = sv.closed_form_policy_value(lam, a1, a2, b1, b2)
        for r, g in zip(ref, got):
            if not math.isclose(r, g, rel_tol=1e-12):
                return False, f"lam={lam!r}, alphas={(a1, a2)}, betas={(b1, b2)}: {tuple(got)} vs {tuple(ref)}"
    return True, "1000 samples"


@check("x-minus-y-symmetry")
def _symmetry(rng):
    for _ in range(1000):
        lam = 10 ** rng.uniform(-3, 0)
        a1, a2 = rng.random(2)
        for b1, b2 in cx.CASES:
            x = sv.closed_form_policy_value(lam, a1, a2, b1, b2).u1
            y = sv.closed_form_policy_value(lam, a2, a1, b2, b1).u2
            if abs(x + y) > 1e-12 * max(1.0, abs(x)):
                return False, f"X != -Y at lam={lam!r}, alphas={(a1, a2)}, betas={(b1, b2)}"
    return True, "1000 samples x 4 cases"


def _fd_partials(lam, a1, a2, b1, b2, h=1e-6):
    f = lambda s, t: sv.closed_form_policy_value(lam, s, t, b1, b2).u1
    return (f(a1 + h, a2) - f(a1 - h, a2)) / (2 * h), (f(a1, a2 + h) - f(a1, a2 - h)) / (2 * h)


@check("alpha-derivative-signs")
def _signs(rng):
    for _ in range(100):
        lam = rng.uniform(0.01, 1)
        a1, a2 = rng.uniform(0.05, 0.95, 2)
        for case in cx.CASES:
            fd = _fd_partials(lam, a1, a2, *case)
            for k, (d, s) in enumerate(zip(fd, cx.PARTIAL_SIGNS[case])):
                if not d * s > 0:
                    return False, f"d/d alpha{k + 1} X{case} = {d!r} at lam={lam!r}, alphas={(a1, a2)}"
    return True, "100 samples x 8 partials"


@check("alpha-derivative-closed-forms")
def _partials(rng):
    for _ in range(100):
        lam = rng.uniform(0.01, 1)
        a1, a2 = rng.uniform(0.05, 0.95, 2)
        for case in cx.CASES:
            fd = _fd_partials(lam, a1, a2, *case)
            cf = cx.alpha_partials(lam, a1, a2, *case)
            for k in range(2):
                if not math.isclose(fd[k], cf[k], rel_tol=1e-4):
                    return False, f"d/d alpha{k + 1} X{case}: closed form {cf[k]!r} vs {fd[k]!r} at lam={lam!r}, alphas={(a1, a2)}"
    return True, "100 samples x 8 partials"


@check("probe-identities")
def _identities(rng):
    for n in range(1, 11):
        for name, lhs, rhs in cx.algebraic_identities(n):
            if abs(lhs - rhs) > 1e-14 * abs(rhs):
                return False, f"{name} at n={n}: {lhs} vs {rhs}"
    return True, "n = 1..10"


@check("probe-membership-and-gap")
def _membership(rng):
    for n in range(1, 11):
        grid = set(cx.action_grid(n + 2))
        if cx.probe_alpha(cx.SequenceSpec(cx.LAMBDA_SEQ, n)) not in grid:
            return False, f"p(lambda_{n}) not in the grid"
        if not set(cx.probe_alpha(cx.SequenceSpec(cx.MU_SEQ, n))) <= grid:
            return False, f"q(mu_{n}/2) or q(2mu_{n}) not in the grid"
        if not cx.gap_check(n, n + 2):
            return False, f"grid point inside (q(mu_{n}/2), q(2mu_{n}))"
    return True, "n = 1..10"


@check("solver-agreement")
def _triangle(rng):
    config = sv.SolveConfig()
    cases = [(cx.build_instance(25), lam) for lam in (1.0, 0.1, 0.01)]
    cases += [(gc.random_instance(rng), 10 ** rng.uniform(-3, 0)) for _ in range(50)]
    for inst, lam in cases:
        reps = [sv.solve(inst, lam, config.with_method(m)) for m in sv.METHODS]
        for rep in reps:
            if not rep.converged:
                return False, f"{rep.method} did not converge at lam={lam!r}, instance={gc.instance_to_dict(inst)}"
        for i in range(3):
            for j in range(i + 1, 3):
                diff = max(abs(a - b) for a, b in zip(reps[i].u, reps[j].u))
                if diff > 1e-9:
                    return False, f"{reps[i].method} vs {reps[j].method} differ by {diff:.3e} at lam={lam!r}, instance={gc.instance_to_dict(inst)}"
    return True, f"{len(cases)} instances"


@check("policy-consistency")
def _policy(rng):
    for _ in range(50):
        inst = gc.random_instance(rng)
        lam = 10 ** rng.uniform(-3, 0)
        rep = sv.policy_enum_solve(inst, lam)
        u = sv.policy_value(lam, rep.policy, inst)
        if max(abs(a - b) for a, b in zip(u, rep.u)) > 1e-10:
            return False, f"policy {tuple(rep.policy)} gives {tuple(u)} != {tuple(rep.u)}"
    return True, "50 instances"


@check("comparison-principle")
def _comparison(rng):
    seen = [0, 0]
    for _ in range(200):
        inst = gc.random_instance(rng)
        lam = 10 ** rng.uniform(-3, 0)
        u = np.array(sv.policy_enum_solve(inst, lam).u)
        v = u + rng.uniform(-1, 1, 2) * rng.choice([1e-3, 1e-1, 1.0, 10.0])
        if sv.check_subsolution(v, inst, lam):
            seen[0] += 1
            if np.any(v > u + 1e-9):
                return False, f"subsolution {tuple(v)} not below {tuple(u)} at lam={lam!r}"
        if sv.check_supersolution(v, inst, lam):
            seen[1] += 1
            if np.any(v < u - 1e-9):
                return False, f"supersolution {tuple(v)} not above {tuple(u)} at lam={lam!r}"
    return True, f"{seen[0]} sub- and {seen[1]} supersolutions among 200 trials"


@check("uniqueness-from-random-starts")
def _unique(rng):
    for inst, lam in [(cx.build_instance(12), 0.1), (gc.random_instance(rng), 0.05)]:
        ref = sv.policy_enum_solve(inst, lam).u
        for start in rng.uniform(-10, 10, (10, 2)):
            rep = sv.value_iteration(inst, lam, start=start)
            if max(abs(a - b) for a, b in zip(rep.u, ref)) > 1e-9:
                return False, f"start {tuple(start)} reached {tuple(rep.u)} != {tuple(ref)}"
    return True, "10 starts on 2 instances"


@check("monotone-iterates")
def _iterates(rng):
    cases = [(cx.build_instance(25), lam) for lam in (1.0, 0.1, 0.01)]
    cases += [(gc.random_instance(rng), 10 ** rng.uniform(-3, 0)) for _ in range(20)]
    for inst, lam in cases:
        rep = sv.monotone_solve(inst, lam)
        traj, R = rep.trajectory, rep.bound
        if np.any(np.diff(traj, axis=0) < -1e-10):
            return False, f"decreasing outer iterate at lam={lam!r}, instance={gc.instance_to_dict(inst)}"
        if np.any(np.abs(traj) > R * (1 + 1e-12)):
            return False, f"iterate outside [-R, R] with R={R!r} at lam={lam!r}"
    return True, f"{len(cases)} instances"


@check("policy-limits")
def _limits(rng):
    n = 10
    for c in cx.limit_constants():
        value = cx.policy_limit_value(cx.SequenceSpec(c.sequence, n), c.case)
        got = value.u1 if c.component == "X" else value.u2
        if abs(got - c.value) > 5e-3:
            return False, f"{c.sequence} {c.component}{c.case} at n={n}: {got!r} vs limit {c.value!r}"
    return True, f"16 limits at n={n}"


@check("non-convergence")
def _oscillation(rng):
    rep = cx.oscillation_report(2, 8, 12)
    half = cx.HALF_SQRT2
    for lr, mr in zip(rep.lambda_rows, rep.mu_rows):
        if lr.n < 6:
            continue
        if lr.X > half + 0.02 or lr.Y > -half + 0.02:
            return False, f"lambda_{lr.n}: (X, Y) = {(lr.X, lr.Y)} above (1/sqrt2, -1/sqrt2) + 0.02"
        if mr.X < half + 0.03 or mr.Y < -half + 0.03:
            return False, f"mu_{mr.n}: (X, Y) = {(mr.X, mr.Y)} below (1/sqrt2, -1/sqrt2) + 0.03"
    if rep.gap_X < 0.03:
        return False, f"gap {rep.gap_X!r} < 0.03"
    return True, f"gap_X = {rep.gap_X:.6f}, gap_Y = {rep.gap_Y:.6f}"

"""The explicit two-state instance whose discounted solutions fail to converge.

Action sets are ``A = {2 - sqrt2} U {2 - sqrt2 + 4**-k : k >= 1}`` (truncated
at ``k <= K``) and ``B = {0, 1}`` for both equations, with ``g = 0``.  Along

    lambda_n = theta_lambda * 4**-n,   theta_lambda = 1 / (3/4 - sqrt2/2)
    mu_n     = theta_mu * 2**(-2n-1),  theta_mu     = 5 * (3 + 2*sqrt2)

the solutions approach ``(1/sqrt2, -1/sqrt2)`` and stay strictly above it,
respectively, so ``(X_lam, Y_lam)`` has no limit as ``lam -> 0+``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import mpmath

from .game_core import PolicyQuadruple, SystemInstance
from .solver import POLICY_ENUM, SolveConfig, SolveReport, closed_form_policy_value, solve

SQRT2 = math.sqrt(2.0)
HALF_SQRT2 = math.sqrt(0.5)  # correctly rounded 1/sqrt2; 1.0 / SQRT2 is one ulp low
ALPHA_STAR = 2.0 - SQRT2
STATIONARY_POINT = (HALF_SQRT2, -HALF_SQRT2)
THETA_LAMBDA = 1.0 / (0.75 - SQRT2 / 2.0)
THETA_MU = 5.0 * (3.0 + 2.0 * SQRT2)
LAMBDA_SEQ = "lambda-seq"
MU_SEQ = "mu-seq"
KINDS = (LAMBDA_SEQ, MU_SEQ)
CASES = ((0, 0), (0, 1), (1, 0), (1, 1))
TAIL = 3

# Which probe values (small = q(mu_n/2), big = q(2 mu_n)) enter each mu-seq policy case.
MU_ASSIGNMENT = {
    (0, 0): ("small", "big"),
    (0, 1): ("small", "small"),
    (1, 0): ("big", "big"),
    (1, 1): ("big", "small"),
}

# Signs of d/d alpha1 and d/d alpha2 of X for each (beta1, beta2).
PARTIAL_SIGNS = {
    (0, 0): (-1, 1),
    (0, 1): (-1, -1),
    (1, 0): (1, 1),
    (1, 1): (1, -1),
}


class SolveFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SequenceSpec:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise ValueError(f"sequence index must be >= 1, got {self.n}")

    @property
    def theta(self) -> float:
        return THETA_LAMBDA if self.kind == LAMBDA_SEQ else THETA_MU

    @property
    def rho(self) -> float:
        return 2.0 ** (-2 * self.n - 2)


def action_grid(K: int) -> tuple[float, ...]:
    """Truncated action set, ascending: the limit point first, then ``4**-k`` for k = K..1."""
    if K < 1:
        raise ValueError(f"truncation level must be >= 1, got {K}")
    return (ALPHA_STAR,) + tuple(ALPHA_STAR + 4.0 ** (-k) for k in range(K, 0, -1))


def build_instance(K: int = 25) -> SystemInstance:
    A = action_grid(K)
    return SystemInstance(A1=A, A2=A, B1=(0.0, 1.0), B2=(0.0, 1.0))


def discount(spec: SequenceSpec) -> float:
    if spec.kind == LAMBDA_SEQ:
        return spec.theta * 4.0 ** (-spec.n)
    return spec.theta * 2.0 ** (-2 * spec.n - 1)


def p(lam: float) -> float:
    return ALPHA_STAR + lam / THETA_LAMBDA


def q(lam: float) -> float:
    return ALPHA_STAR + lam / THETA_MU


def required_K(kind: str, n: int) -> int:
    return n if kind == LAMBDA_SEQ else n + 1


def probe_alpha(spec: SequenceSpec, K: Optional[int] = None):
    """Grid actions used to bound the solution along a sequence.

    ``lambda-seq`` gives ``p(lambda_n) = 2 - sqrt2 + 4**-n``; ``mu-seq`` gives the
    pair ``(q(mu_n/2), q(2 mu_n)) = (2 - sqrt2 + 4**-(n+1), 2 - sqrt2 + 4**-n)``.
    Both are built with the same expression as :func:`action_grid`, so they are
    members of the truncated set bit for bit.
    """
    need = required_K(spec.kind, spec.n)
    if K is not None and K < need:
        raise ValueError(f"truncation level K={K} too small for {spec.kind} n={spec.n}; need K >= {need}")
    if spec.kind == LAMBDA_SEQ:
        return ALPHA_STAR + 4.0 ** (-spec.n)
    return ALPHA_STAR + 4.0 ** (-(spec.n + 1)), ALPHA_STAR + 4.0 ** (-spec.n)


def gap_check(n: int, K: int, actions: Optional[Iterable[float]] = None) -> bool:
    """True iff no action lies strictly between ``q(mu_n/2)`` and ``q(2 mu_n)``."""
    lo, hi = probe_alpha(SequenceSpec(MU_SEQ, n), K)
    grid = action_grid(K) if actions is None else actions
    return not any(lo < t < hi for t in grid)


def algebraic_identities(n: int, dps: int = 50) -> list[tuple[str, mpmath.mpf, mpmath.mpf]]:
    """Quadratic identities of the probe values, evaluated at ``dps`` digits.

    Each entry is ``(name, lhs, rhs)`` where ``rhs`` is the closed form in ``rho_n``.
    """
    with mpmath.workdps(dps):
        s2 = mpmath.sqrt(2)
        rho = mpmath.mpf(2) ** (-2 * n - 2)
        theta_l = 1 / (mpmath.mpf(3) / 4 - s2 / 2)
        theta_m = 5 * (3 + 2 * s2)
        lam_n = 4 * theta_l * rho
        mu_n = 2 * theta_m * rho
        pn = 2 - s2 + lam_n / theta_l
        qs = 2 - s2 + (mu_n / 2) / theta_m
        qb = 2 - s2 + (2 * mu_n) / theta_m
        return [
            ("p(lambda_n)^2 - 4p(lambda_n) + 2", pn**2 - 4 * pn + 2, -8 * s2 * rho + 16 * rho**2),
            ("q(mu_n/2)^2 - 4q(mu_n/2) + 2", qs**2 - 4 * qs + 2, -2 * s2 * rho + rho**2),
            ("q(2mu_n)^2 - 4q(2mu_n) + 2", qb**2 - 4 * qb + 2, -8 * s2 * rho + 16 * rho**2),
            ("q(mu_n/2)q(2mu_n) - 2q(mu_n/2) - 2q(2mu_n) + 2", qs * qb - 2 * qs - 2 * qb + 2, -5 * s2 * rho + 4 * rho**2),
        ]


@dataclass(frozen=True)
class LimitConstant:
    sequence: str
    case: tuple[int, int]
    component: str
    expression: str
    value: float


_MU_OFFSETS = {
    (0, 0): ("3/(10(2+sqrt2))", 3.0 / (10.0 * (2.0 + SQRT2))),
    (0, 1): ("3/(5(3sqrt2+4))", 3.0 / (5.0 * (3.0 * SQRT2 + 4.0))),
    (1, 0): ("3/(5(3sqrt2+4))", 3.0 / (5.0 * (3.0 * SQRT2 + 4.0))),
    (1, 1): ("3/(20(1+sqrt2))", 3.0 / (20.0 * (1.0 + SQRT2))),
}


def limit_constants() -> list[LimitConstant]:
    """Limits of the frozen-policy values along both sequences.

    Along ``lambda_n`` every case tends to ``(1/sqrt2, -1/sqrt2)``; along ``mu_n``
    both components are shifted up by the same case-dependent positive offset.
    """
    half = HALF_SQRT2
    table = []
    for case in CASES:
        table.append(LimitConstant(LAMBDA_SEQ, case, "X", "1/sqrt2", half))
        table.append(LimitConstant(LAMBDA_SEQ, case, "Y", "-1/sqrt2", -half))
    for case in CASES:
        text, offset = _MU_OFFSETS[case]
        table.append(LimitConstant(MU_SEQ, case, "X", f"1/sqrt2 + {text}", half + offset))
        table.append(LimitConstant(MU_SEQ, case, "Y", f"-1/sqrt2 + {text}", -half + offset))
    return table


def limit_value(sequence: str, case: tuple[int, int], component: str) -> float:
    for c in limit_constants():
        if (c.sequence, c.case, c.component) == (sequence, tuple(case), component):
            return c.value
    raise KeyError((sequence, case, component))


def case_alphas(spec: SequenceSpec, case: tuple[int, int]) -> tuple[float, float]:
    case = tuple(case)
    if case not in CASES:
        raise ValueError(f"policy case must be one of {CASES}, got {case}")
    if spec.kind == LAMBDA_SEQ:
        a = probe_alpha(spec)
        return a, a
    small, big = probe_alpha(spec)
    pick = {"small": small, "big": big}
    first, second = MU_ASSIGNMENT[case]
    return pick[first], pick[second]


def policy_limit_value(spec: SequenceSpec, case: tuple[int, int]):
    a1, a2 = case_alphas(spec, case)
    return closed_form_policy_value(discount(spec), a1, a2, *case)


def x_n_y_n(n: int, K: Optional[int] = None) -> tuple[float, float]:
    """Minima of the four mu-seq case values; lower bounds for ``(X_{mu_n}, Y_{mu_n})``."""
    spec = SequenceSpec(MU_SEQ, n)
    probe_alpha(spec, K)
    values = [policy_limit_value(spec, case) for case in CASES]
    return min(v.u1 for v in values), min(v.u2 for v in values)


def lambda_upper_bound(n: int) -> tuple[float, float]:
    """Largest lambda-seq case value; ``X_{lambda_n}`` lies below the selected case."""
    spec = SequenceSpec(LAMBDA_SEQ, n)
    values = [policy_limit_value(spec, case) for case in CASES]
    return max(v.u1 for v in values), max(v.u2 for v in values)


def alpha_partials(lam: float, a1: float, a2: float, b1: int, b2: int) -> tuple[float, float]:
    """Closed-form ``d X / d alpha1`` and ``d X / d alpha2`` of the frozen-policy value."""
    l = lam
    case = (b1, b2)
    if case == (0, 0):
        den = l * (a1 + a2 + l) ** 2
        return -2 * (l + 2) * (l + a2) / den, 2 * a1 * (l + 2) / den
    if case == (0, 1):
        den = l * (a1 - a2 + l + 1) ** 2
        return -(l + 1 - a2) * (2 * (l + 2) - a2) / den, -a1 * (l + 3 - a1) / den
    if case == (1, 0):
        den = l * (-a1 + a2 + l + 1) ** 2
        return (l + a2) * (-a2 + l + 3) / den, (1 - a1) * (-a1 + 2 * (l + 2)) / den
    if case == (1, 1):
        den = l * (-a1 - a2 + l + 2) ** 2
        return (l + 2) * (-a2 + l + 1) / den, -(1 - a1) * (l + 2) / den
    raise ValueError(f"beta values must be 0 or 1, got {case}")


@dataclass
class SequenceRow:
    kind: str
    n: int
    discount: float
    X: float
    Y: float
    residual1: float
    residual2: float
    policy: PolicyQuadruple
    solver: str
    iterations: int
    bound_X: float
    bound_Y: float


@dataclass
class OscillationReport:
    lambda_rows: list[SequenceRow]
    mu_rows: list[SequenceRow]
    limsup_estimate_X: float
    liminf_estimate_X: float
    gap_X: float
    limsup_estimate_Y: float
    liminf_estimate_Y: float
    gap_Y: float
    K: int

    @property
    def rows(self) -> list[SequenceRow]:
        return sorted(self.lambda_rows + self.mu_rows, key=lambda r: (r.n, r.kind))

    def summary(self) -> dict:
        return {
            "K": self.K,
            "tail": [r.n for r in self.lambda_rows[-TAIL:]],
            "limsup_estimate_X": self.limsup_estimate_X,
            "liminf_estimate_X": self.liminf_estimate_X,
            "gap_X": self.gap_X,
            "limsup_estimate_Y": self.limsup_estimate_Y,
            "liminf_estimate_Y": self.liminf_estimate_Y,
            "gap_Y": self.gap_Y,
        }


def ordered_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """``map`` with an optional thread pool; results keep the input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _solve_point(kind: str, n: int, instance: SystemInstance, config: SolveConfig) -> SequenceRow:
    spec = SequenceSpec(kind, n)
    lam = discount(spec)
    report: SolveReport = solve(instance, lam, config)
    if not report.converged:
        raise SolveFailure(
            f"{kind} n={n} lam={lam!r}: {report.method} stopped at u={tuple(report.u)} "
            f"with residual {report.max_residual:.3e} > {report.tolerance:.1e} after {report.iterations} iterations"
        )
    if kind == LAMBDA_SEQ:
        bx, by = lambda_upper_bound(n)
    else:
        bx, by = x_n_y_n(n)
    return SequenceRow(
        kind, n, lam, report.X, report.Y, report.residual1, report.residual2,
        report.policy, report.method, report.iterations, bx, by,
    )


def sequence_rows(
    kind: str,
    n_min: int,
    n_max: int,
    K: int,
    config: Optional[SolveConfig] = None,
    jobs: int = 1,
) -> list[SequenceRow]:
    if not 1 <= n_min <= n_max:
        raise ValueError(f"need 1 <= n_min <= n_max, got {n_min}, {n_max}")
    need = required_K(kind, n_max)
    if K < need:
        raise ValueError(f"truncation level K={K} too small for {kind} up to n={n_max}; need K >= {need}")
    config = config or SolveConfig(method=POLICY_ENUM)
    instance = build_instance(K)
    return ordered_map(lambda n: _solve_point(kind, n, instance, config), list(range(n_min, n_max + 1)), jobs)


def oscillation_report(
    n_min: int = 2,
    n_max: int = 8,
    K: int = 12,
    config: Optional[SolveConfig] = None,
    jobs: int = 1,
) -> OscillationReport:
    if K < n_max + 2:
        raise ValueError(f"truncation level K={K} too small for n_max={n_max}; need K >= {n_max + 2}")
    lam_rows = sequence_rows(LAMBDA_SEQ, n_min, n_max, K, config, jobs)
    mu_rows = sequence_rows(MU_SEQ, n_min, n_max, K, config, jobs)
    lam_tail, mu_tail = lam_rows[-TAIL:], mu_rows[-TAIL:]
    sup_x = max(r.X for r in lam_tail)
    inf_x = min(r.X for r in mu_tail)
    sup_y = max(r.Y for r in lam_tail)
    inf_y = min(r.Y for r in mu_tail)
    return OscillationReport(
        lam_rows, mu_rows, sup_x, inf_x, inf_x - sup_x, sup_y, inf_y, inf_y - sup_y, K,
    )

"""Solvers for ``lam*u + A(u) = g`` and the policy-wise linear systems.

Three independent routes reach the unique solution:

* ``value_iteration``: the contraction ``u -> (g + u - A(u)) / (1 + lam)``.
* ``monotone_solve``: the constructive existence argument; start at ``-(R, R)``
  and push upward through shifted problems ``(lam + M) u + A(u) = g + M u_prev``.
* ``policy_enum_solve``: freeze every policy quadruple, solve the 2x2 linear
  system, keep the candidate with the smallest nonlinear residual.

All stopping rules are on the max-norm of the nonlinear residual.  The two
iterative routes finish with a common-mode correction: ``A(u + c) = A(u)`` for
constants ``c``, so shifting by ``c = -(r1 + r2) / (2 lam)`` cancels the mean of
the residual exactly and leaves only its differential part.  Without it the
stopped iterate can sit ``tol / lam`` away from the solution along ``(1, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .game_core import (
    PolicyQuadruple,
    SystemInstance,
    ValuePair,
    bellman,
    coupling_matrix,
    lipschitz_bound,
    payoff,
    payoff_sup,
)

VALUE_ITERATION = "value-iteration"
MONOTONE = "monotone-prop1"
POLICY_ENUM = "policy-enum"
METHODS = (VALUE_ITERATION, MONOTONE, POLICY_ENUM)

DEFAULT_BUDGET = {
    VALUE_ITERATION: 200_000_000,
    MONOTONE: 1_000_000,
    POLICY_ENUM: 10_000_000,
}
# Below this discount, value iteration needs ~(1/lam)*log(1/tol) sweeps.
AUTO_ENUM_BELOW = 1e-4
TINY_DISCOUNT = 1e-6
TINY_DISCOUNT_TOL = 1e-9
SUBSOLUTION_SLACK = 1e-14
_ENUM_CHUNK_ELEMENTS = 2_000_000


class MonotonicityError(RuntimeError):
    """Outer iterates of the monotone scheme decreased beyond round-off."""


@dataclass(frozen=True)
class SolveConfig:
    method: str = VALUE_ITERATION
    residual_tol: float = 1e-12
    max_iterations: Optional[int] = None
    max_inner_iterations: int = 1_000_000
    recentre: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.max_inner_iterations < 1:
            raise ValueError("max_inner_iterations must be at least 1")

    @property
    def budget(self) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return DEFAULT_BUDGET[self.method]

    def tolerance(self, lam: float) -> float:
        """Active residual tolerance; relaxed to 1e-9 for ``lam <= 1e-6``."""
        if lam <= TINY_DISCOUNT:
            return max(self.residual_tol, TINY_DISCOUNT_TOL)
        return self.residual_tol

    def with_method(self, method: str) -> "SolveConfig":
        return replace(self, method=method)


def auto_method(lam: float) -> str:
    return POLICY_ENUM if lam < AUTO_ENUM_BELOW else VALUE_ITERATION


@dataclass
class SolveReport:
    u: ValuePair
    residual1: float
    residual2: float
    iterations: int
    method: str
    policy: PolicyQuadruple
    discount: float
    tolerance: float
    converged: bool = True
    inner_iterations: int = 0
    bound: Optional[float] = None
    lipschitz: Optional[float] = None
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def X(self) -> float:
        return self.u.u1

    @property
    def Y(self) -> float:
        return self.u.u2

    @property
    def max_residual(self) -> float:
        return max(abs(self.residual1), abs(self.residual2))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lambda": self.discount,
            "u1": self.u.u1,
            "u2": self.u.u2,
            "residual1": self.residual1,
            "residual2": self.residual2,
            "tolerance": self.tolerance,
            "converged": self.converged,
            "iterations": self.iterations,
            "policy": self.policy._asdict(),
        }


def _check_discount(lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"discount must be positive, got {lam!r}")


def residual(u: Sequence[float], instance: SystemInstance, lam: float) -> tuple[float, float]:
    """``(lam*u1 + A_1(u) - g1, lam*u2 + A_2(u) - g2)``."""
    _check_discount(lam)
    t = instance.tables
    u1, u2 = float(u[0]), float(u[1])
    return _kernels.residual(t.diag, t.pay, instance.g1, instance.g2, float(lam), u1, u2)


def check_subsolution(v: Sequence[float], instance: SystemInstance, lam: float) -> bool:
    r1, r2 = residual(v, instance, lam)
    return r1 <= SUBSOLUTION_SLACK and r2 <= SUBSOLUTION_SLACK


def check_supersolution(v: Sequence[float], instance: SystemInstance, lam: float) -> bool:
    r1, r2 = residual(v, instance, lam)
    return r1 >= -SUBSOLUTION_SLACK and r2 >= -SUBSOLUTION_SLACK


def _linear_solve(lam, c1, c2, h1, h2):
    # (lam + c1) X - c1 Y = h1 and -c2 X + (lam + c2) Y = h2, with determinant
    # lam*(lam + c1 + c2). Eliminating through D = X - Y keeps X - Y accurate.
    D = (h1 - h2) / (lam + c1 + c2)
    X = (h1 - c1 * D) / lam
    return X, X - D


def policy_value(lam: float, policy: Sequence[float], instance: Optional[SystemInstance] = None) -> ValuePair:
    """Solve the linear system obtained by freezing ``policy``.

    ``instance`` only supplies ``g``; omitted means ``g = 0``.
    """
    _check_discount(lam)
    a1, b1, a2, b2 = policy
    g1, g2 = (instance.g1, instance.g2) if instance is not None else (0.0, 0.0)
    c1 = coupling_matrix(a1, b1).c11
    c2 = coupling_matrix(a2, b2).c22
    h1 = payoff(1, a1, b1) + g1
    h2 = payoff(2, a2, b2) + g2
    X, Y = _linear_solve(lam, c1, c2, h1, h2)
    return ValuePair(float(X), float(Y))


def closed_form_policy_value(lam: float, a1: float, a2: float, b1: int, b2: int) -> ValuePair:
    """Rational closed forms of the policy value for ``g = 0`` and ``beta_i`` in {0, 1}."""
    _check_discount(lam)
    l = lam
    case = (b1, b2)
    if case == (0, 0):
        den = l * (a1 + a2 + l)
        X = -2 * (a1 * l + a1 - a2 - l) / den
        Y = 2 * (a2 * l + a2 - a1 - l) / den
    elif case == (0, 1):
        den = l * (a1 - a2 + l + 1)
        X = (a1 * a2 - 2 * a1 * l - 2 * a1 - 2 * a2 + 2 * l + 2) / den
        Y = (a1 * a2 - 2 * a1 - a2 * l - 2 * a2 + 2) / den
    elif case == (1, 0):
        den = l * (-a1 + a2 + l + 1)
        X = -(a1 * a2 - a1 * l - 2 * a1 - 2 * a2 + 2) / den
        Y = -(a1 * a2 - 2 * a1 - 2 * a2 * l - 2 * a2 + 2 * l + 2) / den
    elif case == (1, 1):
        den = l * (-a1 - a2 + l + 2)
        X = (a1 * l + a1 - a2) / den
        Y = -(-a1 + a2 * l + a2) / den
    else:
        raise ValueError(f"beta values must be 0 or 1, got {case}")
    return ValuePair(X, Y)


def _recentre(instance: SystemInstance, lam: float, u, r):
    """Shift ``u`` along ``(1, 1)`` to cancel the mean residual; keep it only if no worse."""
    c = -(r[0] + r[1]) / (2.0 * lam)
    v = (u[0] + c, u[1] + c)
    rv = residual(v, instance, lam)
    if max(abs(rv[0]), abs(rv[1])) <= max(abs(r[0]), abs(r[1])):
        return v, rv
    return u, r


def _finish(instance: SystemInstance, lam: float, config: SolveConfig, u):
    r = residual(u, instance, lam)
    if config.recentre:
        u, r = _recentre(instance, lam, u, r)
    return ValuePair(float(u[0]), float(u[1])), r


def _policy_at(u: Sequence[float], instance: SystemInstance) -> PolicyQuadruple:
    _, a1, b1 = bellman(1, u, instance)
    _, a2, b2 = bellman(2, u, instance)
    return PolicyQuadruple(a1, b1, a2, b2)


def value_iteration(
    instance: SystemInstance,
    lam: float,
    config: Optional[SolveConfig] = None,
    start: Sequence[float] = (0.0, 0.0),
) -> SolveReport:
    _check_discount(lam)
    config = (config or SolveConfig()).with_method(VALUE_ITERATION)
    tol = config.tolerance(lam)
    t = instance.tables
    u1, u2, iters, status = _kernels.value_iteration(
        t.diag, t.pay, instance.g1, instance.g2, float(lam),
        float(start[0]), float(start[1]), tol, config.budget,
    )
    u, (r1, r2) = _finish(instance, lam, config, (u1, u2))
    return SolveReport(
        u=u, residual1=r1, residual2=r2, iterations=int(iters),
        method=VALUE_ITERATION, policy=_policy_at(u, instance), discount=lam,
        tolerance=tol, converged=status == _kernels.STATUS_OK and max(abs(r1), abs(r2)) <= tol,
    )


def monotone_bound(instance: SystemInstance, lam: float) -> float:
    """``R = max_i (sup|L_i| + |g_i|) / lam``; ``-(R, R)`` and ``(R, R)`` bracket the solution."""
    _check_discount(lam)
    return max(payoff_sup(1, instance) + abs(instance.g1), payoff_sup(2, instance) + abs(instance.g2)) / lam


def monotone_solve(instance: SystemInstance, lam: float, config: Optional[SolveConfig] = None) -> SolveReport:
    """Monotone scheme from ``-(R, R)``; the report carries the full outer trajectory."""
    _check_discount(lam)
    config = (config or SolveConfig()).with_method(MONOTONE)
    tol = config.tolerance(lam)
    inner_tol = tol / 10.0
    R = monotone_bound(instance, lam)
    M = lipschitz_bound(instance)
    t = instance.tables
    traj, inner, status = _kernels.monotone_outer(
        t.diag, t.pay, instance.g1, instance.g2, float(lam), M, R,
        tol, inner_tol, config.budget, config.max_inner_iterations,
    )
    if status == _kernels.STATUS_NOT_MONOTONE:
        prev, last = traj[-2], traj[-1]
        raise MonotonicityError(
            f"outer iterate decreased at step {len(traj) - 1}: {tuple(prev)} -> {tuple(last)} "
            f"(lam={lam!r}, slack={10 * inner_tol:g})"
        )
    u, (r1, r2) = _finish(instance, lam, config, (float(traj[-1, 0]), float(traj[-1, 1])))
    return SolveReport(
        u=u, residual1=r1, residual2=r2, iterations=len(traj) - 1,
        method=MONOTONE, policy=_policy_at(u, instance), discount=lam,
        tolerance=tol, converged=status == _kernels.STATUS_OK and max(abs(r1), abs(r2)) <= tol,
        inner_iterations=int(inner),
        bound=R, lipschitz=M, trajectory=traj,
    )


def _equation_grid(instance: SystemInstance, i: int):
    A, B = instance.actions(i)
    alpha = np.repeat(np.asarray(A), len(B))
    beta = np.tile(np.asarray(B), len(A))
    c = coupling_matrix(alpha, beta)
    diag = c.c11 if i == 1 else c.c22
    g = instance.g1 if i == 1 else instance.g2
    return alpha, beta, diag, payoff(i, alpha, beta) + g


def policy_enum_solve(instance: SystemInstance, lam: float, config: Optional[SolveConfig] = None) -> SolveReport:
    """Enumerate policy quadruples; ties in residual go to the first in (alpha1, beta1, alpha2, beta2) order."""
    _check_discount(lam)
    config = (config or SolveConfig()).with_method(POLICY_ENUM)
    count = instance.policy_count
    if count > config.budget:
        raise ValueError(f"{count} policy quadruples exceed the enumeration budget {config.budget}")
    tol = config.tolerance(lam)
    a1, b1, c1, h1 = _equation_grid(instance, 1)
    a2, b2, c2, h2 = _equation_grid(instance, 2)
    t = instance.tables
    n2 = len(c2)
    per_row = n2 * t.diag.shape[1] * t.diag.shape[2]
    chunk = max(1, _ENUM_CHUNK_ELEMENTS // per_row)
    best_err, best_idx, best_u = np.inf, None, None
    for start in range(0, len(c1), chunk):
        sl = slice(start, start + chunk)
        X, Y = _linear_solve(lam, c1[sl, None], c2[None, :], h1[sl, None], h2[None, :])
        d = (X - Y)[..., None, None]
        A1 = (t.diag[0] * d - t.pay[0]).min(axis=-1).max(axis=-1)
        A2 = (t.diag[1] * -d - t.pay[1]).min(axis=-1).max(axis=-1)
        err = np.maximum(np.abs(lam * X + A1 - instance.g1), np.abs(lam * Y + A2 - instance.g2))
        k = int(np.argmin(err))
        if err.flat[k] < best_err:
            i, j = divmod(k, n2)
            best_err, best_idx = float(err.flat[k]), (start + i, j)
            best_u = (float(X[i, j]), float(Y[i, j]))
    i, j = best_idx
    policy = PolicyQuadruple(float(a1[i]), float(b1[i]), float(a2[j]), float(b2[j]))
    r1, r2 = residual(best_u, instance, lam)
    return SolveReport(
        u=ValuePair(*best_u), residual1=r1, residual2=r2, iterations=count,
        method=POLICY_ENUM, policy=policy, discount=lam, tolerance=tol,
        converged=max(abs(r1), abs(r2)) <= tol,
    )


_DISPATCH = {
    VALUE_ITERATION: value_iteration,
    MONOTONE: monotone_solve,
    POLICY_ENUM: policy_enum_solve,
}


def solve(instance: SystemInstance, lam: float, config: Optional[SolveConfig] = None) -> SolveReport:
    config = config or SolveConfig()
    return _DISPATCH[config.method](instance, lam, config)

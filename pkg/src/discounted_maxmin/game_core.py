"""Coupling matrices, payoffs and the max-min operators of the two-state system.

Every equation ``i`` of the system

    lam * u_i + A_i(u_1, u_2) = g_i

carries a max-min operator

    A_i(u) = max_{alpha in A_i} min_{beta in B_i} b_i(alpha, beta, u)

built from the coupling matrix ``C(alpha, beta)`` and the running payoffs
``L_1 = -L_2``.  Action sets are finite, sorted tuples of floats in [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MERGE_TOL = 1e-15


class InstanceError(ValueError):
    """Raised for malformed action sets or instance files."""


class ValuePair(NamedTuple):
    u1: float
    u2: float


class PolicyQuadruple(NamedTuple):
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float


@dataclass(frozen=True)
class CouplingMatrix:
    c11: float
    c12: float
    c21: float
    c22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.c11, self.c12], [self.c21, self.c22]])


def coupling_matrix(alpha: float, beta: float) -> CouplingMatrix:
    """Return ``C(alpha, beta) = I + beta*P + (1 - beta)*Q``.

    Expanding the three terms gives ``c11 = c22 = 1 - alpha*beta - (1-alpha)*(1-beta)``
    and ``c12 = c21 = -c11``, so the off-diagonal entries are stored as the exact
    negation and every row sums to zero in floating point too.  The diagonal is
    evaluated as ``alpha*(1-beta) + beta*(1-alpha)``, the same polynomial without
    the cancellation near ``alpha, beta -> 0``.
    """
    diag = alpha * (1.0 - beta) + beta * (1.0 - alpha)
    return CouplingMatrix(diag, -diag, -diag, diag)


def payoff(i: int, alpha: float, beta: float) -> float:
    """Running payoff ``L_i``; ``L_2`` is the negation of ``L_1``."""
    value = alpha * beta + 2.0 * (1.0 - alpha) * (1.0 - beta)
    if i == 1:
        return value
    if i == 2:
        return -value
    raise ValueError(f"equation index must be 1 or 2, got {i!r}")


def running_cost(i: int, alpha: float, beta: float, u: Sequence[float]) -> float:
    """``b_i = c_i1*u1 + c_i2*u2 - L_i``.

    Rows of ``C`` sum to zero, so the affine part reduces to ``c_ii*(u_i - u_j)``;
    evaluating it that way keeps shift invariance exact up to one rounding.
    """
    u1, u2 = u
    c = coupling_matrix(alpha, beta)
    if i == 1:
        return c.c11 * (u1 - u2) - payoff(1, alpha, beta)
    if i == 2:
        return c.c22 * (u2 - u1) - payoff(2, alpha, beta)
    raise ValueError(f"equation index must be 1 or 2, got {i!r}")


def action_set(values: Iterable[float], tol: float = MERGE_TOL) -> tuple[float, ...]:
    """Sort, validate and deduplicate raw action values.

    Values closer than ``tol`` to their predecessor are merged into it.
    """
    raw = []
    for v in values:
        v = float(v)
        if not math.isfinite(v) or v < 0.0 or v > 1.0:
            raise InstanceError(f"action value {v!r} outside [0, 1]")
        raw.append(v)
    if not raw:
        raise InstanceError("action set must be nonempty")
    raw.sort()
    out = [raw[0]]
    for v in raw[1:]:
        if v - out[-1] >= tol:
            out.append(v)
    return tuple(out)


def _validate_set(name: str, values: tuple[float, ...]) -> None:
    if not values:
        raise InstanceError(f"{name} is empty")
    for v in values:
        if not (0.0 <= v <= 1.0):
            raise InstanceError(f"{name} contains {v!r} outside [0, 1]")
    for a, b in zip(values, values[1:]):
        if not a < b:
            raise InstanceError(f"{name} is not strictly increasing at {a!r}, {b!r}")


@dataclass(frozen=True)
class SystemInstance:
    """Action sets per equation and the right-hand side ``g``."""

    A1: tuple[float, ...]
    A2: tuple[float, ...]
    B1: tuple[float, ...]
    B2: tuple[float, ...]
    g1: float = 0.0
    g2: float = 0.0

    def __post_init__(self):
        for name in ("A1", "A2", "B1", "B2"):
            values = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, values)
            _validate_set(name, values)
        object.__setattr__(self, "g1", float(self.g1))
        object.__setattr__(self, "g2", float(self.g2))

    def actions(self, i: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
        if i == 1:
            return self.A1, self.B1
        if i == 2:
            return self.A2, self.B2
        raise ValueError(f"equation index must be 1 or 2, got {i!r}")

    @property
    def g(self) -> tuple[float, float]:
        return (self.g1, self.g2)

    @property
    def policy_count(self) -> int:
        return len(self.A1) * len(self.B1) * len(self.A2) * len(self.B2)

    @cached_property
    def tables(self) -> "OperatorTables":
        return OperatorTables.build(self)


@dataclass(frozen=True, eq=False)
class OperatorTables:
    """Padded per-equation grids of ``c_ii`` and ``L_i`` for vectorised evaluation.

    Shape is ``(2, n_alpha, n_beta)`` with the larger set sizes; the smaller sets
    are padded by repeating their last row or column, which leaves both the max
    and the min unchanged.
    """

    diag: np.ndarray = field(repr=False)
    pay: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, instance: SystemInstance) -> "OperatorTables":
        na = max(len(instance.A1), len(instance.A2))
        nb = max(len(instance.B1), len(instance.B2))
        diag = np.empty((2, na, nb))
        pay = np.empty((2, na, nb))
        for k, i in enumerate((1, 2)):
            A, B = instance.actions(i)
            Ap = list(A) + [A[-1]] * (na - len(A))
            Bp = list(B) + [B[-1]] * (nb - len(B))
            for a, alpha in enumerate(Ap):
                for b, beta in enumerate(Bp):
                    c = coupling_matrix(alpha, beta)
                    diag[k, a, b] = c.c11 if i == 1 else c.c22
                    pay[k, a, b] = payoff(i, alpha, beta)
        diag.setflags(write=False)
        pay.setflags(write=False)
        return cls(diag, pay)


def bellman(i: int, u: Sequence[float], instance: SystemInstance) -> tuple[float, float, float]:
    """Evaluate ``A_i(u)`` and return ``(value, argmax_alpha, argmin_beta)``.

    Ties in both the max and the inner min go to the smallest action value.
    """
    A, B = instance.actions(i)
    best = None
    for alpha in A:
        inner, inner_beta = None, None
        for beta in B:
            v = running_cost(i, alpha, beta, u)
            if inner is None or v < inner:
                inner, inner_beta = v, beta
        if best is None or inner > best[0]:
            best = (inner, alpha, inner_beta)
    return best


def operator(u: Sequence[float], instance: SystemInstance) -> ValuePair:
    """The map ``u -> (A_1(u), A_2(u))``."""
    return ValuePair(bellman(1, u, instance)[0], bellman(2, u, instance)[0])


def lipschitz_bound(instance: SystemInstance) -> float:
    """Max-norm Lipschitz constant ``max |c_i1| + |c_i2|`` over the action grid."""
    M = 0.0
    for i in (1, 2):
        A, B = instance.actions(i)
        for alpha in A:
            for beta in B:
                c = coupling_matrix(alpha, beta)
                row = (c.c11, c.c12) if i == 1 else (c.c21, c.c22)
                M = max(M, abs(row[0]) + abs(row[1]))
    return M


def payoff_sup(i: int, instance: SystemInstance) -> float:
    """``max |L_i|`` over the equation's action grid."""
    A, B = instance.actions(i)
    return max(abs(payoff(i, a, b)) for a in A for b in B)


def instance_from_dict(data: dict) -> SystemInstance:
    missing = [k for k in ("A1", "A2", "B1", "B2", "g") if k not in data]
    if missing:
        raise InstanceError(f"instance is missing keys: {', '.join(missing)}")
    g = data["g"]
    if not isinstance(g, (list, tuple)) or len(g) != 2:
        raise InstanceError("'g' must be an array of 2 numbers")
    sets = {}
    for key in ("A1", "A2", "B1", "B2"):
        values = data[key]
        if not isinstance(values, (list, tuple)):
            raise InstanceError(f"{key!r} must be an array of numbers")
        try:
            sets[key] = action_set(values)
        except InstanceError as exc:
            raise InstanceError(f"{key}: {exc}") from None
        except (TypeError, ValueError):
            raise InstanceError(f"{key!r} must contain only numbers") from None
    try:
        g1, g2 = (float(x) for x in g)
    except (TypeError, ValueError):
        raise InstanceError("'g' must contain only numbers") from None
    if not (math.isfinite(g1) and math.isfinite(g2)):
        raise InstanceError("'g' must be finite")
    return SystemInstance(g1=g1, g2=g2, **sets)


def instance_to_dict(instance: SystemInstance) -> dict:
    return {
        "A1": list(instance.A1),
        "A2": list(instance.A2),
        "B1": list(instance.B1),
        "B2": list(instance.B2),
        "g": [instance.g1, instance.g2],
    }


def load_instance(path: str | Path) -> SystemInstance:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InstanceError(f"cannot read instance file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InstanceError(f"instance file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InstanceError("instance file must hold a JSON object")
    return instance_from_dict(data)


def random_instance(rng: np.random.Generator, max_actions: int = 8, g_scale: float = 1.0) -> SystemInstance:
    """Random instance with up to ``max_actions`` values per set, ``g`` uniform in +-g_scale."""
    sets = {}
    for key in ("A1", "A2", "B1", "B2"):
        n = int(rng.integers(1, max_actions + 1))
        sets[key] = action_set(rng.random(n))
    g1, g2 = rng.uniform(-g_scale, g_scale, size=2)
    return SystemInstance(g1=g1, g2=g2, **sets)

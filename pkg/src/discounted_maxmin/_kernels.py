"""Compiled inner loops for the iterative solvers.

All kernels take the padded ``(2, n_alpha, n_beta)`` tables of ``c_ii`` and
``L_i`` and evaluate ``b_i = c_ii * (u_i - u_j) - L_i``.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_INNER_BUDGET = 2
STATUS_NOT_MONOTONE = 3


@njit(cache=True, nogil=True)
def maxmin(diag, pay, k, d):
    na, nb = diag.shape[1], diag.shape[2]
    best = -np.inf
    for a in range(na):
        inner = np.inf
        for b in range(nb):
            v = diag[k, a, b] * d - pay[k, a, b]
            if v < inner:
                inner = v
        if inner > best:
            best = inner
    return best


@njit(cache=True, nogil=True)
def residual(diag, pay, g1, g2, lam, u1, u2):
    d = u1 - u2
    r1 = lam * u1 + maxmin(diag, pay, 0, d) - g1
    r2 = lam * u2 + maxmin(diag, pay, 1, -d) - g2
    return r1, r2


@njit(cache=True, nogil=True)
def value_iteration(diag, pay, g1, g2, lam, u1, u2, tol, max_iter):
    """Iterate ``u <- u - res(u)/(1 + lam)``, i.e. ``u <- (g + u - A(u))/(1 + lam)``."""
    scale = 1.0 + lam
    best1, best2, best_err = u1, u2, np.inf
    it = 0
    while True:
        r1, r2 = residual(diag, pay, g1, g2, lam, u1, u2)
        err = max(abs(r1), abs(r2))
        if err < best_err:
            best1, best2, best_err = u1, u2, err
        if err <= tol:
            return u1, u2, it, STATUS_OK
        if it >= max_iter:
            return best1, best2, it, STATUS_BUDGET
        u1 = u1 - r1 / scale
        u2 = u2 - r2 / scale
        it += 1


@njit(cache=True, nogil=True)
def monotone_outer(diag, pay, g1, g2, lam, M, R, tol, inner_tol, max_outer, max_inner):
    """Monotone outer loop with a Banach inner solve for the shifted problem.

    Each outer step solves ``(lam + M) u + A(u) = g + M u_prev`` written for the
    increment ``w = u - u_prev``::

        w <- (g - lam*u_prev - A(u_prev + w)) / (lam + M)

    so every quantity stays O(|g| + |L|) even when ``u`` is of order ``R``.
    Returns the outer trajectory, total inner iterations and a status code.
    """
    shift = lam + M
    cap = 64
    traj = np.empty((cap, 2))
    u1, u2 = -R, -R
    traj[0, 0], traj[0, 1] = u1, u2
    n = 1
    inner_total = 0
    slack = 10.0 * inner_tol
    while True:
        r1, r2 = residual(diag, pay, g1, g2, lam, u1, u2)
        if max(abs(r1), abs(r2)) <= tol:
            return traj[:n], inner_total, STATUS_OK
        if n > max_outer:
            return traj[:n], inner_total, STATUS_BUDGET
        w1, w2 = 0.0, 0.0
        k = 0
        while True:
            d = (u1 - u2) + (w1 - w2)
            s1 = shift * w1 + lam * u1 + maxmin(diag, pay, 0, d) - g1
            s2 = shift * w2 + lam * u2 + maxmin(diag, pay, 1, -d) - g2
            if max(abs(s1), abs(s2)) <= inner_tol:
                break
            if k >= max_inner:
                return traj[:n], inner_total, STATUS_INNER_BUDGET
            w1 -= s1 / shift
            w2 -= s2 / shift
            k += 1
        inner_total += k
        u1 = u1 + w1
        u2 = u2 + w2
        if n == cap:
            cap *= 2
            grown = np.empty((cap, 2))
            grown[:n] = traj[:n]
            traj = grown
        traj[n, 0], traj[n, 1] = u1, u2
        n += 1
        if w1 < -slack or w2 < -slack:
            return traj[:n], inner_total, STATUS_NOT_MONOTONE
        # A stalled outer step with both increments exactly zero cannot make progress.
        if w1 == 0.0 and w2 == 0.0:
            r1, r2 = residual(diag, pay, g1, g2, lam, u1, u2)
            if max(abs(r1), abs(r2)) > tol:
                return traj[:n], inner_total, STATUS_BUDGET

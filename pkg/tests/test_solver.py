import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discounted_maxmin import counterexample as cx
from discounted_maxmin import solver as sv
from discounted_maxmin.game_core import SystemInstance, coupling_matrix, payoff, random_instance

SQRT2 = math.sqrt(2)
unit = st.floats(0.0, 1.0)
discounts = st.floats(1e-3, 1.0)

# Policy-enumeration solutions on the K = 25 instance, frozen at build time.
FROZEN_K25 = {
    1.0: (0.3766135457735157, -0.3226807354130319),
    0.1: (0.6457107073422008, -0.6363868493606128),
    0.01: (0.7513776310499543, -0.6485920934531102),
    0.001: (0.7577195194736763, -0.6550202679557395),
}


def numpy_policy_value(lam, policy, g=(0.0, 0.0)):
    """Oracle: (lam*I + C) u = L + g with the full coupling matrix."""
    a1, b1, a2, b2 = policy
    C = np.array([coupling_matrix(a1, b1).as_array()[0], coupling_matrix(a2, b2).as_array()[1]])
    rhs = np.array([payoff(1, a1, b1) + g[0], payoff(2, a2, b2) + g[1]])
    return np.linalg.solve(lam * np.eye(2) + C, rhs)


def test_residual_examples():
    single = SystemInstance((1.0,), (1.0,), (1.0,), (1.0,))
    assert sv.residual((1.0, -1.0), single, 1.0) == (0.0, 0.0)
    assert sv.residual((0.0, 0.0), single, 1.0) == (-1.0, 1.0)
    r = sv.residual(cx.STATIONARY_POINT, cx.build_instance(12), 1.0)
    assert r[0] == pytest.approx(1 / SQRT2, abs=1e-12) and r[1] == pytest.approx(-1 / SQRT2, abs=1e-12)
    with pytest.raises(ValueError):
        sv.residual((0.0, 0.0), single, 0.0)


def test_policy_value_examples():
    assert sv.policy_value(1.0, (1.0, 1.0, 1.0, 1.0)) == (1.0, -1.0)
    # alpha = beta = 0: no coupling, payoff 2 and -2.
    assert sv.policy_value(0.5, (0.0, 0.0, 0.0, 0.0)) == (4.0, -4.0)
    with pytest.raises(ValueError):
        sv.policy_value(-1.0, (0.5, 0.5, 0.5, 0.5))


@given(discounts, unit, unit, unit, unit, st.floats(-3, 3), st.floats(-3, 3))
def test_policy_value_matches_numpy(lam, a1, b1, a2, b2, g1, g2):
    inst = SystemInstance((0.5,), (0.5,), (0.5,), (0.5,), g1, g2)
    ref = numpy_policy_value(lam, (a1, b1, a2, b2), (g1, g2))
    got = sv.policy_value(lam, (a1, b1, a2, b2), inst)
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-9)


@given(discounts, unit)
def test_closed_form_symmetric_zero_zero(lam, a):
    X, Y = sv.closed_form_policy_value(lam, a, a, 0, 0)
    assert X == pytest.approx(2 * (1 - a) / (2 * a + lam), rel=1e-12, abs=1e-14)
    assert Y == pytest.approx(-X, rel=1e-12, abs=1e-14)


@given(discounts, unit, unit, st.sampled_from(cx.CASES))
def test_closed_form_matches_linear_solve(lam, a1, a2, case):
    b1, b2 = case
    ref = sv.policy_value(lam, (a1, b1, a2, b2))
    got = sv.closed_form_policy_value(lam, a1, a2, b1, b2)
    for r, g in zip(ref, got):
        assert g == pytest.approx(r, rel=1e-11, abs=1e-12)


@given(discounts, unit, unit, st.sampled_from(cx.CASES))
def test_swapping_states_negates(lam, a1, a2, case):
    b1, b2 = case
    x = sv.closed_form_policy_value(lam, a1, a2, b1, b2).u1
    y = sv.closed_form_policy_value(lam, a2, a1, b2, b1).u2
    assert abs(x + y) <= 1e-12 * max(1.0, abs(x))


def test_closed_form_rejects_mixed_beta():
    with pytest.raises(ValueError):
        sv.closed_form_policy_value(0.5, 0.2, 0.3, 0.5, 1)


def test_config_validation_and_tolerance():
    with pytest.raises(ValueError):
        sv.SolveConfig(method="newton")
    with pytest.raises(ValueError):
        sv.SolveConfig(residual_tol=0.0)
    cfg = sv.SolveConfig()
    assert cfg.tolerance(1e-3) == 1e-12
    assert cfg.tolerance(1e-6) == 1e-9
    assert sv.SolveConfig(residual_tol=1e-8).tolerance(1e-7) == 1e-8
    assert sv.auto_method(1e-5) == sv.POLICY_ENUM and sv.auto_method(1e-4) == sv.VALUE_ITERATION
    assert cfg.budget == sv.DEFAULT_BUDGET[sv.VALUE_ITERATION]


@pytest.mark.parametrize(
    "method, lam",
    [(m, lam) for m in sv.METHODS for lam in sorted(FROZEN_K25) if m == sv.POLICY_ENUM or lam >= 0.01],
)
def test_frozen_counterexample_solutions(cx25, method, lam):
    rep = sv.solve(cx25, lam, sv.SolveConfig(method=method, residual_tol=1e-13))
    assert rep.converged and rep.max_residual <= 1e-13
    assert rep.X == pytest.approx(FROZEN_K25[lam][0], abs=1e-9)
    assert rep.Y == pytest.approx(FROZEN_K25[lam][1], abs=1e-9)


def test_singleton_instance_every_method():
    inst = SystemInstance((1.0,), (1.0,), (1.0,), (1.0,))
    for method in sv.METHODS:
        rep = sv.solve(inst, 1.0, sv.SolveConfig(method=method))
        assert rep.u == pytest.approx((1.0, -1.0), abs=1e-12)
        assert rep.policy == (1.0, 1.0, 1.0, 1.0)


def test_policy_enum_reports_witnessing_policy():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inst = random_instance(rng)
        lam = 10 ** rng.uniform(-3, 0)
        rep = sv.policy_enum_solve(inst, lam)
        assert rep.iterations == inst.policy_count
        np.testing.assert_allclose(numpy_policy_value(lam, rep.policy, inst.g), rep.u, atol=1e-9)


def test_policy_enum_budget():
    with pytest.raises(ValueError, match="budget"):
        sv.policy_enum_solve(cx.build_instance(12), 0.1, sv.SolveConfig(method=sv.POLICY_ENUM, max_iterations=10))


def test_value_iteration_budget_returns_unconverged(cx12):
    rep = sv.value_iteration(cx12, 1e-3, sv.SolveConfig(max_iterations=5))
    assert not rep.converged and rep.iterations == 5


@given(st.floats(-5, 5), st.floats(0.05, 1.0))
def test_constant_g_shift(s, lam):
    # Adding s to both g_i shifts the solution by s/lam in both components.
    base = SystemInstance(*(cx.action_grid(4),) * 2, (0.0, 1.0), (0.0, 1.0))
    moved = SystemInstance(base.A1, base.A2, base.B1, base.B2, s, s)
    u = sv.policy_enum_solve(base, lam).u
    v = sv.policy_enum_solve(moved, lam).u
    for a, b in zip(u, v):
        assert b - a == pytest.approx(s / lam, abs=1e-9 * max(1.0, abs(s / lam)))


def test_sub_and_supersolution_examples(cx12):
    lam = 0.1
    assert sv.check_subsolution((0.0, -SQRT2), cx12, lam)
    assert sv.check_supersolution((SQRT2, 0.0), cx12, lam)
    R = sv.monotone_bound(cx12, lam)
    assert sv.check_subsolution((-R, -R), cx12, lam)
    assert sv.check_supersolution((R, R), cx12, lam)
    u = sv.policy_enum_solve(cx12, lam).u
    assert sv.check_supersolution((u[0] + 0.5, u[1] + 0.5), cx12, lam)
    assert sv.check_subsolution((u[0] - 0.5, u[1] - 0.5), cx12, lam)
    assert not sv.check_subsolution((u[0] + 0.5, u[1] + 0.5), cx12, lam)


def test_monotone_trajectory(cx25):
    rep = sv.monotone_solve(cx25, 0.1)
    assert rep.converged
    traj = rep.trajectory
    assert tuple(traj[0]) == (-rep.bound, -rep.bound)
    assert np.all(np.diff(traj, axis=0) >= -1e-10)
    assert np.all(np.abs(traj) <= rep.bound * (1 + 1e-12))
    assert rep.lipschitz <= 2.0
    assert rep.u == pytest.approx(FROZEN_K25[0.1], abs=1e-9)


def test_monotone_outer_budget(cx12):
    rep = sv.monotone_solve(cx12, 0.01, sv.SolveConfig(method=sv.MONOTONE, max_iterations=3))
    assert not rep.converged


def test_report_to_dict(cx12):
    d = sv.solve(cx12, 0.5).to_dict()
    assert {"u1", "u2", "residual1", "residual2", "method", "policy", "iterations"} <= set(d)


def test_recentre_removes_common_mode_error():
    rng = np.random.default_rng(9)
    worst_on = worst_off = 0.0
    for _ in range(30):
        inst = random_instance(rng)
        lam = float(10 ** rng.uniform(-3, -2))
        ref = np.array(sv.policy_enum_solve(inst, lam).u)
        for recentre in (True, False):
            for method in (sv.VALUE_ITERATION, sv.MONOTONE):
                rep = sv.solve(inst, lam, sv.SolveConfig(method=method, recentre=recentre))
                assert rep.converged and rep.max_residual <= 1e-12
                err = np.max(np.abs(np.array(rep.u) - ref))
                if recentre:
                    worst_on = max(worst_on, err)
                else:
                    worst_off = max(worst_off, err)
    assert worst_on <= 1e-10 < worst_off


def test_recentre_never_increases_residual():
    rng = np.random.default_rng(4)
    for _ in range(50):
        inst = random_instance(rng)
        lam = float(10 ** rng.uniform(-3, 0))
        u = tuple(rng.uniform(-5, 5, 2))
        r = sv.residual(u, inst, lam)
        _, rv = sv._recentre(inst, lam, u, r)
        assert max(map(abs, rv)) <= max(map(abs, r))


def test_linear_solve_accurate_for_tiny_alpha():
    # Found by hypothesis: c11 = 1 - (1 - alpha) loses all relative precision here.
    lam, a1, a2 = 0.001, 0.001, 1e-12
    with mpmath.workdps(50):
        l, A1, A2 = mpmath.mpf(lam), mpmath.mpf(a1), mpmath.mpf(a2)
        X = float(-2 * (A1 * l + A1 - A2 - l) / (l * (A1 + A2 + l)))
    assert sv.policy_value(lam, (a1, 0, a2, 0)).u1 == pytest.approx(X, rel=1e-12)
    assert sv.closed_form_policy_value(lam, a1, a2, 0, 0).u1 == pytest.approx(X, rel=1e-12)

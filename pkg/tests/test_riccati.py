"""Riccati solver oracles.

The scalar equation 2ap - b^2 p^2 / r + q = 0 has closed-form roots, which
pins the solver exactly; matrix cases are checked against a hand-rolled
policy iteration built only on the Lyapunov solver, and against residual
and definiteness certificates that need no reference solution at all.
"""

import numpy as np
import pytest

from mrarl.config import load_preset
from mrarl.errors import ConvergenceError, SingularMatrixError
from mrarl.matlin import is_hurwitz, solve_lyapunov
from mrarl.riccati import care_map_sampler, care_residual, dre_flow, solve_care


# ------------------------------------------------------- care_residual

def test_residual_at_scalar_solution():
    # a=0, b=q=r=1: equation is -p^2 + 1 = 0, p=1 is exact.
    assert care_residual([[1.0]], [[0.0]], [[1.0]], [[1.0]], [[1.0]]) == pytest.approx(0.0)


def test_residual_at_shifted_scalar_solution():
    # a=1: 2p - p^2 + 1 = 0 at p = 1 + sqrt(2).
    p = 1.0 + np.sqrt(2.0)
    r = care_residual([[p]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert r == pytest.approx(0.0, abs=1e-12)


def test_residual_away_from_solution():
    # p=0, a=1, q=2: the residual matrix is just Q.
    assert care_residual([[0.0]], [[1.0]], [[1.0]], [[2.0]], [[1.0]]) == pytest.approx(2.0)


def test_residual_rejects_singular_weight():
    with pytest.raises(SingularMatrixError):
        care_residual([[1.0]], [[0.0]], [[1.0]], [[1.0]], [[0.0]])


# ------------------------------------------------------------ dre_flow

def test_dre_flow_vanishes_at_solution():
    p = np.array([[1.0 + np.sqrt(2.0)]])
    dp = dre_flow(p, [[1.0]], [[1.0]], [[1.0]], [[1.0]], g=7.0)
    assert abs(dp[0, 0]) < 1e-12


def test_dre_flow_scalar_value():
    # At p=0 the flow is g*Q.
    dp = dre_flow([[0.0]], [[0.0]], [[1.0]], [[1.0]], [[1.0]], g=1.0)
    assert dp[0, 0] == pytest.approx(1.0)


def test_dre_flow_scales_exactly_in_g(rng):
    a = rng.standard_normal((3, 3))
    p = rng.standard_normal((3, 3))
    p = p + p.T
    b = rng.standard_normal((3, 2))
    q = np.eye(3)
    r = np.eye(2)
    np.testing.assert_array_equal(
        dre_flow(p, a, b, q, r, g=6.0), 2.0 * dre_flow(p, a, b, q, r, g=3.0)
    )


def test_dre_flow_output_symmetric(rng):
    a = rng.standard_normal((4, 4))
    p = rng.standard_normal((4, 4))
    p = p + p.T
    dp = dre_flow(p, a, np.eye(4), np.eye(4), np.eye(4), g=1.0)
    np.testing.assert_array_equal(dp, dp.T)


# ---------------------------------------------------------- solve_care

def test_scalar_neutral_plant():
    sol = solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert sol.p[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert sol.k[0, 0] == pytest.approx(-1.0, abs=1e-9)
    assert sol.residual <= 1e-9


def test_scalar_unstable_plant():
    sol = solve_care([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert sol.p[0, 0] == pytest.approx(1.0 + np.sqrt(2.0), abs=1e-9)


def test_zero_weight_stable_plant():
    # Q=0 with a stable plant: doing nothing is optimal, P=0.
    sol = solve_care([[-1.0]], [[1.0]], [[0.0]], [[1.0]])
    assert abs(sol.p[0, 0]) <= 1e-12


def test_warm_start_along_moving_plant(rng):
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    b = np.array([[0.0], [1.0]])
    q = np.eye(2)
    r = np.eye(1)
    cold = solve_care(a, b, q, r)
    nudged = a + 1e-3 * rng.standard_normal((2, 2))
    warm = solve_care(nudged, b, q, r, warm_start=cold.p)
    again = solve_care(nudged, b, q, r)
    np.testing.assert_allclose(warm.p, again.p, rtol=1e-7, atol=1e-10)
    assert warm.iterations <= 3


def test_matches_hand_rolled_policy_iteration():
    # Independent oracle: classic policy iteration from a known stabilizing
    # gain, K0 = [-1, -2] placing the double integrator at a double pole
    # -1, using only the Lyapunov solver.  The cost matrices must decrease
    # monotonically (each gain improves on the last) down to the fixed
    # point the solver reports.
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    q = np.eye(2)
    r = np.eye(1)
    k = np.array([[-1.0, -2.0]])
    p_prev = None
    for _ in range(30):
        p = solve_lyapunov(a + b @ k, q + k.T @ (r @ k))
        if p_prev is not None:
            assert np.linalg.eigvalsh(p_prev - p)[0] >= -1e-10
        k = -np.linalg.solve(r, b.T @ p)
        p_prev = p
    sol = solve_care(a, b, q, r)
    np.testing.assert_allclose(sol.p, p_prev, rtol=1e-9, atol=1e-10)
    assert is_hurwitz(a + b @ sol.k)


def test_motor_scale_problem_certificates():
    # The drive example runs at |A| ~ 2e4; no reference solution needed,
    # just the three certificates: tight residual, PSD solution, Hurwitz
    # closed loop.
    cfg = load_preset("example1")
    a = cfg.plant.a_at(0.0)
    b = cfg.plant.b
    sol = solve_care(a, b, cfg.q, cfg.r)
    assert sol.residual <= 1e-9
    assert np.linalg.eigvalsh(sol.p)[0] > 0.0
    assert is_hurwitz(a + b @ sol.k)


def test_care_map_is_locally_lipschitz(rng):
    # Differentiability probe used to justify warm starting: directional
    # finite differences at two step sizes must agree on the slope.
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    b = np.array([[0.0], [1.0]])
    q = np.eye(2)
    r = np.eye(1)
    delta = rng.standard_normal((2, 2))
    delta /= np.linalg.norm(delta)
    base = solve_care(a, b, q, r).p
    slopes = []
    for h in (1e-3, 1e-4):
        stepped = solve_care(a + h * delta, b, q, r).p
        slopes.append(np.linalg.norm(stepped - base) / h)
    assert slopes[0] == pytest.approx(slopes[1], rel=0.05)


def test_unsolvable_pair_raises():
    # Unstable and uncontrollable: no stabilizing solution exists.
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([[1.0], [0.0]])
    with pytest.raises((ConvergenceError, SingularMatrixError)):
        solve_care(a, b, np.eye(2), np.eye(1))


# ------------------------------------------------------ care_map_sampler

def test_sampler_zero_radius_collapses_to_center():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    b = np.array([[0.0], [1.0]])
    report = care_map_sampler(a, 0.0, b, np.eye(2), np.eye(1), samples=6)
    assert report.ok
    assert len(report.samples) == 7
    assert report.samples[0].kind == "center"


def test_sampler_flags_uncontrollable_ball():
    # B touches only the first state and the center's second row is
    # decoupled; since sampling stays on center + Image(B), every sample
    # inherits the uncontrollable second state and must be flagged.
    a = np.array([[0.0, 1.0], [0.0, -1.0]])
    b = np.array([[1.0], [0.0]])
    report = care_map_sampler(a, 0.5, b, np.eye(2), np.eye(1), samples=8, seed=3)
    assert not report.ok
    assert all(not s.controllable for s in report.samples)


def test_sampler_solvable_ball_passes():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    b = np.array([[1.0, 0.0], [0.0, 1.0]])
    report = care_map_sampler(a, 0.3, b, np.eye(2), np.eye(2), samples=10, seed=1)
    assert report.ok
    kinds = {s.kind for s in report.samples}
    assert kinds == {"center", "interior", "boundary"}

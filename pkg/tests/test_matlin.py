"""Oracles for the dense linear-algebra helpers.

Frozen values are hand derivations (noted inline); randomized checks
compare against an independent route (SVD-free definitions, eigensolver
cross-checks, or exact matrix-exponential quadrature).
"""

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from mrarl.errors import NotPsdError, SingularMatrixError
from mrarl.matlin import (
    char_poly,
    ctrb_rank,
    is_hurwitz,
    numerical_rank,
    obsv_rank,
    pinv,
    solve_lyapunov,
    sym_sqrt,
)


# ---------------------------------------------------------------- pinv

def test_pinv_identity():
    m_pinv, rank = pinv(np.eye(2))
    np.testing.assert_allclose(m_pinv, np.eye(2), atol=1e-14)
    assert rank == 2


def test_pinv_scalar():
    m_pinv, rank = pinv([[2.0]])
    assert m_pinv[0, 0] == pytest.approx(0.5)
    assert rank == 1


def test_pinv_tall_column():
    # Full-column-rank tall matrix: pinv = (M'M)^-1 M' = [1 1] / 2.
    m_pinv, rank = pinv([[1.0], [1.0]])
    np.testing.assert_allclose(m_pinv, [[0.5, 0.5]])
    assert rank == 1


def test_pinv_zero_matrix():
    m_pinv, rank = pinv(np.zeros((2, 3)))
    assert m_pinv.shape == (3, 2)
    assert rank == 0
    assert np.all(m_pinv == 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_pinv_moore_penrose_identities(seed):
    rng = np.random.default_rng(seed)
    p, q = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    m = rng.standard_normal((p, q))
    if rng.random() < 0.3:
        # Force rank deficiency so the low-rank branch is exercised too.
        m[:, -1] = m[:, 0] if q > 1 else 0.0
    m_pinv, rank = pinv(m)
    tol = 1e-10 * (1.0 + np.linalg.norm(m))
    np.testing.assert_allclose(m @ m_pinv @ m, m, atol=tol)
    np.testing.assert_allclose(m_pinv @ m @ m_pinv, m_pinv, atol=tol)
    np.testing.assert_allclose((m @ m_pinv).T, m @ m_pinv, atol=tol)
    np.testing.assert_allclose((m_pinv @ m).T, m_pinv @ m, atol=tol)
    assert rank == np.linalg.matrix_rank(m, tol=1e-8 * max(1.0, np.linalg.norm(m, 2)))


# ------------------------------------------------------- solve_lyapunov

def test_lyapunov_diagonal():
    # A = -I: A'P + PA + Q = -2P + Q, so P = Q/2.
    p = solve_lyapunov(-np.eye(2), 2.0 * np.eye(2))
    np.testing.assert_allclose(p, np.eye(2), atol=1e-12)


def test_lyapunov_companion_hand_case():
    # A = [[0,1],[-1,-1]], Q = I.  Writing out A'P + PA + I = 0 entrywise:
    # (1,1): -2 p12 + 1 = 0, (2,2): 2(p12 - p22) + 1 = 0,
    # (1,2): p11 - p12 - p22 = 0, hence P = [[3/2, 1/2], [1/2, 1]].
    a = np.array([[0.0, 1.0], [-1.0, -1.0]])
    p = solve_lyapunov(a, np.eye(2))
    np.testing.assert_allclose(p, [[1.5, 0.5], [0.5, 1.0]], atol=1e-12)


def test_lyapunov_zero_rhs():
    p = solve_lyapunov(-np.eye(3), np.zeros((3, 3)))
    assert np.all(p == 0.0)


def test_lyapunov_singular_pair_rejected():
    # Pure rotation: eigenvalues +-i sum to zero, the vectorized system is
    # singular and must be reported, not silently least-squared.
    with pytest.raises(SingularMatrixError):
        solve_lyapunov(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))


def test_lyapunov_against_exponential_quadrature(rng):
    # Independent oracle straight from the definition P = int_0^inf
    # e^{A't} Q e^{At} dt.  Start from the block-exponential identity on a
    # unit horizon, expm([[-A', Q], [0, A]]) = [[*, E12], [0, E22]] with
    # E22' E12 = int_0^1 e^{A's} Q e^{As} ds, then double the horizon via
    # G(2T) = G(T) + e^{A'T} G(T) e^{AT}.  Every factor contracts for
    # Hurwitz A, so the recursion cannot overflow no matter how spread the
    # spectrum is, and twelve doublings leave a tail below e^{-2000}.
    for _ in range(20):
        n = int(rng.integers(1, 5))
        a = rng.standard_normal((n, n))
        alpha = float(np.max(np.linalg.eigvals(a).real))
        a -= (alpha + 0.5) * np.eye(n)
        c = rng.standard_normal((n, n))
        q = c @ c.T + np.eye(n)
        block = np.zeros((2 * n, 2 * n))
        block[:n, :n] = -a.T
        block[:n, n:] = q
        block[n:, n:] = a
        exp_block = scipy.linalg.expm(block)
        decay = exp_block[n:, n:]
        p_quad = decay.T @ exp_block[:n, n:]
        for _ in range(12):
            p_quad = p_quad + decay.T @ p_quad @ decay
            decay = decay @ decay
        p = solve_lyapunov(a, q)
        np.testing.assert_allclose(p, p_quad, rtol=1e-6, atol=1e-9)


# peak accuracy matters for the Riccati pipeline built on top
def test_lyapunov_residual_tight(rng):
    a = rng.standard_normal((4, 4)) - 3.0 * np.eye(4)
    q = np.eye(4)
    p = solve_lyapunov(a, q)
    residual = np.linalg.norm(a.T @ p + p @ a + q)
    assert residual <= 1e-9 * (1.0 + np.linalg.norm(q))


# ------------------------------------------------------------ sym_sqrt

def test_sym_sqrt_identity():
    np.testing.assert_allclose(sym_sqrt(np.eye(4)), np.eye(4), atol=1e-14)


def test_sym_sqrt_diagonal():
    s = sym_sqrt(np.diag([4.0, 9.0]))
    np.testing.assert_allclose(s, np.diag([2.0, 3.0]), atol=1e-12)


def test_sym_sqrt_coupled():
    # [[2,1],[1,2]] has eigenpairs (1, (1,-1)) and (3, (1,1)); the root is
    # [[(1+sqrt3)/2, (sqrt3-1)/2], [(sqrt3-1)/2, (1+sqrt3)/2]].
    s = sym_sqrt([[2.0, 1.0], [1.0, 2.0]])
    d = 0.5 * (1.0 + math.sqrt(3.0))
    o = 0.5 * (math.sqrt(3.0) - 1.0)
    np.testing.assert_allclose(s, [[d, o], [o, d]], atol=1e-12)
    np.testing.assert_allclose(s @ s, [[2.0, 1.0], [1.0, 2.0]], atol=1e-12)


def test_sym_sqrt_roundoff_negative_clipped():
    s = sym_sqrt([[-5e-11]])
    assert s[0, 0] == 0.0


def test_sym_sqrt_rejects_indefinite():
    with pytest.raises(NotPsdError):
        sym_sqrt([[-1.0]])


# ----------------------------------------------------------- char_poly

def test_char_poly_companion_case():
    # det(sI - A) for A = [[0,1],[-2,-3]] is s^2 + 3s + 2.
    np.testing.assert_allclose(
        char_poly([[0.0, 1.0], [-2.0, -3.0]]), [1.0, 3.0, 2.0], atol=1e-12
    )


def test_char_poly_matches_eigenvalue_product(rng):
    # np.poly builds the polynomial from the eigenvalues, a fully
    # independent route from the Faddeev-LeVerrier trace recursion.
    for _ in range(30):
        n = int(rng.integers(1, 7))
        a = rng.standard_normal((n, n))
        np.testing.assert_allclose(char_poly(a), np.poly(a), rtol=1e-8, atol=1e-8)


# ---------------------------------------------------------- is_hurwitz

@pytest.mark.parametrize(
    "a, expected",
    [
        (-np.eye(3), True),
        ([[0.0, 1.0], [0.0, 0.0]], False),           # double integrator
        ([[0.0, 1.0], [-2.0, -3.0]], True),          # eigenvalues -1, -2
        ([[0.0, 1.0], [-1.0, 0.0]], False),          # undamped oscillator
        ([[1e-6]], False),
    ],
)
def test_is_hurwitz_examples(a, expected):
    assert is_hurwitz(a) is expected


def test_is_hurwitz_margin_semantics():
    # Eigenvalue sits between -margin and 0: stable but not by the margin.
    assert not is_hurwitz([[-0.5e-9]], margin=1e-9)
    assert is_hurwitz([[-2e-9]], margin=1e-9)


def test_is_hurwitz_matches_eigenvalues_across_scales(rng):
    # Cross-check the determinant-free route against an eigensolver over
    # matrix norms from 1e-3 to 1e6; scale must not flip the verdict.
    margin = 1e-9
    checked = 0
    while checked < 50:
        n = int(rng.integers(1, 7))
        a = rng.standard_normal((n, n)) * float(rng.choice([1e-3, 1.0, 1e2, 1e4, 1e6]))
        re = np.linalg.eigvals(a).real
        if np.min(np.abs(re + margin)) < 1e-6 * max(1.0, np.max(np.abs(re))):
            continue  # too close to the decision boundary to be determinate
        assert is_hurwitz(a, margin=margin) is bool(np.all(re < -margin))
        checked += 1


def test_is_hurwitz_large_but_well_damped():
    # Regression guard: norm ~1e4 with all eigenvalues far in the left half
    # plane; a naive absolute coefficient floor misreads this as unstable.
    a = -2e4 * np.eye(4) + np.diag([1e3, 1e3, 1e3], k=1)
    assert is_hurwitz(a)


def test_is_hurwitz_rejects_large_order():
    with pytest.raises(ValueError):
        is_hurwitz(-np.eye(9))


# ------------------------------------------------- rank computations

def test_ctrb_rank_chain():
    a = [[0.0, 1.0], [0.0, 0.0]]
    assert ctrb_rank(a, [[0.0], [1.0]]) == 2
    assert ctrb_rank(a, [[1.0], [0.0]]) == 1


def test_ctrb_rank_repeated_eigenvalue():
    # A = I maps B onto itself, so one input column can never reach rank 2.
    assert ctrb_rank(np.eye(2), [[1.0], [1.0]]) == 1


def test_obsv_rank_dual():
    a = [[0.0, 1.0], [0.0, 0.0]]
    assert obsv_rank([[1.0, 0.0]], a) == 2
    assert obsv_rank([[0.0, 1.0]], a) == 1


def test_numerical_rank_basic():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.zeros((2, 2))) == 0
    assert numerical_rank(np.outer([1.0, 2.0], [3.0, 4.0])) == 1


def test_numerical_rank_cutoff_is_relative():
    m = np.diag([1.0, 1e-9])
    assert numerical_rank(m) == 1
    assert numerical_rank(1e6 * m) == 1

"""Dense small-matrix linear algebra used throughout the library.

Everything here operates on plain float64 ndarrays of modest size (the
target plants have n <= 8), so direct dense methods are used without
apology: SVD for pseudo-inverses and ranks, Kronecker vectorization for
Lyapunov equations, Routh-Hurwitz on the characteristic polynomial for
stability tests.  All functions are pure.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NotPsdError, SingularMatrixError

__all__ = [
    "pinv",
    "solve_lyapunov",
    "sym_sqrt",
    "char_poly",
    "is_hurwitz",
    "ctrb_rank",
    "obsv_rank",
    "numerical_rank",
]

# Relative cutoff on singular values for all rank decisions.
RANK_RTOL = 1e-8


def _check_matrix(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _check_square(m, name="matrix"):
    m = _check_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def numerical_rank(m, rtol: float = RANK_RTOL) -> int:
    """Rank of ``m`` counted as singular values above ``rtol`` times the largest."""
    m = _check_matrix(m)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rtol * sv[0]))


def pinv(m, rtol: float = RANK_RTOL):
    """Moore-Penrose pseudoinverse with an effective-rank report.

    Parameters
    ----------
    m : array_like, shape (p, q)
        Any nonempty real matrix.
    rtol : float, optional
        Relative singular-value cutoff used both for the inversion and the
        reported rank.

    Returns
    -------
    m_pinv : ndarray, shape (q, p)
        Satisfies the four Moore-Penrose identities to roughly
        ``1e-10 * (1 + |m|)``.
    rank : int
        Number of singular values above the cutoff.

    Notes
    -----
    Computed from the full SVD.  For the square well-conditioned input
    matrices of the motor examples this coincides with the plain inverse
    to tight tolerance, but no special-casing is done.
    """
    m = _check_matrix(m)
    u, sv, vt = np.linalg.svd(m, full_matrices=False)
    if sv[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0])), 0
    keep = sv > rtol * sv[0]
    rank = int(np.count_nonzero(keep))
    inv_sv = np.where(keep, 1.0 / np.where(sv > 0, sv, 1.0), 0.0)
    return (vt.T * inv_sv) @ u.T, rank


def solve_lyapunov(a, q):
    """Solve the continuous Lyapunov equation ``A'P + PA + Q = 0``.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Must have no pair of eigenvalues summing to zero; in practice this
        is always called with a Hurwitz ``a``.
    q : array_like, shape (n, n)
        Symmetric right-hand side.

    Returns
    -------
    p : ndarray, shape (n, n)
        Symmetric solution with residual ``|A'P + PA + Q|_F`` below
        ``1e-9 * (1 + |Q|_F)`` for well-conditioned problems.

    Raises
    ------
    SingularMatrixError
        If the vectorized n^2 x n^2 system is numerically singular
        (eigenvalue pair summing to zero).
    """
    a = _check_square(a, "a")
    q = _check_square(q, "q")
    n = a.shape[0]
    if q.shape[0] != n:
        raise ValueError("a and q must have the same order")
    # vec(A'P + PA) = (I (x) A' + A' (x) I) vec(P), row-major vec convention
    eye = np.eye(n)
    lhs = np.kron(eye, a.T) + np.kron(a.T, eye)
    try:
        vec_p = np.linalg.solve(lhs, -q.reshape(n * n))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "Lyapunov system is singular (A has an eigenvalue pair summing to zero)"
        ) from exc
    p = vec_p.reshape(n, n)
    return 0.5 * (p + p.T)


def sym_sqrt(q):
    """Symmetric PSD square root of a symmetric PSD matrix.

    Eigendecomposition route: ``Q = V diag(w) V'`` gives
    ``sqrt(Q) = V diag(sqrt(w)) V'``.  Eigenvalues in ``[-1e-10, 0)`` are
    treated as zero (roundoff), anything more negative is rejected.

    Raises
    ------
    NotPsdError
        If an eigenvalue is below ``-1e-10``.
    """
    q = _check_square(q, "q")
    q = 0.5 * (q + q.T)
    w, v = np.linalg.eigh(q)
    if w[0] < -1e-10:
        raise NotPsdError(f"matrix has eigenvalue {w[0]:.3e} < -1e-10")
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def char_poly(a):
    """Characteristic polynomial coefficients by the Faddeev-LeVerrier recursion.

    Returns the monic coefficient vector ``c`` with ``c[0] = 1`` such that
    ``det(lambda I - A) = sum_k c[k] lambda^(n-k)``.  Exact in rational
    arithmetic; in float64 it is adequate for the small n used here.
    """
    a = _check_square(a, "a")
    n = a.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    c = 1.0
    for k in range(1, n + 1):
        m = a @ m + c * np.eye(n)
        c = -np.trace(a @ m) / k
        coeffs[k] = c
    return coeffs


def is_hurwitz(a, margin: float = 1e-9) -> bool:
    """Test whether every eigenvalue of ``a`` has real part below ``-margin``.

    Implemented without an eigensolver: the characteristic polynomial of
    ``A + margin*I`` (whose spectrum is shifted right by ``margin``) is run
    through the Routh-Hurwitz table; strict stability of the shifted matrix
    is exactly the stated margin condition on ``a``.  The shifted matrix is
    normalized by its Frobenius scale first, since stability is invariant
    under positive scaling but the coefficient floors below are not: without
    it a well-damped matrix of norm 1e4 spreads its coefficients over
    |a|^n >> 1e13 and the leading 1 would drown in the relative floor.
    """
    a = _check_square(a, "a")
    n = a.shape[0]
    if n > 8:
        raise ValueError("characteristic-polynomial route is limited to n <= 8")
    shifted = a + margin * np.eye(n)
    scale = max(1.0, float(np.linalg.norm(shifted)) / math.sqrt(n))
    coeffs = char_poly(shifted / scale)
    # Necessary condition: all coefficients strictly positive.
    if np.any(coeffs <= 1e-13 * max(1.0, float(np.max(np.abs(coeffs))))):
        return False
    # Routh table; only the first column matters.  A pivot at or below the
    # roundoff floor of its row means a root on (or right of) the shifted
    # imaginary axis, which under the margin contract is "not Hurwitz".
    row_prev = coeffs[0::2].copy()
    row_curr = coeffs[1::2].copy()
    if row_curr.size < row_prev.size:
        row_curr = np.append(row_curr, 0.0)
    for _ in range(n - 1):
        nxt = np.append(
            (row_curr[0] * row_prev[1:] - row_prev[0] * row_curr[1:]) / row_curr[0], 0.0
        )
        floor = 1e-13 * max(
            1.0, float(np.max(np.abs(row_curr))), float(np.max(np.abs(nxt)))
        )
        if nxt[0] <= floor:
            return False
        row_prev, row_curr = row_curr, nxt
    return True


def ctrb_rank(a, b) -> int:
    """Numerical rank of the controllability matrix ``[B, AB, ..., A^(n-1)B]``."""
    a = _check_square(a, "a")
    b = _check_matrix(b, "b")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError("a and b must have the same row count")
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return numerical_rank(np.hstack(blocks))


def obsv_rank(c, a) -> int:
    """Numerical rank of the observability matrix of ``(C, A)``."""
    return ctrb_rank(np.asarray(a, dtype=float).T, np.asarray(c, dtype=float).T)

"""Continuous-time algebraic Riccati equation solver and the matching flow field.

Two routes to the same object live here.  ``solve_care`` produces the
stabilizing solution by Kleinman-Newton iteration (each step one Lyapunov
solve), started from the cost of a Bass stabilizing gain, or when that
construction degenerates by integrating the differential Riccati equation
from P(0) = Q until the associated gain stabilizes.  ``dre_flow`` is that
same differential equation exposed as a flow field; the online critic
integrates it directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, SingularMatrixError
from .matlin import (
    _check_matrix,
    _check_square,
    ctrb_rank,
    is_hurwitz,
    obsv_rank,
    pinv,
    solve_lyapunov,
    sym_sqrt,
)
from .ode import rk4_step

__all__ = [
    "CareSolution",
    "care_residual",
    "dre_flow",
    "solve_care",
    "care_map_sampler",
    "CareMapSample",
    "CareMapReport",
]

#: Default absolute Frobenius tolerance on the Riccati residual.
DEFAULT_TOL = 1e-9

#: Step budget for the stabilizing bootstrap integration.
_BOOTSTRAP_MAX_STEPS = 200_000


@dataclass(frozen=True)
class CareSolution:
    """Stabilizing solution of ``A'P + PA - P B R^-1 B' P + Q = 0``.

    Attributes
    ----------
    p : ndarray
        Symmetric PSD solution.
    k : ndarray
        Optimal gain ``-R^-1 B' P`` (applied as ``u = K x``).
    residual : float
        Frobenius norm of the equation residual at ``p``.
    iterations : int
        Number of Kleinman-Newton steps taken.
    """

    p: np.ndarray
    k: np.ndarray
    residual: float
    iterations: int


def _solve_spd(r, rhs):
    # Solve R y = rhs for symmetric positive definite R, rejecting near-singular R.
    r = np.asarray(r, dtype=float)
    r = 0.5 * (r + r.T)
    w = np.linalg.eigvalsh(r)
    if w[0] <= 1e-12:
        raise SingularMatrixError(f"weight matrix is not invertible (min eigenvalue {w[0]:.3e})")
    return np.linalg.solve(r, rhs)


def _residual_matrix(p, a, b, q, r):
    q = np.asarray(q, dtype=float)
    rinv_bt_p = _solve_spd(r, b.T @ p)
    f = a.T @ p + p @ a - (p @ b) @ rinv_bt_p + q
    return 0.5 * (f + f.T)


def care_residual(p, a, b, q, r) -> float:
    """Frobenius norm of ``A'P + PA - P B R^-1 B' P + Q``.

    Raises
    ------
    SingularMatrixError
        If the smallest eigenvalue of ``r`` is at or below 1e-12.
    """
    p = _check_square(p, "p")
    a = _check_square(a, "a")
    b = _check_matrix(b, "b")
    return float(np.linalg.norm(_residual_matrix(p, a, b, q, r)))


def dre_flow(p, a, b, q, r, g: float):
    """Time derivative ``g * (A'P + PA - P B R^-1 B' P + Q)`` of the value estimate.

    The output is symmetrized explicitly so that forward integration cannot
    drift out of the symmetric matrices.  Scaling in ``g`` is exact.
    """
    p = np.asarray(p, dtype=float)
    b = np.asarray(b, dtype=float)
    return g * _residual_matrix(p, np.asarray(a, dtype=float), b, q, r)


def _bass_stabilizing(a, b, q, r):
    # Bass construction: with beta > max Re eig(A), the W solving
    # (A + beta I) W + W (A + beta I)' = 2 B B' is SPD for controllable
    # (A, B) and K = -B' W^-1 places the closed loop at Re < -beta.  The
    # Lyapunov cost of that gain is then a valid Kleinman starting point.
    n = a.shape[0]
    beta = float(np.linalg.norm(a)) + 1.0
    w = solve_lyapunov(-(a + beta * np.eye(n)).T, 2.0 * (b @ b.T))
    k = -np.linalg.solve(w, b).T
    a_cl = a + b @ k
    if not is_hurwitz(a_cl):
        raise SingularMatrixError("stabilizing construction failed")
    return solve_lyapunov(a_cl, q + k.T @ (r @ k))


def _bootstrap_stabilizing(a, b, q, r, s):
    # Integrate the DRE from P(0) = Q until A - S P is Hurwitz, S = B R^-1 B'.
    # Step size follows a crude stiffness guard rather than error control.
    # Only reached when the Bass construction fails, i.e. (A, B) at or very
    # near an uncontrollable pair.
    n = a.shape[0]
    # Eigenvector test for stabilizability first: an unstable mode that B
    # cannot reach dooms the integration to diverge, and the shrinking
    # stiffness guard would burn the whole step budget getting there.
    for lam in np.linalg.eigvals(a):
        if lam.real >= 0.0:
            pencil = np.hstack([a - lam * np.eye(n), b])
            sv = np.linalg.svd(pencil, compute_uv=False)
            if np.sum(sv > 1e-10 * sv[0]) < n:
                raise ConvergenceError(
                    f"unstable eigenvalue {lam:.6g} is unreachable from the input; "
                    "the pair (A, B) is not stabilizable"
                )
    p = 0.5 * (q + q.T)
    lam_min_r = float(np.linalg.eigvalsh(0.5 * (r + r.T))[0])
    norm_a = float(np.linalg.norm(a))
    norm_b2 = float(np.linalg.norm(b)) ** 2

    def flow(_t, pm):
        return _residual_matrix(pm, a, b, q, r)

    for _ in range(_BOOTSTRAP_MAX_STEPS):
        if is_hurwitz(a - s @ p):
            return p
        h = 0.5 / (1.0 + norm_a + norm_b2 * float(np.linalg.norm(p)) / lam_min_r)
        p = rk4_step(flow, 0.0, p, h)
        p = 0.5 * (p + p.T)
    raise ConvergenceError(
        "bootstrap integration exhausted its budget without finding a stabilizing gain; "
        "the pair (A, B) may not be stabilizable"
    )


def solve_care(a, b, q, r, tol: float = DEFAULT_TOL, warm_start=None, max_iter: int = 60,
               check: bool = False) -> CareSolution:
    """Stabilizing CARE solution by Kleinman-Newton iteration.

    Parameters
    ----------
    a, b, q, r : array_like
        Problem data; ``q`` PSD, ``r`` symmetric positive definite.
    tol : float, optional
        Absolute Frobenius residual at which iteration stops.
    warm_start : array_like, optional
        Previous solution guess.  Used as the initial iterate whenever the
        gain it induces is stabilizing, which makes repeated solves along a
        slowly moving ``a`` nearly free.
    max_iter : int, optional
        Kleinman step budget.
    check : bool, optional
        When set, verify controllability of ``(a, b)`` and observability of
        ``(sqrt(q), a)`` up front and raise ``ValueError`` on failure.

    Raises
    ------
    ConvergenceError
        If the bootstrap cannot stabilize or the iteration stalls above
        ``tol`` within ``max_iter`` steps.
    """
    a = _check_square(a, "a")
    b = _check_matrix(b, "b")
    q = _check_square(q, "q")
    r = _check_square(r, "r")
    n = a.shape[0]
    if check:
        if ctrb_rank(a, b) < n:
            raise ValueError("(a, b) is not controllable")
        if obsv_rank(sym_sqrt(q), a) < n:
            raise ValueError("(sqrt(q), a) is not observable")

    s_gain = _solve_spd(r, b.T)  # R^-1 B', shape (m, n)

    p = None
    if warm_start is not None:
        cand = 0.5 * (np.asarray(warm_start, dtype=float) + np.asarray(warm_start, dtype=float).T)
        if is_hurwitz(a - b @ (s_gain @ cand)):
            p = cand
    if p is None:
        try:
            p = _bass_stabilizing(a, b, q, r)
        except (SingularMatrixError, np.linalg.LinAlgError):
            p = _bootstrap_stabilizing(a, b, q, r, b @ s_gain)

    iterations = 0
    residual = care_residual(p, a, b, q, r)
    while residual > tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                f"Kleinman iteration stalled at residual {residual:.3e} after {iterations} steps"
            )
        k = -(s_gain @ p)
        a_cl = a + b @ k
        p = solve_lyapunov(a_cl, q + k.T @ (r @ k))
        iterations += 1
        residual = care_residual(p, a, b, q, r)
    return CareSolution(p=p, k=-(s_gain @ p), residual=residual, iterations=iterations)


@dataclass(frozen=True)
class CareMapSample:
    """Outcome of the assumption checks at one sampled matrix."""

    kind: str
    controllable: bool
    observable: bool
    solvable: bool
    positive_definite: bool

    @property
    def ok(self) -> bool:
        return self.controllable and self.observable and self.solvable and self.positive_definite


@dataclass(frozen=True)
class CareMapReport:
    samples: tuple

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.samples)


def care_map_sampler(center, radius: float, b, q, r, samples: int = 20,
                     seed: int = 0) -> CareMapReport:
    """Probe solvability of the Riccati map over an uncertainty ball.

    Draws matrices from the ball of Frobenius radius ``radius`` about
    ``center``, restricted to the affine subspace ``center + Image(B)``
    (directions are projected through ``B B^+`` before scaling), and checks
    at each point: controllability, observability of the square-root-weight
    pair, CARE solvability, and positive definiteness of the solution.
    Failures are reported, never raised.
    """
    center = _check_square(center, "center")
    b = _check_matrix(b, "b")
    n = center.shape[0]
    rng = np.random.default_rng(seed)
    b_pinv, _ = pinv(b)
    bbt = b @ b_pinv
    sqrt_q = sym_sqrt(q)

    points = [("center", center)]
    n_interior = (samples + 1) // 2
    for i in range(samples):
        direction = bbt @ rng.standard_normal((n, n))
        scale = float(np.linalg.norm(direction))
        if scale == 0.0 or radius == 0.0:
            points.append(("interior", center))
            continue
        direction /= scale
        if i < n_interior:
            rad = radius * rng.uniform(0.0, 1.0)
            kind = "interior"
        else:
            rad = radius
            kind = "boundary"
        points.append((kind, center + rad * direction))

    out = []
    for kind, a_hat in points:
        controllable = ctrb_rank(a_hat, b) == n
        observable = obsv_rank(sqrt_q, a_hat) == n
        solvable = False
        positive_definite = False
        if controllable and observable:
            try:
                sol = solve_care(a_hat, b, q, r)
            except (ConvergenceError, SingularMatrixError):
                pass
            else:
                solvable = True
                positive_definite = bool(np.linalg.eigvalsh(sol.p)[0] > 1e-12)
        out.append(CareMapSample(kind, controllable, observable, solvable, positive_definite))
    return CareMapReport(samples=tuple(out))

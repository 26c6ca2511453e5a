"""Reference-model generation and adaptive stabilization.

The reference model runs the estimated optimal closed loop driven by the
probing signal.  An adaptive gain learns, from the tracking error, the
feedback that matches the true plant to the estimated one; a feedforward
term keeps that gain aligned while the plant estimate itself moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MatchingError, SingularMatrixError
from .matlin import pinv

__all__ = [
    "ActorState",
    "refmodel_flow",
    "adaptive_flow",
    "control_law",
    "matching_gain_oracle",
    "ve_monitor",
    "vm_monitor",
]


@dataclass
class ActorState:
    """Mutable actor state owned by one simulation."""

    x_m: np.ndarray   # reference-model state
    k_a: np.ndarray   # adaptive matching gain, shape (m, n)


def _solve_weight(r, rhs):
    r = 0.5 * (np.asarray(r, dtype=float) + np.asarray(r, dtype=float).T)
    w = np.linalg.eigvalsh(r)
    if w[0] <= 1e-12:
        raise SingularMatrixError(f"weight matrix is not invertible (min eigenvalue {w[0]:.3e})")
    return np.linalg.solve(r, rhs)


def refmodel_flow(x_m, a_hat, p_hat, b, r, d):
    """Reference-model derivative ``(A_hat - B R^-1 B' P_hat) x_m + B d``."""
    return a_hat @ x_m - b @ _solve_weight(r, b.T @ (p_hat @ x_m)) + b @ d


def adaptive_flow(k_a, p_hat, x, x_m, a_hat_dot, b, mu: float, b_pinv=None):
    """Adaptive-gain derivative ``-mu B' P_hat (x - x_m) x' + B^+ dA_hat``.

    The second term compensates the motion of the plant estimate: as the
    estimated model drifts, the gain that matches plant to model drifts
    with it, and tracking this drift directly keeps the error dynamics
    clean of it.

    Parameters
    ----------
    b_pinv : ndarray, optional
        Precomputed pseudoinverse of ``b``.
    """
    if b_pinv is None:
        b_pinv, _ = pinv(b)
    return -mu * np.outer(b.T @ (p_hat @ (x - x_m)), x) + b_pinv @ a_hat_dot


def control_law(x, p_hat, k_a, d, b, r):
    """Applied input ``-R^-1 B' P_hat x + K_a x + d``."""
    return -_solve_weight(r, b.T @ (p_hat @ x)) + k_a @ x + d


def matching_gain_oracle(a_hat, a_true, b):
    """Gain ``B^+ (A_hat - A)`` matching the true plant to the estimated one.

    Test-harness quantity (requires the true plant matrix).  Valid only
    when the mismatch lies in the image of ``b``; then the returned gain
    satisfies ``B K = A_hat - A`` to working precision.

    Raises
    ------
    MatchingError
        If the residual ``|(I - B B^+)(A_hat - A)|_F`` exceeds 1e-8.
    """
    b_pinv, _ = pinv(b)
    mismatch = a_hat - a_true
    residual = float(np.linalg.norm(mismatch - b @ (b_pinv @ mismatch)))
    if residual > 1e-8:
        raise MatchingError(
            f"mismatch leaves the input-matrix image (residual {residual:.3e} > 1e-8)"
        )
    return b_pinv @ mismatch


def ve_monitor(e, k_tilde, p_hat, mu: float) -> float:
    """Tracking Lyapunov value ``e' P_hat e + |K_tilde|_F^2 / mu``.

    Test-harness quantity: ``k_tilde`` is the gain error against the
    matching-gain oracle.  With ``mu = 0`` (frozen gain) the second term
    is dropped.
    """
    value = float(e @ (p_hat @ e))
    if mu > 0.0:
        value += float(np.sum(np.square(k_tilde))) / mu
    return value


def vm_monitor(x_m, p_hat) -> float:
    """Reference-model Lyapunov value ``x_m' P_hat x_m``."""
    return float(x_m @ (p_hat @ x_m))

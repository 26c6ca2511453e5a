"""Online value-function identification.

The critic owns four coupled estimates: two first-order swapping filters
that turn the plant's differential relation into an algebraic regression,
the plant-matrix estimate driven by a normalized projected gradient on the
resulting prediction error, and the value-matrix estimate driven by the
Riccati flow at the current plant estimate.

The gradient update is projected twice.  ``B B^+`` confines the update to
the affine subspace reachable through the input matrix, and a Lipschitz
ball projection keeps the estimate inside the configured uncertainty ball.
Because the ball center sits in that same subspace, the second projection
preserves the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import riccati
from .matlin import _check_square, pinv

__all__ = [
    "UncertaintySpec",
    "CriticState",
    "swap_flow",
    "prediction_error",
    "proj_ball",
    "identifier_flow",
    "value_flow",
    "va_monitor",
]


@dataclass(frozen=True)
class UncertaintySpec:
    """Uncertainty ball for the plant-matrix estimate.

    Attributes
    ----------
    center : ndarray
        Nominal plant matrix, the ball center.
    radius : float
        Frobenius radius; the true matrix must lie strictly inside.
    boundary_layer : float
        Width of the projection transition band at the ball surface.
        Defaults to ``radius / 100``.
    """

    center: np.ndarray
    radius: float
    boundary_layer: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "center", _check_square(self.center, "center"))
        if self.radius <= 0.0:
            raise ValueError("ball radius must be positive")
        layer = self.boundary_layer if self.boundary_layer > 0.0 else self.radius / 100.0
        if layer >= self.radius:
            raise ValueError("boundary layer must be smaller than the radius")
        object.__setattr__(self, "boundary_layer", layer)


@dataclass
class CriticState:
    """Mutable identifier state owned by one simulation."""

    xi: np.ndarray        # state-filter output
    zeta: np.ndarray      # input-filter output
    a_hat: np.ndarray     # plant-matrix estimate
    p_hat: np.ndarray     # value-matrix estimate


def swap_flow(xi, zeta, x, u, b, lam: float):
    """Swapping-filter derivatives ``(-lam xi + x, -lam (x + zeta) - B u)``."""
    return -lam * xi + x, -lam * (x + zeta) - b @ u


def prediction_error(a_hat, xi, x, zeta):
    """Regression residual ``A_hat xi - (x + zeta)`` of the identifier."""
    return a_hat @ xi - (x + zeta)


def proj_ball(a_hat, direction, spec: UncertaintySpec):
    """Lipschitz ball projection of an update direction.

    Inside the inner ball of radius ``radius - boundary_layer``, or when
    the direction points inward, the direction passes through unchanged.
    In the boundary layer the outward-radial component is faded out
    linearly, reaching full cancellation at the surface, so that forward
    integration cannot push the estimate past the radius.
    """
    n_mat = a_hat - spec.center
    rho = spec.radius
    inner = rho - spec.boundary_layer
    g = (float(np.sum(n_mat * n_mat)) - inner ** 2) / (rho ** 2 - inner ** 2)
    if g <= 0.0:
        return direction
    radial = float(np.sum(n_mat * direction))
    if radial <= 0.0:
        return direction
    return direction - min(1.0, g) * (radial / float(np.sum(n_mat * n_mat))) * n_mat


def identifier_flow(state: CriticState, x, spec: UncertaintySpec, b, gamma: float,
                    nu: float, bbt=None):
    """Projected normalized-gradient update direction for the plant estimate.

    The raw direction ``-gamma B B^+ eps xi' / (1 + nu |xi| |eps|)`` is
    passed through the ball projection.  Its Frobenius norm never exceeds
    ``gamma |xi| |eps| / (1 + nu |xi| |eps|)``, hence ``gamma`` whenever
    ``nu >= 1``.  ``gamma = 0`` freezes the estimate.

    Parameters
    ----------
    bbt : ndarray, optional
        Precomputed ``B B^+``; recomputed from ``b`` when omitted.
    """
    if gamma == 0.0:
        return np.zeros_like(state.a_hat)
    if bbt is None:
        b_pinv, _ = pinv(b)
        bbt = b @ b_pinv
    eps = prediction_error(state.a_hat, state.xi, x, state.zeta)
    denom = 1.0 + nu * float(np.linalg.norm(state.xi)) * float(np.linalg.norm(eps))
    raw = (-gamma / denom) * (bbt @ np.outer(eps, state.xi))
    return proj_ball(state.a_hat, raw, spec)


def value_flow(state: CriticState, b, q, r, g: float):
    """Value-iteration derivative: the Riccati flow at the current estimate."""
    return riccati.dre_flow(state.p_hat, state.a_hat, b, q, r, g)


def va_monitor(eps_tilde, a_tilde, lam: float, gamma: float) -> float:
    """Identifier Lyapunov value ``|eps_tilde|^2 / lam + |A_tilde|_F^2 / (2 gamma)``.

    Test-harness quantity: both arguments require the true plant matrix.
    With ``gamma = 0`` (frozen estimate) the second term is dropped.
    """
    value = float(np.sum(np.square(eps_tilde))) / lam
    if gamma > 0.0:
        value += float(np.sum(np.square(a_tilde))) / (2.0 * gamma)
    return value

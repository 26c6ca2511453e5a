"""Plant models: generic LTI systems and the doubly fed induction machine.

The DFIM state is the stator/rotor current vector (i1u, i1v, i2u, i2v) in a
rotating dq frame, the input the corresponding voltage vector.  Its state
matrix is assembled from physical parameters; the input matrix depends on
the inductances only, so resistance and speed drifts leave B constant and
move A alone.  Drifts are modeled as logistic transitions whose 5%-95%
span equals the configured duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "LtiPlant",
    "DfimParams",
    "DriftSchedule",
    "DfimPlant",
    "dfim_matrices",
    "drifted_params",
    "resistance_at",
    "schedule_eval",
    "plant_flow",
]

#: Temperature coefficient of copper resistance, ohm per degree C.
ALPHA_COPPER = 4.041e-3

# Logistic rate so that the 5% -> 95% transition spans one duration:
# ln(0.95/0.05) - ln(0.05/0.95) = ln(361).
_LOGISTIC_SPAN = math.log(361.0)


@dataclass(frozen=True)
class LtiPlant:
    """Constant-coefficient plant ``x' = A x + B u``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"state matrix must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"input matrix rows {b.shape[0]} != state dimension {a.shape[0]}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("plant matrices contain non-finite entries")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    def a_at(self, t: float) -> np.ndarray:
        return self.a


@dataclass(frozen=True)
class DfimParams:
    """Physical machine parameters.

    ``pole_pairs`` is carried for completeness but never enters the
    electrical matrices.
    """

    l1: float       # stator auto-inductance, H
    l2: float       # rotor auto-inductance, H
    lm: float       # mutual inductance, H
    r1: float       # stator resistance, ohm
    r2: float       # rotor resistance, ohm
    omega0: float   # reference-frame electrical speed, rad/s
    omegar: float   # rotor electrical speed, rad/s
    pole_pairs: int = 3

    @property
    def l_bar(self) -> float:
        return self.l1 * self.l2 - self.lm ** 2

    def __post_init__(self):
        if self.l_bar <= 0.0:
            raise ValueError(
                f"degenerate inductances: L1*L2 - Lm^2 = {self.l_bar:.6e} must be positive"
            )


@dataclass(frozen=True)
class DriftSchedule:
    """Logistic parameter drifts for the heating / load-change experiment.

    Each drift ramps from 0 to its total following
    ``total / (1 + exp(-k (t - center)))`` with ``k`` fixed so the 5%-95%
    transition takes ``duration`` seconds.  The temperature drift shifts
    both resistances through the copper coefficient ``alpha``; the speed
    drift adds to the rotor speed only.
    """

    dtemp_total: float = 0.0        # deg C
    temp_duration: float = 600.0    # s
    dspeed_total: float = 0.0       # rad/s
    speed_duration: float = 60.0    # s
    temp_center: float = 400.0      # s
    speed_center: float = 300.0     # s
    alpha: float = ALPHA_COPPER     # ohm / deg C

    def __post_init__(self):
        if self.temp_duration <= 0.0 or self.speed_duration <= 0.0:
            raise ValueError("drift durations must be positive")


def _logistic(total: float, duration: float, center: float, t: float) -> float:
    if total == 0.0:
        return 0.0
    k = _LOGISTIC_SPAN / duration
    return total / (1.0 + math.exp(-k * (t - center)))


def schedule_eval(schedule: DriftSchedule, t: float):
    """Evaluate a drift schedule.

    Returns
    -------
    (dtemp, dspeed) : tuple of float
        Temperature rise in deg C and rotor-speed increase in rad/s at
        time ``t``.  Both are monotone in ``t`` and bounded by their totals.
    """
    return (
        _logistic(schedule.dtemp_total, schedule.temp_duration, schedule.temp_center, t),
        _logistic(schedule.dspeed_total, schedule.speed_duration, schedule.speed_center, t),
    )


def resistance_at(r_base: float, dtemp: float, alpha: float = ALPHA_COPPER) -> float:
    """Winding resistance after a temperature rise: ``R + alpha * dT``."""
    return r_base + alpha * dtemp


def dfim_matrices(params: DfimParams) -> LtiPlant:
    """Assemble the 4x4 machine matrices from physical parameters.

    With ``Lbar = L1 L2 - Lm^2`` and the shorthands ``al = Lbar w0``,
    ``be = Lm^2 wr``, ``b12 = L1 L2 wr``, ``b1 = L1 Lm wr``,
    ``b2 = L2 Lm wr``, the matrices are ``1/Lbar`` times the standard
    current-model blocks.  B involves inductances only.
    """
    l1, l2, lm = params.l1, params.l2, params.lm
    r1, r2 = params.r1, params.r2
    lbar = params.l_bar
    al = lbar * params.omega0
    be = lm ** 2 * params.omegar
    b12 = l1 * l2 * params.omegar
    b1 = l1 * lm * params.omegar
    b2 = l2 * lm * params.omegar
    a = np.array([
        [-l2 * r1, -al + be, lm * r2, b2],
        [al - be, -l2 * r1, -b2, -lm * r2],
        [lm * r1, -b1, -l1 * r2, -al - b12],
        [b1, lm * r1, al + b12, -l1 * r2],
    ]) / lbar
    b = np.array([
        [l2, 0.0, -lm, 0.0],
        [0.0, l2, 0.0, -lm],
        [-lm, 0.0, l1, 0.0],
        [0.0, -lm, 0.0, l1],
    ]) / lbar
    return LtiPlant(a=a, b=b)


def drifted_params(params: DfimParams, schedule: DriftSchedule, t: float) -> DfimParams:
    """Machine parameters at time ``t`` under a drift schedule."""
    dtemp, dspeed = schedule_eval(schedule, t)
    return replace(
        params,
        r1=resistance_at(params.r1, dtemp, schedule.alpha),
        r2=resistance_at(params.r2, dtemp, schedule.alpha),
        omegar=params.omegar + dspeed,
    )


@dataclass(frozen=True)
class DfimPlant:
    """Machine plant, optionally time-varying through a drift schedule."""

    params: DfimParams
    schedule: DriftSchedule | None = None

    def __post_init__(self):
        nominal = dfim_matrices(self.params)
        object.__setattr__(self, "_a0", nominal.a)
        object.__setattr__(self, "b", nominal.b)

    @property
    def n(self) -> int:
        return 4

    @property
    def m(self) -> int:
        return 4

    def a_at(self, t: float) -> np.ndarray:
        if self.schedule is None:
            return self._a0
        return dfim_matrices(drifted_params(self.params, self.schedule, t)).a


def plant_flow(x, u, plant: LtiPlant):
    """State derivative ``A x + B u``."""
    return plant.a @ x + plant.b @ u

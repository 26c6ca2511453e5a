"""Probing-signal generation and persistency-of-excitation measurement.

The probing signal is a deterministic time function: per channel, a sum of
unit-amplitude waves at harmonically spaced frequencies.  No exogenous
dynamical system is integrated to produce it.  The PE margin of a logged
trajectory is measured directly from its windowed Gram integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import WindowError

__all__ = [
    "DitherSpec",
    "RichnessReport",
    "triangular",
    "dither_eval",
    "pe_margin",
    "richness_check",
]


def triangular(theta):
    """Triangular wave of unit amplitude and period 2*pi.

    Convention: ``(2/pi) * asin(sin(theta))``, so the wave is odd, vanishes
    at integer multiples of pi, and peaks at +-1 at odd multiples of pi/2.
    """
    return (2.0 / math.pi) * np.arcsin(np.sin(theta))


_WAVEFORMS = {"triangular": triangular, "sinusoidal": np.sin}


@dataclass(frozen=True)
class DitherSpec:
    """Multichannel probing signal description.

    Channel ``i`` (1-based) carries ``terms`` waves at angular frequencies
    ``2 * base_freq * i * j`` for ``j = 1..terms``, scaled by ``amplitude``.
    """

    amplitude: float
    base_freq: float                 # rad/s
    channels: int
    terms: int = 4
    waveform: str = "triangular"

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be nonnegative")
        if self.base_freq <= 0.0:
            raise ValueError("base frequency must be positive")
        if self.channels < 1 or self.terms < 1:
            raise ValueError("channels and terms must be at least 1")
        if self.waveform not in _WAVEFORMS:
            raise ValueError(f"unknown waveform {self.waveform!r}")
        freq_sets = [frozenset(f) for f in self.frequencies()]
        if len(set(freq_sets)) != self.channels:
            raise ValueError("two channels carry identical frequency sets")

    def frequencies(self):
        """Per-channel angular frequency tuples, channel-major."""
        base2 = 2.0 * self.base_freq
        return tuple(
            tuple(base2 * (i * j) for j in range(1, self.terms + 1))
            for i in range(1, self.channels + 1)
        )


def dither_eval(spec: DitherSpec, t: float) -> np.ndarray:
    """Signal vector at time ``t``, one entry per channel."""
    wave = _WAVEFORMS[spec.waveform]
    freqs = np.asarray(spec.frequencies())
    return spec.amplitude * wave(freqs * t).sum(axis=1)


def pe_margin(samples, window: float, dt: float) -> float:
    """Worst-case excitation level of a uniformly sampled vector signal.

    Computes ``min over window starts of lambda_min(integral of v v' ds)``
    where the integral runs over a sliding window of length ``window`` and
    is evaluated by trapezoidal quadrature on the sample grid.

    Parameters
    ----------
    samples : array_like, shape (N,) or (N, k)
        Signal samples at spacing ``dt``.
    window : float
        Window length in seconds; rounded to the nearest whole number of
        sample intervals.
    dt : float
        Sampling step.

    Raises
    ------
    WindowError
        If the window exceeds the sampled duration.
    """
    v = np.asarray(samples, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    n_samp = v.shape[0]
    steps = int(round(window / dt))
    if steps < 1 or steps > n_samp - 1:
        raise WindowError(
            f"window of {window} s needs {steps} intervals, series has {n_samp - 1}"
        )
    gram = v[:, :, None] * v[:, None, :]
    inc = 0.5 * dt * (gram[:-1] + gram[1:])
    cum = np.concatenate([np.zeros((1,) + inc.shape[1:]), np.cumsum(inc, axis=0)])
    windows = cum[steps:] - cum[:-steps]
    lam = np.linalg.eigvalsh(windows)[:, 0]
    return float(max(lam.min(), 0.0))


@dataclass(frozen=True)
class RichnessReport:
    """Spectral-line audit of a probing signal against a richness order."""

    required: int
    frequencies: tuple
    counts: tuple
    rich: bool
    uncorrelated: bool
    shared: tuple


def richness_check(spec: DitherSpec, order: int):
    """Check each channel carries enough distinct spectral lines.

    A channel needs at least ``ceil(order/2)`` distinct nonzero frequencies
    to be sufficiently rich of the given order.  The returned boolean is
    exactly that per-channel count condition.  Frequency collisions across
    channels are audited in the report (``uncorrelated`` / ``shared``) but
    do not fail the boolean: harmonically constructed channels share lines
    by design while remaining independently rich.

    Returns
    -------
    (ok, report) : tuple of bool and RichnessReport
    """
    required = (order + 1) // 2
    per_channel = tuple(
        tuple(sorted({f for f in freqs if f != 0.0})) for freqs in spec.frequencies()
    )
    counts = tuple(len(f) for f in per_channel)
    rich = all(c >= required for c in counts)
    seen: dict = {}
    shared = []
    for ch, freqs in enumerate(per_channel):
        for f in freqs:
            if f in seen and seen[f] != ch:
                shared.append(f)
            seen.setdefault(f, ch)
    shared_t = tuple(sorted(set(shared)))
    report = RichnessReport(
        required=required,
        frequencies=per_channel,
        counts=counts,
        rich=rich,
        uncorrelated=not shared_t,
        shared=shared_t,
    )
    return rich, report

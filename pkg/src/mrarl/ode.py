"""Fixed-step classical Runge-Kutta integration.

The whole library integrates with the same explicit RK4 stepper, both for
closed-loop simulation and for the bootstrap phase of the Riccati solver.
No adaptive error control: step sizes are chosen by the callers from
stiffness estimates, and determinism matters more than efficiency here.
"""

from __future__ import annotations

from typing import Callable


def rk4_step(f: Callable, t: float, s, dt: float):
    """Advance ``s`` by one classical RK4 step of size ``dt``.

    Parameters
    ----------
    f : callable
        Vector field ``f(t, s)`` returning the derivative with the same
        shape as ``s``.  Any object supporting ``+`` and scalar ``*`` works
        (ndarrays of any shape included).
    t : float
        Current time.
    s : array_like
        Current state.
    dt : float
        Step size.

    Returns
    -------
    Next state, same shape as ``s``.
    """
    k1 = f(t, s)
    k2 = f(t + 0.5 * dt, s + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, s + 0.5 * dt * k2)
    k4 = f(t + dt, s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

"""Flat-state RK4 integration loop for the closed-loop simulator.

The stacked simulation state is one contiguous float64 vector

    [ x | x_m | xi | zeta | vec(A_hat) | vec(P_hat) | vec(K_a) ]

and the whole integration runs inside one jitted loop.  When numba is not
installed the same functions run interpreted; results are identical, only
slower.  The readable reference implementation of the same stage math
lives in ``sim`` composed from the module flow functions, and the test
suite holds the two routes together.

Everything the stage needs (pseudoinverses, weight solves, drift-rate
constants) is precomputed by the caller; the machine state matrix under
parameter drift is rebuilt here from closed-form scalars each stage.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

__all__ = ["HAVE_NUMBA", "run_segment", "state_size"]


def state_size(n: int, m: int) -> int:
    """Length of the flat state vector for dimensions ``(n, m)``."""
    return 4 * n + 2 * n * n + m * n


@njit(cache=True)
def _fro2(a):
    acc = 0.0
    for v in a.flat:
        acc += v * v
    return acc


@njit(cache=True)
def _dfim_a(pars, tau):
    # pars: [l1, l2, lm, r1, r2, w0, wr, alpha,
    #        dtemp_total, k_temp, tc_temp, dspeed_total, k_speed, tc_speed]
    l1, l2, lm = pars[0], pars[1], pars[2]
    r1, r2 = pars[3], pars[4]
    w0, wr = pars[5], pars[6]
    if pars[8] != 0.0:
        dtemp = pars[8] / (1.0 + math.exp(-pars[9] * (tau - pars[10])))
        r1 = r1 + pars[7] * dtemp
        r2 = r2 + pars[7] * dtemp
    if pars[11] != 0.0:
        wr = wr + pars[11] / (1.0 + math.exp(-pars[12] * (tau - pars[13])))
    lbar = l1 * l2 - lm * lm
    al = lbar * w0
    be = lm * lm * wr
    b12 = l1 * l2 * wr
    b1 = l1 * lm * wr
    b2 = l2 * lm * wr
    a = np.empty((4, 4))
    a[0, 0] = -l2 * r1
    a[0, 1] = -al + be
    a[0, 2] = lm * r2
    a[0, 3] = b2
    a[1, 0] = al - be
    a[1, 1] = -l2 * r1
    a[1, 2] = -b2
    a[1, 3] = -lm * r2
    a[2, 0] = lm * r1
    a[2, 1] = -b1
    a[2, 2] = -l1 * r2
    a[2, 3] = -al - b12
    a[3, 0] = b1
    a[3, 1] = lm * r1
    a[3, 2] = al + b12
    a[3, 3] = -l1 * r2
    return a / lbar


@njit(cache=True)
def _proj_ball(a_hat, d_mat, center, radius, layer):
    nm = a_hat - center
    nm2 = _fro2(nm)
    inner = radius - layer
    gval = (nm2 - inner * inner) / (radius * radius - inner * inner)
    if gval <= 0.0:
        return d_mat
    radial = 0.0
    for i in range(nm.shape[0]):
        for j in range(nm.shape[1]):
            radial += nm[i, j] * d_mat[i, j]
    if radial <= 0.0:
        return d_mat
    return d_mat - min(1.0, gval) * (radial / nm2) * nm


@njit(cache=True)
def _deriv(tau, s, ds, n, m, a_const, b, bt, b_pinv, bbt, s_brb, rinv_bt, q, center,
           lam, gamma, nu, g_gain, mu, radius, layer,
           amp, base2, terms, tri, drift_on, pars):
    x = s[0:n]
    xm = s[n:2 * n]
    xi = s[2 * n:3 * n]
    zeta = s[3 * n:4 * n]
    oa = 4 * n
    op = oa + n * n
    ok = op + n * n
    a_hat = s[oa:op].reshape(n, n)
    p_hat = s[op:ok].reshape(n, n)
    k_a = s[ok:ok + m * n].reshape(m, n)

    if drift_on == 1:
        a_true = _dfim_a(pars, tau)
    else:
        a_true = a_const

    d = np.zeros(m)
    if amp != 0.0:
        for i in range(1, m + 1):
            acc = 0.0
            for j in range(1, terms + 1):
                th = base2 * (i * j) * tau
                if tri == 1:
                    acc += (2.0 / math.pi) * math.asin(math.sin(th))
                else:
                    acc += math.sin(th)
            d[i - 1] = amp * acc

    u = -(rinv_bt @ (p_hat @ x)) + k_a @ x + d
    bu = b @ u

    ds[0:n] = a_true @ x + bu
    ds[n:2 * n] = a_hat @ xm - s_brb @ (p_hat @ xm) + b @ d
    ds[2 * n:3 * n] = -lam * xi + x
    ds[3 * n:4 * n] = -lam * (x + zeta) - bu

    da = ds[oa:op].reshape(n, n)
    if gamma != 0.0:
        eps = a_hat @ xi - x - zeta
        denom = 1.0 + nu * math.sqrt(_fro2(xi)) * math.sqrt(_fro2(eps))
        raw = (-gamma / denom) * (bbt @ np.outer(eps, xi))
        da[:, :] = _proj_ball(a_hat, raw, center, radius, layer)
    else:
        da[:, :] = 0.0

    f_mat = a_hat.T @ p_hat + p_hat @ a_hat - p_hat @ (s_brb @ p_hat) + q
    dp = ds[op:ok].reshape(n, n)
    dp[:, :] = (0.5 * g_gain) * (f_mat + f_mat.T)

    dk = ds[ok:ok + m * n].reshape(m, n)
    dk[:, :] = -mu * np.outer(bt @ (p_hat @ (x - xm)), x) + b_pinv @ da


@njit(cache=True)
def run_segment(s, t0, nsteps, dt, stride, n, m,
                a_const, b, bt, b_pinv, bbt, s_brb, rinv_bt, q, center,
                lam, gamma, nu, g_gain, mu, radius, layer,
                amp, base2, terms, tri, drift_on, pars,
                limit, rec_t, rec_s, clip_out):
    """Integrate ``nsteps`` RK4 steps in place, logging every ``stride`` steps.

    ``rec_t``/``rec_s`` receive records starting at index 1 (the caller
    logs the initial state at index 0).  ``clip_out`` accumulates the ball
    clip count and worst overshoot.  Returns -1 on success, else the step
    index at which the state escaped ``limit``.
    """
    size = s.shape[0]
    k1 = np.empty(size)
    k2 = np.empty(size)
    k3 = np.empty(size)
    k4 = np.empty(size)
    stmp = np.empty(size)
    op = 4 * n + n * n
    ok = op + n * n
    ridx = 1
    for step in range(1, nsteps + 1):
        tau = t0 + dt * (step - 1)
        _deriv(tau, s, k1, n, m, a_const, b, bt, b_pinv, bbt, s_brb, rinv_bt, q, center,
               lam, gamma, nu, g_gain, mu, radius, layer,
               amp, base2, terms, tri, drift_on, pars)
        stmp[:] = s + (0.5 * dt) * k1
        _deriv(tau + 0.5 * dt, stmp, k2, n, m, a_const, b, bt, b_pinv, bbt, s_brb,
               rinv_bt, q, center, lam, gamma, nu, g_gain, mu, radius, layer,
               amp, base2, terms, tri, drift_on, pars)
        stmp[:] = s + (0.5 * dt) * k2
        _deriv(tau + 0.5 * dt, stmp, k3, n, m, a_const, b, bt, b_pinv, bbt, s_brb,
               rinv_bt, q, center, lam, gamma, nu, g_gain, mu, radius, layer,
               amp, base2, terms, tri, drift_on, pars)
        stmp[:] = s + dt * k3
        _deriv(tau + dt, stmp, k4, n, m, a_const, b, bt, b_pinv, bbt, s_brb,
               rinv_bt, q, center, lam, gamma, nu, g_gain, mu, radius, layer,
               amp, base2, terms, tri, drift_on, pars)
        s[:] = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        # Flow-set restoration: keep the value estimate symmetric and pull
        # integrator overshoot of the plant estimate back onto the ball.
        p_hat = s[op:ok].reshape(n, n)
        p_hat[:, :] = 0.5 * (p_hat + p_hat.T)
        a_hat = s[4 * n:op].reshape(n, n)
        dev = a_hat - center
        dn = math.sqrt(_fro2(dev))
        if dn > radius:
            a_hat[:, :] = center + (radius / dn) * dev
            clip_out[0] += 1.0
            if dn - radius > clip_out[1]:
                clip_out[1] = dn - radius

        mx = 0.0
        for v in s:
            av = abs(v)
            if av > mx:
                mx = av
        if not (mx <= limit):
            return step

        if step % stride == 0 or step == nsteps:
            rec_t[ridx] = t0 + dt * step
            rec_s[ridx, :] = s
            ridx += 1
    return -1

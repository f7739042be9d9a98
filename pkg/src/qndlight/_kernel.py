"""Compiled inner loop for photon-counting trajectories.

A trajectory is advanced one waiting time per uniform draw until the draws
run out, the horizon is passed or the state collapses. Collapse is tested
over each count-free stretch, so a trajectory that stops counting (for
instance on a dark branch) still reports when it collapsed. Each call handles a
single trajectory, so results never depend on batching or thread scheduling.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NEWTON_RTOL = 1e-13
NEWTON_MAXITER = 200
LOG_FLOOR = 8 * 2.220446049250313e-16
BISECT_RTOL = 1e-14
BISECT_MAXITER = 200

NEEDS_DRAWS = 0
HIT_HORIZON = 1
COLLAPSED = 2
NO_CONVERGENCE = 3


@njit(cache=True, nogil=True)
def normalized_log_weights(log_p0, log_int, dark, rate, m, t, out):
    mx = -np.inf
    for k in range(log_p0.size):
        if dark[k] and m > 0:
            v = -np.inf
        else:
            v = log_p0[k] + log_int[k] * m - rate[k] * t
        out[k] = v
        if v > mx:
            mx = v
    s = 0.0
    for k in range(out.size):
        s += math.exp(out[k] - mx)
    c = mx + math.log(s)
    for k in range(out.size):
        out[k] -= c


@njit(cache=True, nogil=True)
def solve_waiting_time(lp, rate, log_r):
    """Root of ``log S(dt) = log r``; ``inf`` if ``r <= S(inf)``, ``nan`` if unconverged.

    ``log S`` is convex and decreasing, so Newton iterates from ``dt = 0``
    climb monotonically to the root.
    """
    mx = -np.inf
    for k in range(lp.size):
        if rate[k] == 0.0 and lp[k] > mx:
            mx = lp[k]
    if mx > -np.inf:
        s = 0.0
        for k in range(lp.size):
            if rate[k] == 0.0:
                s += math.exp(lp[k] - mx)
        if log_r <= mx + math.log(s):
            return np.inf
    dt = 0.0
    for _ in range(NEWTON_MAXITER):
        mx = -np.inf
        for k in range(lp.size):
            x = lp[k] - rate[k] * dt
            if x > mx:
                mx = x
        s = 0.0
        g = 0.0
        for k in range(lp.size):
            e = math.exp(lp[k] - rate[k] * dt - mx)
            s += e
            g += e * rate[k]
        h = mx + math.log(s) - log_r
        delta = h * s / g
        dt += delta
        # |h| at the float floor of log S: dt is as good as log r allows
        if abs(delta) <= NEWTON_RTOL * dt or abs(h) <= LOG_FLOOR * (1.0 + abs(log_r)):
            return dt
    return np.nan


@njit(cache=True, nogil=True)
def is_collapsed(lp, pair_i, pair_j, eps):
    top = -np.inf
    for k in range(lp.size):
        if lp[k] > top:
            top = lp[k]
    if math.exp(top) > 1.0 - eps:
        return True
    for n in range(pair_i.size):
        pi = math.exp(lp[pair_i[n]])
        pj = math.exp(lp[pair_j[n]])
        if pi + pj > 1.0 - eps and pi > eps / 2 and pj > eps / 2:
            return True
    return False


@njit(cache=True, nogil=True)
def collapse_time(log_p0, log_int, dark, rate, pair_i, pair_j, eps, m, lo, hi, lp):
    """Bisect the count-free stretch ``[lo, hi]`` for the onset of collapse.

    Collapsed at ``hi`` but not at ``lo``; a single crossing is assumed, which
    holds when the surviving class is the slowest-decaying one.
    """
    for _ in range(BISECT_MAXITER):
        if hi - lo <= BISECT_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        normalized_log_weights(log_p0, log_int, dark, rate, m, mid, lp)
        if is_collapsed(lp, pair_i, pair_j, eps):
            hi = mid
        else:
            lo = mid
    return hi


@njit(cache=True, nogil=True)
def run_segment(log_p0, log_int, dark, rate, pair_i, pair_j, eps, stop_on_collapse,
                horizon, m, t, uniforms, jumps_out):
    """Consume ``uniforms``; return ``(status, m, t, n_jumps_written)``."""
    lp = np.empty(log_p0.size)
    n = 0
    for k in range(uniforms.size):
        normalized_log_weights(log_p0, log_int, dark, rate, m, t, lp)
        if stop_on_collapse and is_collapsed(lp, pair_i, pair_j, eps):
            return COLLAPSED, m, t, n
        dt = solve_waiting_time(lp, rate, math.log(uniforms[k]))
        if math.isnan(dt):
            return NO_CONVERGENCE, m, t, n
        if stop_on_collapse:
            end = min(t + dt, horizon)
            normalized_log_weights(log_p0, log_int, dark, rate, m, end, lp)
            if is_collapsed(lp, pair_i, pair_j, eps):
                return COLLAPSED, m, collapse_time(log_p0, log_int, dark, rate, pair_i, pair_j,
                                                   eps, m, t, end, lp), n
        if not t + dt <= horizon:
            return HIT_HORIZON, m, t, n
        t = t + dt
        m += 1
        jumps_out[n] = t
        n += 1
    return NEEDS_DRAWS, m, t, n

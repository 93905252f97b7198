"""Batched rollout kernels for both benchmark tasks.

The controller evaluates N candidate control sequences per iteration; these
kernels fuse clamping, integration, and cost accumulation over the horizon
into one pass per batch. Each kernel exists twice: a scalar-loop version
compiled with numba's @njit, and a pure-numpy version vectorized across the
batch. The active backend is chosen at import time from the environment:

    DSMPPI_DISABLE_NUMBA=1  ->  pure-numpy path

(the numpy path is also used automatically when numba is not importable).
Any state blow-up surfaces as a +inf cost, which the controller treats as a
failed rollout. `dsmppi bench` compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("DSMPPI_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in ("1", "true", "yes", "on")

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a normal dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# cart-pole
# ---------------------------------------------------------------------------

def _cartpole_costs_loops(x0, controls, u_lo, u_hi, dt, mc, mp, lp, grav, q, r, qh, goal):
    n, h = controls.shape
    total = mc + mp
    costs = np.empty(n)
    for i in range(n):
        x = x0[0]
        xd = x0[1]
        ph = x0[2]
        phd = x0[3]
        c = 0.0
        for t in range(h):
            u = controls[i, t]
            if u < u_lo:
                u = u_lo
            elif u > u_hi:
                u = u_hi
            cph = math.cos(ph)
            sph = math.sin(ph)
            e0 = x - goal[0]
            e1 = xd - goal[1]
            e2 = cph - goal[2]
            e3 = sph - goal[3]
            e4 = phd - goal[4]
            c += (q[0] * e0 * e0 + q[1] * e1 * e1 + q[2] * e2 * e2
                  + q[3] * e3 * e3 + q[4] * e4 * e4 + r * u * u)
            tmp = (u + mp * lp * phd * phd * sph) / total
            phdd = (grav * sph - cph * tmp) / (lp * (4.0 / 3.0 - mp * cph * cph / total))
            xdd = tmp - mp * lp * phdd * cph / total
            xd = xd + dt * xdd
            phd = phd + dt * phdd
            x = x + dt * xd
            ph = ph + dt * phd
        cph = math.cos(ph)
        sph = math.sin(ph)
        e0 = x - goal[0]
        e1 = xd - goal[1]
        e2 = cph - goal[2]
        e3 = sph - goal[3]
        e4 = phd - goal[4]
        c += (qh[0] * e0 * e0 + qh[1] * e1 * e1 + qh[2] * e2 * e2
              + qh[3] * e3 * e3 + qh[4] * e4 * e4)
        if not math.isfinite(c):
            c = math.inf
        costs[i] = c
    return costs


def cartpole_costs_numpy(x0, controls, u_lo, u_hi, dt, mc, mp, lp, grav, q, r, qh, goal):
    n, h = controls.shape
    total = mc + mp
    x = np.full(n, x0[0])
    xd = np.full(n, x0[1])
    ph = np.full(n, x0[2])
    phd = np.full(n, x0[3])
    costs = np.zeros(n)
    for t in range(h):
        u = np.clip(controls[:, t], u_lo, u_hi)
        cph = np.cos(ph)
        sph = np.sin(ph)
        e0 = x - goal[0]
        e1 = xd - goal[1]
        e2 = cph - goal[2]
        e3 = sph - goal[3]
        e4 = phd - goal[4]
        costs += (q[0] * e0 * e0 + q[1] * e1 * e1 + q[2] * e2 * e2
                  + q[3] * e3 * e3 + q[4] * e4 * e4 + r * u * u)
        tmp = (u + mp * lp * phd * phd * sph) / total
        phdd = (grav * sph - cph * tmp) / (lp * (4.0 / 3.0 - mp * cph * cph / total))
        xdd = tmp - mp * lp * phdd * cph / total
        xd = xd + dt * xdd
        phd = phd + dt * phdd
        x = x + dt * xd
        ph = ph + dt * phd
    cph = np.cos(ph)
    sph = np.sin(ph)
    e0 = x - goal[0]
    e1 = xd - goal[1]
    e2 = cph - goal[2]
    e3 = sph - goal[3]
    e4 = phd - goal[4]
    costs += (qh[0] * e0 * e0 + qh[1] * e1 * e1 + qh[2] * e2 * e2
              + qh[3] * e3 * e3 + qh[4] * e4 * e4)
    costs[~np.isfinite(costs)] = np.inf
    return costs


# ---------------------------------------------------------------------------
# truck backer-upper
# ---------------------------------------------------------------------------

def _truck_costs_loops(x0, controls, u_lo, u_hi, ls, lc, steer_max, dist_max,
                       jack_mode, q, r, qh, goal):
    n, h, _ = controls.shape
    half_pi = 0.5 * math.pi
    costs = np.empty(n)
    for i in range(n):
        x = x0[0]
        y = x0[1]
        ths = x0[2]
        thc = x0[3]
        c = 0.0
        for t in range(h):
            u1 = controls[i, t, 0]
            if u1 < u_lo[0]:
                u1 = u_lo[0]
            elif u1 > u_hi[0]:
                u1 = u_hi[0]
            u2 = controls[i, t, 1]
            if u2 < u_lo[1]:
                u2 = u_lo[1]
            elif u2 > u_hi[1]:
                u2 = u_hi[1]
            e0 = x - goal[0]
            e1 = y - goal[1]
            e2 = ths - goal[2]
            e3 = thc - goal[3]
            c += (q[0] * e0 * e0 + q[1] * e1 * e1 + q[2] * e2 * e2 + q[3] * e3 * e3
                  + r[0] * u1 * u1 + r[1] * u2 * u2)
            us = steer_max * u1
            uv = dist_max * u2
            a = uv * math.cos(us)
            diff = thc - ths
            b = a * math.cos(diff)
            arg1 = a * math.sin(diff) / ls
            if arg1 < -1.0:
                arg1 = -1.0
            elif arg1 > 1.0:
                arg1 = 1.0
            arg2 = uv * math.sin(us) / (ls + lc)
            if arg2 < -1.0:
                arg2 = -1.0
            elif arg2 > 1.0:
                arg2 = 1.0
            x = x - b * math.cos(ths)
            y = y - b * math.sin(ths)
            ths_new = ths - math.asin(arg1)
            thc_new = thc + math.asin(arg2)
            if jack_mode == 0:
                d = thc_new - ths_new
                if d > half_pi:
                    thc_new = ths_new + half_pi
                elif d < -half_pi:
                    thc_new = ths_new - half_pi
            else:
                if abs(ths_new - thc_new) > half_pi:
                    if thc_new >= 0.0:
                        thc_new = half_pi
                    else:
                        thc_new = -half_pi
            ths = ths_new
            thc = thc_new
        e0 = x - goal[0]
        e1 = y - goal[1]
        e2 = ths - goal[2]
        e3 = thc - goal[3]
        c += qh[0] * e0 * e0 + qh[1] * e1 * e1 + qh[2] * e2 * e2 + qh[3] * e3 * e3
        if not math.isfinite(c):
            c = math.inf
        costs[i] = c
    return costs


def truck_costs_numpy(x0, controls, u_lo, u_hi, ls, lc, steer_max, dist_max,
                      jack_mode, q, r, qh, goal):
    n, h, _ = controls.shape
    half_pi = 0.5 * np.pi
    x = np.full(n, x0[0])
    y = np.full(n, x0[1])
    ths = np.full(n, x0[2])
    thc = np.full(n, x0[3])
    costs = np.zeros(n)
    for t in range(h):
        u1 = np.clip(controls[:, t, 0], u_lo[0], u_hi[0])
        u2 = np.clip(controls[:, t, 1], u_lo[1], u_hi[1])
        e0 = x - goal[0]
        e1 = y - goal[1]
        e2 = ths - goal[2]
        e3 = thc - goal[3]
        costs += (q[0] * e0 * e0 + q[1] * e1 * e1 + q[2] * e2 * e2 + q[3] * e3 * e3
                  + r[0] * u1 * u1 + r[1] * u2 * u2)
        us = steer_max * u1
        uv = dist_max * u2
        a = uv * np.cos(us)
        diff = thc - ths
        b = a * np.cos(diff)
        arg1 = np.clip(a * np.sin(diff) / ls, -1.0, 1.0)
        arg2 = np.clip(uv * np.sin(us) / (ls + lc), -1.0, 1.0)
        x = x - b * np.cos(ths)
        y = y - b * np.sin(ths)
        ths = ths - np.arcsin(arg1)
        thc = thc + np.arcsin(arg2)
        if jack_mode == 0:
            d = thc - ths
            thc = np.where(d > half_pi, ths + half_pi,
                           np.where(d < -half_pi, ths - half_pi, thc))
        else:
            clamped = np.where(thc >= 0.0, half_pi, -half_pi)
            thc = np.where(np.abs(ths - thc) > half_pi, clamped, thc)
    e0 = x - goal[0]
    e1 = y - goal[1]
    e2 = ths - goal[2]
    e3 = thc - goal[3]
    costs += qh[0] * e0 * e0 + qh[1] * e1 * e1 + qh[2] * e2 * e2 + qh[3] * e3 * e3
    costs[~np.isfinite(costs)] = np.inf
    return costs


if HAVE_NUMBA:
    cartpole_costs_numba = njit(cache=True)(_cartpole_costs_loops)
    truck_costs_numba = njit(cache=True)(_truck_costs_loops)
else:  # pragma: no cover
    cartpole_costs_numba = None
    truck_costs_numba = None

if USE_NUMBA:
    cartpole_rollout_costs = cartpole_costs_numba
    truck_rollout_costs = truck_costs_numba
else:
    cartpole_rollout_costs = cartpole_costs_numpy
    truck_rollout_costs = truck_costs_numpy


def warmup() -> None:
    """Trigger JIT compilation so timing loops never include compile time."""
    if not USE_NUMBA:
        return
    x0 = np.zeros(4)
    cartpole_rollout_costs(x0, np.zeros((1, 2)), -1.0, 1.0, 0.02, 1.0, 0.1, 0.5,
                           9.81, np.ones(5), 1.0, np.ones(5), np.zeros(5))
    truck_rollout_costs(x0, np.zeros((1, 2, 2)), -np.ones(2), np.ones(2), 14.0,
                        6.0, 1.0, 3.0, 0, np.ones(4), np.ones(2), np.ones(4),
                        np.zeros(4))

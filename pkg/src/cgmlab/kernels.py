"""Hot loops, compiled with numba when available (see ``_accel``)."""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit

# ---------------------------------------------------------------------------
# hyperbolic-minimal profile ODE
# ---------------------------------------------------------------------------


@njit(cache=True)
def _profile_rhs(y, out):
    rho, zeta, theta = y[0], y[1], y[2]
    c = math.cos(theta)
    s = math.sin(theta)
    out[0] = c
    out[1] = s
    out[2] = -2.0 * c / zeta - s / rho
    out[3] = 1.0 / rho


@njit(cache=True)
def rk4_profile(y0, h, nmax, zeta_stop, rho_min):
    """Integrate (rho, zeta, theta, w)' = (cos t, sin t, -2 cos t/zeta - sin t/rho, 1/rho).

    Steps of size ``h`` (sign gives direction) until |zeta| >= zeta_stop,
    rho <= rho_min, or ``nmax`` steps.  Returns the trajectory and a status
    code (0 reached height, 1 rho collapsed, 2 step budget, 3 non-finite).
    """
    traj = np.empty((nmax + 1, 4))
    y = y0.copy()
    traj[0] = y
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    tmp = np.empty(4)
    status = 2
    n = 0
    for i in range(nmax):
        _profile_rhs(y, k1)
        for j in range(4):
            tmp[j] = y[j] + 0.5 * h * k1[j]
        _profile_rhs(tmp, k2)
        for j in range(4):
            tmp[j] = y[j] + 0.5 * h * k2[j]
        _profile_rhs(tmp, k3)
        for j in range(4):
            tmp[j] = y[j] + h * k3[j]
        _profile_rhs(tmp, k4)
        for j in range(4):
            y[j] = y[j] + h * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0
        n = i + 1
        traj[n] = y
        if not (math.isfinite(y[0]) and math.isfinite(y[1]) and math.isfinite(y[2])):
            status = 3
            break
        if y[0] <= rho_min:
            status = 1
            break
        if abs(y[1]) >= zeta_stop:
            status = 0
            break
    return traj[: n + 1], status


# ---------------------------------------------------------------------------
# fast marching for |grad d| = s on a rectangular grid
# ---------------------------------------------------------------------------


@njit(cache=True)
def _axis_term(d, state, i, j, di, dj, nx, ny, pu, pv, h, second):
    """Upwind data along one axis: (alpha, T) with alpha (T - T_k)^2, or alpha = 0 if none."""
    best = np.inf
    best2 = np.inf
    for sgn in (-1, 1):
        a = i + sgn * di
        b = j + sgn * dj
        if pu:
            a = a % nx
        if pv:
            b = b % ny
        if a < 0 or a >= nx or b < 0 or b >= ny:
            continue
        if state[a, b] != 2:
            continue
        t1 = d[a, b]
        if t1 < best:
            best = t1
            best2 = np.inf
            if second:
                a2 = i + 2 * sgn * di
                b2 = j + 2 * sgn * dj
                if pu:
                    a2 = a2 % nx
                if pv:
                    b2 = b2 % ny
                if 0 <= a2 < nx and 0 <= b2 < ny and state[a2, b2] == 2 and d[a2, b2] < t1:
                    best2 = d[a2, b2]
    if best == np.inf:
        return 0.0, 0.0
    if best2 < np.inf:
        return 9.0 / (4.0 * h * h), (4.0 * best - best2) / 3.0
    return 1.0 / (h * h), best


@njit(cache=True)
def _solve_node(d, state, s, i, j, nx, ny, pu, pv, hx, hy, second):
    ax, tx = _axis_term(d, state, i, j, 1, 0, nx, ny, pu, pv, hx, second)
    ay, ty = _axis_term(d, state, i, j, 0, 1, nx, ny, pu, pv, hy, second)
    rhs = s[i, j] * s[i, j]
    if ax > 0.0 and ay > 0.0:
        A = ax + ay
        B = -2.0 * (ax * tx + ay * ty)
        C = ax * tx * tx + ay * ty * ty - rhs
        disc = B * B - 4.0 * A * C
        if disc >= 0.0:
            T = (-B + math.sqrt(disc)) / (2.0 * A)
            if T >= max(tx, ty) - 1e-15:
                return T
        # fall back to the better one-sided solution
        return min(tx + math.sqrt(rhs / ax), ty + math.sqrt(rhs / ay))
    if ax > 0.0:
        return tx + math.sqrt(rhs / ax)
    if ay > 0.0:
        return ty + math.sqrt(rhs / ay)
    return np.inf


@njit(cache=True)
def fast_march(d0, known, s, hx, hy, pu, pv, second):
    """Fast marching from the nodes marked ``known`` (values d0) with slowness ``s``."""
    nx, ny = s.shape
    d = d0.copy()
    state = np.zeros((nx, ny), dtype=np.int8)  # 0 far, 1 trial, 2 accepted
    heap_t = [0.0]
    heap_i = [0]
    heap_t.pop()
    heap_i.pop()
    for i in range(nx):
        for j in range(ny):
            if known[i, j]:
                state[i, j] = 2
            else:
                d[i, j] = np.inf
    for i in range(nx):
        for j in range(ny):
            if state[i, j] == 2:
                for k in range(4):
                    a = i + (1 if k == 0 else -1 if k == 1 else 0)
                    b = j + (1 if k == 2 else -1 if k == 3 else 0)
                    if pu:
                        a = a % nx
                    if pv:
                        b = b % ny
                    if a < 0 or a >= nx or b < 0 or b >= ny or state[a, b] == 2:
                        continue
                    t = _solve_node(d, state, s, a, b, nx, ny, pu, pv, hx, hy, second)
                    if t < d[a, b]:
                        d[a, b] = t
                        state[a, b] = 1
                        _push(heap_t, heap_i, t, a * ny + b)
    while len(heap_t) > 0:
        t, idx = _pop(heap_t, heap_i)
        i = idx // ny
        j = idx % ny
        if state[i, j] == 2 or t > d[i, j]:
            continue
        state[i, j] = 2
        for k in range(4):
            a = i + (1 if k == 0 else -1 if k == 1 else 0)
            b = j + (1 if k == 2 else -1 if k == 3 else 0)
            if pu:
                a = a % nx
            if pv:
                b = b % ny
            if a < 0 or a >= nx or b < 0 or b >= ny or state[a, b] == 2:
                continue
            tn = _solve_node(d, state, s, a, b, nx, ny, pu, pv, hx, hy, second)
            if tn < d[a, b]:
                d[a, b] = tn
                state[a, b] = 1
                _push(heap_t, heap_i, tn, a * ny + b)
    return d


@njit(cache=True)
def _push(ht, hi, t, idx):
    ht.append(t)
    hi.append(idx)
    k = len(ht) - 1
    while k > 0:
        p = (k - 1) // 2
        if ht[p] <= ht[k]:
            break
        ht[p], ht[k] = ht[k], ht[p]
        hi[p], hi[k] = hi[k], hi[p]
        k = p


@njit(cache=True)
def _pop(ht, hi):
    t = ht[0]
    idx = hi[0]
    lt = ht.pop()
    li = hi.pop()
    n = len(ht)
    if n > 0:
        ht[0] = lt
        hi[0] = li
        k = 0
        while True:
            l = 2 * k + 1
            r = l + 1
            m = k
            if l < n and ht[l] < ht[m]:
                m = l
            if r < n and ht[r] < ht[m]:
                m = r
            if m == k:
                break
            ht[m], ht[k] = ht[k], ht[m]
            hi[m], hi[k] = hi[k], hi[m]
            k = m
    return t, idx

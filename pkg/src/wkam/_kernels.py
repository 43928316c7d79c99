"""numba kernels for the 1D transport/coupling step and its iteration loops.

The transport minimum is taken over the control lattice ``k * dq``, ``|k| <= nq``.
Within one interpolation cell the objective is linear in the control plus the
convex Lagrangian, so only the cell endpoints (eikonal) or, in addition, the two
lattice points bracketing the continuous minimizer (power) can win.  Every candidate is
evaluated with exactly the formula of the brute-force scan.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

FEAS_RTOL = 1e-12


@njit(cache=True)
def _feasible_k(a, dq, nq):
    thr = a * (1.0 + FEAS_RTOL)
    K = int(math.floor(thr / dq))
    while (K + 1) * dq <= thr:
        K += 1
    while K > 0 and K * dq > thr:
        K -= 1
    return min(K, nq)


@njit(cache=True, inline="always")
def _wrap(k, n):
    k = k % n if (k < -n or k >= 2 * n) else k
    if k < 0:
        return k + n
    if k >= n:
        return k - n
    return k


@njit(cache=True)
def _objective(u, i, j, n, k, c, dq, dt, fam, a, V, s, beta):
    sk = k * c
    off = math.floor(-sk)
    w = -sk - off
    ia = _wrap(j + int(off), n)
    ib = ia + 1
    if ib == n:
        ib = 0
    val = (1.0 - w) * u[i, ia] + w * u[i, ib]
    if fam == 0:
        return val + dt * (V - s)
    r = abs(k * dq) / a
    if beta == 2.0:
        return val + dt * (0.5 * r * r + V - s)
    return val + dt * (r**beta / beta + V - s)


@njit(cache=True)
def transport_exact1d(u, out, fam, alpha, speed, pot, shift, dt, h, nq, Q):
    m, n = u.shape
    for i in range(m):
        dq = Q[i] / nq[i]
        c = dt * dq / h
        beta = alpha[i] / (alpha[i] - 1.0)
        for j in range(n):
            a = speed[i, j]
            V = pot[i, j]
            s = shift[i]
            if fam[i] == 0:
                K = _feasible_k(a, dq, nq[i])
            else:
                K = nq[i]
            best = np.inf
            olo = int(math.floor(-K * c))
            ohi = int(math.floor(K * c))
            for o in range(olo, ohi + 1):
                khi = int(math.floor(-o / c))
                klo = int(math.floor(-(o + 1) / c)) + 1
                if klo < -K:
                    klo = -K
                if khi > K:
                    khi = K
                if klo > khi:
                    continue
                # the ranges partition [-K, K], so a boundary misplaced by roundoff
                # is still evaluated as an endpoint of the neighbouring cell
                v = _objective(u, i, j, n, klo, c, dq, dt, fam[i], a, V, s, beta)
                if v < best:
                    best = v
                if khi != klo:
                    v = _objective(u, i, j, n, khi, c, dq, dt, fam[i], a, V, s, beta)
                    if v < best:
                        best = v
                if fam[i] == 1:
                    o_i = _wrap(j + o, n)
                    o_n = o_i + 1 if o_i + 1 < n else 0
                    g = (u[i, o_n] - u[i, o_i]) / h
                    if alpha[i] == 2.0:
                        qstar = a * a * g
                    else:
                        qstar = a * (a * abs(g)) ** (alpha[i] - 1.0)
                        if g < 0:
                            qstar = -qstar
                    kf = int(math.floor(max(min(qstar / dq, K + 1.0), -K - 1.0)))
                    for kk in (kf, kf + 1):
                        if kk > klo and kk < khi:
                            v = _objective(u, i, j, n, kk, c, dq, dt, fam[i], a, V, s, beta)
                            if v < best:
                                best = v
            out[i, j] = best


@njit(cache=True)
def couple(ut, out, P):
    m, n = ut.shape
    for j in range(n):
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += P[j, i, k] * ut[k, j]
            out[i, j] = acc


@njit(cache=True)
def step_exact1d(u, out, tmp, fam, alpha, speed, pot, shift, dt, h, nq, Q, P):
    transport_exact1d(u, tmp, fam, alpha, speed, pot, shift, dt, h, nq, Q)
    couple(tmp, out, P)


@njit(cache=True)
def evolve_exact1d(u, nsteps, fam, alpha, speed, pot, shift, dt, h, nq, Q, P):
    cur = u.copy()
    nxt = np.empty_like(u)
    tmp = np.empty_like(u)
    for k in range(nsteps):
        step_exact1d(cur, nxt, tmp, fam, alpha, speed, pot, shift, dt, h, nq, Q, P)
        if not np.all(np.isfinite(nxt)):
            return nxt, k + 1
        cur, nxt = nxt, cur
    return cur, 0


@njit(cache=True)
def obstacle_exact1d(u, pin_comp, pin_node, tol_rel, maxit, fam, alpha, speed, pot, shift, dt, h, nq, Q, P):
    """Decreasing iteration ``u <- min(u, step u)`` with ``u[pin] = 0`` re-imposed."""
    cur = u.copy()
    nxt = np.empty_like(u)
    tmp = np.empty_like(u)
    m, n = u.shape
    it = 0
    dec = np.inf
    while it < maxit:
        step_exact1d(cur, nxt, tmp, fam, alpha, speed, pot, shift, dt, h, nq, Q, P)
        dec = 0.0
        scale = 0.0
        for i in range(m):
            for j in range(n):
                v = nxt[i, j]
                if v < cur[i, j]:
                    d = cur[i, j] - v
                    if not (i == pin_comp and j == pin_node) and d > dec:
                        dec = d
                else:
                    nxt[i, j] = cur[i, j]
                if abs(nxt[i, j]) > scale:
                    scale = abs(nxt[i, j])
        nxt[pin_comp, pin_node] = 0.0
        cur, nxt = nxt, cur
        it += 1
        if not math.isfinite(dec):
            break
        if dec <= tol_rel * (1.0 + scale):
            break
    return cur, it, dec


@njit(cache=True)
def ascend_exact1d(u, tol_rel, maxit, growth_limit, fam, alpha, speed, pot, shift, dt, h, nq, Q, P):
    """Increasing iteration ``u <- max(u, step u)``; stops early on runaway growth."""
    cur = u.copy()
    nxt = np.empty_like(u)
    tmp = np.empty_like(u)
    m, n = u.shape
    it = 0
    inc = np.inf
    while it < maxit:
        step_exact1d(cur, nxt, tmp, fam, alpha, speed, pot, shift, dt, h, nq, Q, P)
        inc = 0.0
        scale = 0.0
        grown = 0.0
        for i in range(m):
            for j in range(n):
                v = nxt[i, j]
                if v > cur[i, j]:
                    d = v - cur[i, j]
                    if d > inc:
                        inc = d
                else:
                    nxt[i, j] = cur[i, j]
                if abs(nxt[i, j]) > scale:
                    scale = abs(nxt[i, j])
                g = nxt[i, j] - u[i, j]
                if g > grown:
                    grown = g
        cur, nxt = nxt, cur
        it += 1
        if not math.isfinite(inc) or grown > growth_limit:
            break
        if inc <= tol_rel * (1.0 + scale):
            break
    return cur, it, inc


@njit(cache=True)
def contract_exact1d(u, tol_abs, maxit, fam, alpha, speed, pot, shift, dt, h, nq, Q, P):
    """Plain value iteration ``u <- step u``; returns the last sup-norm increment."""
    cur = u.copy()
    nxt = np.empty_like(u)
    tmp = np.empty_like(u)
    m, n = u.shape
    it = 0
    prev = np.inf
    delta = np.inf
    grew = 0
    while it < maxit:
        step_exact1d(cur, nxt, tmp, fam, alpha, speed, pot, shift, dt, h, nq, Q, P)
        delta = 0.0
        for i in range(m):
            for j in range(n):
                d = abs(nxt[i, j] - cur[i, j])
                if d > delta:
                    delta = d
        cur, nxt = nxt, cur
        it += 1
        if delta > prev * (1.0 + 1e-12) and delta > tol_abs:
            grew += 1
        else:
            grew = 0
        prev = delta
        if grew > 50 or not math.isfinite(delta):
            break
        if delta <= tol_abs:
            break
    return cur, it, delta, grew

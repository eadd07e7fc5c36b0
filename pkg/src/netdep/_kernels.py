"""Compiled coordinate-descent kernels working on Gram quantities.

Both solvers take ``R = Z^T Z / n`` and ``U = Z^T X / n`` (``X`` and ``Z``
already centered) and keep ``G = R @ beta`` up to date, so a block update
costs ``O(p d)`` instead of touching the ``n``-row residual.

Status codes: 0 converged, 1 sweep cap reached.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _glasso_kkt(R, U, beta, lam, G):
    p, d = U.shape
    sd = math.sqrt(d)
    worst = 0.0
    for j in range(p):
        nb = 0.0
        for k in range(d):
            nb += beta[j, k] * beta[j, k]
        nb = math.sqrt(nb)
        acc = 0.0
        if nb > 0.0:
            for k in range(d):
                g = (2.0 / d) * (G[j, k] - U[j, k]) + (lam / sd) * beta[j, k] / nb
                acc += g * g
            viol = math.sqrt(acc)
        else:
            for k in range(d):
                g = (2.0 / d) * (G[j, k] - U[j, k])
                acc += g * g
            viol = math.sqrt(acc) - lam / sd
        if viol > worst:
            worst = viol
    return worst


@njit(cache=True)
def _glasso_objective(R, U, beta, lam, G):
    # objective minus the constant ||X||_F^2 / (n d)
    p, d = U.shape
    quad = 0.0
    pen = 0.0
    for j in range(p):
        nb = 0.0
        for k in range(d):
            quad += beta[j, k] * (G[j, k] - 2.0 * U[j, k])
            nb += beta[j, k] * beta[j, k]
        pen += math.sqrt(nb)
    return quad / d + lam / math.sqrt(d) * pen


@njit(cache=True)
def _glasso_row_update(R, U, beta, G, j, lam, c):
    p, d = U.shape
    rjj = R[j, j]
    nc = 0.0
    for k in range(d):
        c[k] = U[j, k] - G[j, k] + rjj * beta[j, k]
        nc += c[k] * c[k]
    nc = math.sqrt(nc)
    thr = lam * math.sqrt(d) / 2.0
    if rjj <= 0.0 or nc <= thr:
        shrink = 0.0
    else:
        shrink = (1.0 - thr / nc) / rjj
    change = 0.0
    for k in range(d):
        new = shrink * c[k]
        delta = new - beta[j, k]
        if delta != 0.0:
            a = abs(delta)
            if a > change:
                change = a
            for l in range(p):
                G[l, k] += R[l, j] * delta
            beta[j, k] = new
    return change


@njit(cache=True)
def glasso_bcd(R, U, lam, beta, tol, max_sweeps, trace):
    """Cyclic block coordinate descent; ``beta`` is updated in place.

    Returns ``(status, sweeps, kkt)``. When ``trace`` has positive length the
    objective after every sweep is written into it.
    """
    p, d = U.shape
    G = R @ beta
    c = np.empty(d)
    active = np.zeros(p, dtype=np.bool_)
    sweeps = 0
    n_trace = trace.shape[0]
    kkt = np.inf
    while sweeps < max_sweeps:
        change = 0.0
        for j in range(p):
            ch = _glasso_row_update(R, U, beta, G, j, lam, c)
            if ch > change:
                change = ch
        sweeps += 1
        if sweeps <= n_trace:
            trace[sweeps - 1] = _glasso_objective(R, U, beta, lam, G)
        for j in range(p):
            nb = 0.0
            for k in range(d):
                nb += beta[j, k] * beta[j, k]
            active[j] = nb > 0.0
        # sweep the active set until it settles, then re-check everything
        inner_change = change
        while inner_change > 0.0 and sweeps < max_sweeps:
            inner_change = 0.0
            for j in range(p):
                if active[j]:
                    ch = _glasso_row_update(R, U, beta, G, j, lam, c)
                    if ch > inner_change:
                        inner_change = ch
            sweeps += 1
            if sweeps <= n_trace:
                trace[sweeps - 1] = _glasso_objective(R, U, beta, lam, G)
            if inner_change <= 1e-3 * tol:
                break
        G = R @ beta
        kkt = _glasso_kkt(R, U, beta, lam, G)
        if kkt <= tol:
            return 0, sweeps, kkt
    return 1, sweeps, kkt


@njit(cache=True)
def _lasso_kkt(R, u, b, lam, g):
    worst = 0.0
    for j in range(u.shape[0]):
        grad = 2.0 * (g[j] - u[j])
        if b[j] > 0.0:
            viol = abs(grad + lam)
        elif b[j] < 0.0:
            viol = abs(grad - lam)
        else:
            viol = abs(grad) - lam
        if viol > worst:
            worst = viol
    return worst


@njit(cache=True)
def _lasso_coord(R, u, b, g, j, lam):
    rjj = R[j, j]
    c = u[j] - g[j] + rjj * b[j]
    half = lam / 2.0
    if rjj <= 0.0:
        new = 0.0
    elif c > half:
        new = (c - half) / rjj
    elif c < -half:
        new = (c + half) / rjj
    else:
        new = 0.0
    delta = new - b[j]
    if delta != 0.0:
        for l in range(u.shape[0]):
            g[l] += R[l, j] * delta
        b[j] = new
    return abs(delta)


@njit(cache=True)
def lasso_cd(R, u, lam, b, tol, max_sweeps):
    """Cyclic coordinate descent for ``(1/n)||x - Z b||^2 + lam ||b||_1``."""
    p = u.shape[0]
    g = R @ b
    sweeps = 0
    kkt = np.inf
    while sweeps < max_sweeps:
        change = 0.0
        for j in range(p):
            ch = _lasso_coord(R, u, b, g, j, lam)
            if ch > change:
                change = ch
        sweeps += 1
        inner = change
        while inner > 0.0 and sweeps < max_sweeps:
            inner = 0.0
            for j in range(p):
                if b[j] != 0.0:
                    ch = _lasso_coord(R, u, b, g, j, lam)
                    if ch > inner:
                        inner = ch
            sweeps += 1
            if inner <= 1e-3 * tol:
                break
        g = R @ b
        kkt = _lasso_kkt(R, u, b, lam, g)
        if kkt <= tol:
            return 0, sweeps, kkt
    return 1, sweeps, kkt

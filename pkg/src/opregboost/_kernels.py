"""
Compiled inner loops of the edge-decomposed Peaceman-Rachford solver for
operator regression. Kept free of Python objects so the per-iteration cost
is genuinely O(E n) down to small n.
"""

import numpy as np
from numba import njit, prange

# below this squared-distance the anchor pair is treated as coincident and the
# edge constraint degenerates to t_i = t_j (midpoint limit of the closed form)
_COINCIDENT_EPS = 1e-280


@njit(cache=True)
def _edge_update(Y, z, t, ei, ej, b, blend_data, blend_dual, e, n):
    i = ei[e]
    j = ej[e]
    dist2 = 0.0
    for d in range(n):
        wi = blend_data * Y[i, d] + blend_dual * z[e, d]
        wj = blend_data * Y[j, d] + blend_dual * z[e, n + d]
        t[e, d] = wi
        t[e, n + d] = wj
        diff = wi - wj
        dist2 += diff * diff
    if b[e] <= _COINCIDENT_EPS:
        for d in range(n):
            m = 0.5 * (t[e, d] + t[e, n + d])
            t[e, d] = m
            t[e, n + d] = m
        return
    lam = 0.5 * (np.sqrt(dist2 / (2.0 * b[e])) - 1.0)
    if lam <= 0.0:
        return
    g = 1.0 + 2.0 * lam
    for d in range(n):
        wi = t[e, d]
        wj = t[e, n + d]
        t[e, d] = ((1.0 + lam) * wi + lam * wj) / g
        t[e, n + d] = (lam * wi + (1.0 + lam) * wj) / g


@njit(cache=True)
def prs_iterations(Y, z, ei, ej, b, rho, max_iter, tol, v, t):
    """Run PRS sweeps in place; returns (iterations, final dual residual).

    Y : (ell, n) operator evaluations; z : (E, 2n) edge duals;
    b : (E,) constraint levels zeta^2 ||x_i - x_j||^2 / 2;
    v : (ell, n) consensus aggregate output; t : (E, 2n) edge primal scratch.
    """
    ell, n = Y.shape
    E = z.shape[0]
    deg = ell - 1.0
    blend_data = rho / (deg + rho)
    blend_dual = deg / (deg + rho)
    res = np.inf
    it = 0
    while it < max_iter:
        for e in range(E):
            _edge_update(Y, z, t, ei, ej, b, blend_data, blend_dual, e, n)
        # consensus aggregation: ordered per-node reduction
        for i in range(ell):
            for d in range(n):
                v[i, d] = 0.0
        for e in range(E):
            i = ei[e]
            j = ej[e]
            for d in range(n):
                v[i, d] += 2.0 * t[e, d] - z[e, d]
                v[j, d] += 2.0 * t[e, n + d] - z[e, n + d]
        for i in range(ell):
            for d in range(n):
                v[i, d] /= deg
        # dual update and residual
        res = 0.0
        for e in range(E):
            i = ei[e]
            j = ej[e]
            for d in range(n):
                dz = v[i, d] - t[e, d]
                z[e, d] += dz
                if abs(dz) > res:
                    res = abs(dz)
                dz = v[j, d] - t[e, n + d]
                z[e, n + d] += dz
                if abs(dz) > res:
                    res = abs(dz)
        it += 1
        if res <= tol:
            break
    return it, res


@njit(cache=True, parallel=True)
def prs_iterations_parallel(Y, z, ei, ej, b, rho, max_iter, tol, v, t):
    """Parallel-edge variant; aggregation order may differ from sequential."""
    ell, n = Y.shape
    E = z.shape[0]
    deg = ell - 1.0
    blend_data = rho / (deg + rho)
    blend_dual = deg / (deg + rho)
    res = np.inf
    it = 0
    while it < max_iter:
        for e in prange(E):
            _edge_update(Y, z, t, ei, ej, b, blend_data, blend_dual, e, n)
        for i in range(ell):
            for d in range(n):
                v[i, d] = 0.0
        for e in range(E):
            i = ei[e]
            j = ej[e]
            for d in range(n):
                v[i, d] += 2.0 * t[e, d] - z[e, d]
                v[j, d] += 2.0 * t[e, n + d] - z[e, n + d]
        for i in range(ell):
            for d in range(n):
                v[i, d] /= deg
        res = 0.0
        for e in prange(E):
            i = ei[e]
            j = ej[e]
            local = 0.0
            for d in range(n):
                dz = v[i, d] - t[e, d]
                z[e, d] += dz
                if abs(dz) > local:
                    local = abs(dz)
                dz = v[j, d] - t[e, n + d]
                z[e, n + d] += dz
                if abs(dz) > local:
                    local = abs(dz)
            # plain max() so numba recognizes the cross-thread reduction
            res = max(res, local)
        it += 1
        if res <= tol:
            break
    return it, res

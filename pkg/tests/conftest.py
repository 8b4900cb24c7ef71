"""Shared test oracles.

The grid minimizer below is the independent brute-force reference for the
solver: it evaluates the surrogate objective at every point of a regular
(b0, b1, b2) lattice and returns the smallest value.  It deliberately shares
no code with the solver.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True, fastmath=True)
def grid_min_surrogate(X, y, yp, use_prior, zeta, tau, gamma, w, lo, step, m):
    n = X.shape[0]
    row_best = np.full(m, 1e300)
    for i1 in prange(m):
        b1 = lo + i1 * step
        acc = np.empty(m)
        accp = np.empty(m)
        s = np.empty(n)
        sp = np.empty(n)
        local = 1e300
        for i2 in range(m):
            b2 = lo + i2 * step
            for i in range(n):
                s[i] = y[i] - X[i, 0] * b1 - X[i, 1] * b2
            if use_prior:
                for i in range(n):
                    sp[i] = yp[i] - X[i, 0] * b1 - X[i, 1] * b2
            pen = (1.0 - zeta) * (w[0] * abs(b1) + w[1] * abs(b2))
            for k in range(m):
                acc[k] = 0.0
            for i in range(n):
                si = s[i]
                for k in range(m):
                    u = si - (lo + k * step)
                    au = abs(u)
                    if au <= gamma:
                        g = u * u / (2.0 * gamma)
                    else:
                        g = au - gamma / 2.0
                    acc[k] += 0.5 * (g + (2.0 * tau - 1.0) * u)
            if use_prior:
                for k in range(m):
                    accp[k] = 0.0
                for i in range(n):
                    si = sp[i]
                    for k in range(m):
                        u = si - (lo + k * step)
                        au = abs(u)
                        if au <= gamma:
                            g = u * u / (2.0 * gamma)
                        else:
                            g = au - gamma / 2.0
                        accp[k] += 0.5 * (g + (2.0 * tau - 1.0) * u)
            for k in range(m):
                obj = (1.0 - zeta) * acc[k] / n + pen
                if use_prior:
                    obj += zeta * accp[k] / n
                if obj < local:
                    local = obj
        row_best[i1] = local
    return row_best.min()

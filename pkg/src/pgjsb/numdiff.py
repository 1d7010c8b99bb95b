"""Central finite differences for gradients and Hessians of scalar functions."""

from __future__ import annotations

import numpy as np

GRAD_STEP = 1e-5
HESS_STEP = 1e-4


def grad_steps(x, rel=GRAD_STEP):
    x = np.asarray(x, dtype=float)
    return np.maximum(rel, rel * np.abs(x))


def fd_gradient(f, x, rel=GRAD_STEP):
    """Central-difference gradient with per-coordinate step max(rel, rel*|x_j|)."""
    x = np.asarray(x, dtype=float)
    h = grad_steps(x, rel)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h[j])
    return g


def fd_hessian(f, x, rel=HESS_STEP):
    """Symmetrised central-difference Hessian.

    Diagonal entries use the three-point second difference, off-diagonal
    entries the four-point cross difference.  Both are exact for quadratics
    up to rounding.
    """
    x = np.asarray(x, dtype=float)
    k = x.size
    h = grad_steps(x, rel)
    f0 = f(x)
    H = np.empty((k, k))
    E = np.diag(h)
    for i in range(k):
        H[i, i] = (f(x + E[i]) - 2.0 * f0 + f(x - E[i])) / (h[i] * h[i])
        for j in range(i + 1, k):
            fpp = f(x + E[i] + E[j])
            fpm = f(x + E[i] - E[j])
            fmp = f(x - E[i] + E[j])
            fmm = f(x - E[i] - E[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return 0.5 * (H + H.T)

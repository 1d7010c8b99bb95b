"""Independent numerical oracles shared by the unit and acceptance tests."""

import math

import numpy as np

# Integration stops C_MIN away from either boundary; the remaining mass (which
# can be large for heavy kernels with extreme links) comes from the cdf.
C_MIN = 1e-300


_GK_X = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_GK_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_GK_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                   0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_GK_X[:-1], _GK_X[::-1]])
_WK = np.concatenate([_GK_WK[:-1], _GK_WK[::-1]])
_WG = np.zeros(15)
_WG[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_GK_WG[:-1], _GK_WG[::-1]])


def gauss_kronrod(f, edges, tol=1e-12, max_rounds=60):
    """Adaptive 7/15-point Gauss-Kronrod over consecutive ``edges``.

    All active intervals are evaluated in one vectorised call per round and
    bisected until |K15 - G7| is below ``tol`` times their share of the
    total length.
    """
    a, b = np.asarray(edges[:-1], float), np.asarray(edges[1:], float)
    total_len = b[-1] - a[0]
    done = 0.0
    for _ in range(max_rounds):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * _NODES[None, :]
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        k = half * (fx @ _WK)
        g = half * (fx @ _WG)
        ok = np.abs(k - g) <= tol * np.maximum((b - a) / total_len, 1e-3)
        done += float(np.sum(k[ok]))
        if ok.all():
            return done
        a, b = a[~ok], b[~ok]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
    raise RuntimeError("adaptive quadrature did not converge")


_BREAK_P = np.array([1e-9, 1e-6, 1e-3, 0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.98, 0.999, 1 - 1e-6, 1 - 1e-9])


def total_mass(log_pdf, cdf, log_pdf_c, sf_c, quantile=None, quantile_c=None):
    """Total probability from both halves of (0, 1).

    The lower half is integrated in s = log y and the upper half in
    s = log(1 - y), evaluating the density there through its complement form
    ``log_pdf_c(1 - y)``, so densities piled against either boundary keep
    their digits.  Mass closer than ``C_MIN`` to either boundary comes from
    ``cdf`` and ``sf_c``.  Optional quantile functions only place extra
    breakpoints where the mass is; all callables must be vectorised.
    """
    half = math.log(0.5)
    lo = math.log(C_MIN)
    base = list(-np.geomspace(-lo, -half, 200))

    def edges(points):
        pts = [v for v in points if lo < v < half]
        return np.unique(np.concatenate([base, pts]))

    pts_lo, pts_hi = [], []
    if quantile is not None:
        y = np.asarray(quantile(_BREAK_P))
        pts_lo = np.log(y[(y > 0) & (y < 0.5)])
    if quantile_c is not None:
        c = np.asarray(quantile_c(_BREAK_P))
        pts_hi = np.log(c[(c > 0) & (c < 0.5)])
    a = gauss_kronrod(lambda s: np.exp(log_pdf(np.exp(s)) + s), edges(pts_lo))
    b = gauss_kronrod(lambda s: np.exp(log_pdf_c(np.exp(s)) + s), edges(pts_hi))
    return float(cdf(C_MIN)) + a + b + float(sf_c(C_MIN))


def richardson_derivative(f, x, h=1e-2, levels=5):
    """Richardson-extrapolated central difference of a scalar function."""
    table = []
    for k in range(levels):
        hk = h / 2 ** k
        row = [(f(x + hk) - f(x - hk)) / (2 * hk)]
        for m in range(1, k + 1):
            prev = table[k - 1][m - 1]
            row.append(row[m - 1] + (row[m - 1] - prev) / (4 ** m - 1))
        table.append(row)
    return table[-1][-1]


def richardson_gradient(f, theta, h=1e-2, levels=5):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for j in range(theta.size):
        def fj(t, j=j):
            x = theta.copy()
            x[j] = t
            return f(x)
        out[j] = richardson_derivative(fj, theta[j], h, levels)
    return out


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bisect(f, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def normal_ppf(p):
    """Inverse of the erf-based normal cdf by bisection."""
    return bisect(lambda x: normal_cdf(x) - p, -40.0, 40.0)

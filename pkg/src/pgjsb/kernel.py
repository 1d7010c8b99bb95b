"""Symmetric kernel families G and link transforms Q on the unit interval.

Every function here is vectorised over numpy arrays and works in log space
where underflow would otherwise bite (far tails of G, boundaries of Q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

KERNELS = ("normal", "logistic", "cauchy")
LINKS = ("logit", "probit", "cauchit", "loglog", "cloglog")

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_PI = np.log(np.pi)


def _log1p_square(x):
    """log(1 + x**2) without overflow for |x| beyond 1e150."""
    x = np.abs(np.asarray(x, dtype=float))
    big = x > 1e150
    with np.errstate(divide="ignore"):
        return np.where(big, 2.0 * np.log(np.where(big, x, 1.0)), np.log1p(np.where(big, 0.0, x) ** 2))


def _p_and_complement(logp):
    """Return (p, 1 - p) for a log-probability without cancellation."""
    logp = np.asarray(logp, dtype=float)
    return np.exp(logp), -np.expm1(logp)


# ---------------------------------------------------------------------------
# Kernel families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelFamily:
    """Standard member of a symmetric location-scale family on the real line.

    Parameters
    ----------
    kind : {"normal", "logistic", "cauchy"}
    """

    kind: str

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")

    def logpdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "normal":
            return -0.5 * u * u - _LOG_SQRT_2PI
        if self.kind == "logistic":
            a = np.abs(u)
            return -a - 2.0 * np.log1p(np.exp(-a))
        return -_LOG_PI - _log1p_square(u)

    def pdf(self, u):
        return np.exp(self.logpdf(u))

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "normal":
            return special.ndtr(u)
        if self.kind == "logistic":
            return special.expit(u)
        # arctan2 form keeps full relative accuracy in the lower tail
        return np.arctan2(1.0, -u) / np.pi

    def logcdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "normal":
            return special.log_ndtr(u)
        if self.kind == "logistic":
            return -np.logaddexp(0.0, -u)
        return np.log(np.arctan2(1.0, -u)) - _LOG_PI

    def sf(self, u):
        return self.cdf(-np.asarray(u, dtype=float))

    def isf(self, p):
        return -self.ppf(p)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(~((p > 0.0) & (p < 1.0))):
            raise ValueError("kernel quantile needs p in (0, 1)")
        return self._ppf_pair(p, 1.0 - p)

    def ppf_from_log(self, logp):
        """Quantile at ``p = exp(logp)``; accurate in both tails and for
        ``logp`` far below the underflow threshold of ``exp``."""
        logp = np.asarray(logp, dtype=float)
        if self.kind == "normal":
            return special.ndtri_exp(logp)
        if self.kind == "logistic":
            return logp - np.log(-np.expm1(logp))
        p, pc = _p_and_complement(logp)
        return self._ppf_pair(p, pc)

    def _ppf_pair(self, p, pc):
        # p and pc = 1 - p are both supplied so neither tail loses digits
        p = np.asarray(p, dtype=float)
        pc = np.asarray(pc, dtype=float)
        if self.kind == "normal":
            return np.where(p < 0.5, special.ndtri(p), -special.ndtri(pc))
        if self.kind == "logistic":
            return np.log(p) - np.log(pc)
        with np.errstate(divide="ignore"):
            lower = -1.0 / np.tan(np.pi * p)
            upper = 1.0 / np.tan(np.pi * pc)
        return np.where(p < 0.5, lower, upper)


# ---------------------------------------------------------------------------
# Link transforms
# ---------------------------------------------------------------------------


def _check_unit(y, what):
    y = np.asarray(y, dtype=float)
    if np.any(~((y > 0.0) & (y < 1.0))):
        raise ValueError(f"{what} needs y strictly inside (0, 1)")
    return y


@dataclass(frozen=True)
class LinkTransform:
    """Strictly increasing map Q from (0, 1) onto the real line.

    ``loglog`` is the Gumbel quantile ``-log(-log y)`` and ``cloglog`` the
    reverse-Gumbel quantile ``log(-log(1 - y))``.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in LINKS:
            raise ValueError(f"unknown link {self.kind!r}; expected one of {LINKS}")

    # The underscored methods skip domain checks; the likelihood calls them
    # on already-validated data.
    def _forward(self, y):
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "logit":
            return np.log(y) - np.log1p(-y)
        if k == "probit":
            return np.where(y < 0.5, special.ndtri(y), -special.ndtri(1.0 - y))
        if k == "cauchit":
            with np.errstate(divide="ignore"):
                return np.where(y < 0.5, -1.0 / np.tan(np.pi * y), 1.0 / np.tan(np.pi * (1.0 - y)))
        if k == "loglog":
            return -np.log(-np.log(y))
        return np.log(-np.log1p(-y))

    def _log_deriv(self, y):
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "logit":
            return -np.log(y) - np.log1p(-y)
        if k == "probit":
            x = self._forward(y)
            return 0.5 * x * x + _LOG_SQRT_2PI
        if k == "cauchit":
            x = self._forward(y)
            return _LOG_PI + _log1p_square(x)
        if k == "loglog":
            return -np.log(y) - np.log(-np.log(y))
        m = -np.log1p(-y)
        return m - np.log(m)

    # Complement forms take c = 1 - y, keeping full precision as y -> 1.
    def _forward_c(self, c):
        c = np.asarray(c, dtype=float)
        k = self.kind
        if k == "logit":
            return np.log1p(-c) - np.log(c)
        if k == "probit":
            return np.where(c < 0.5, -special.ndtri(c), special.ndtri(1.0 - c))
        if k == "cauchit":
            with np.errstate(divide="ignore"):
                return 1.0 / np.tan(np.pi * c)
        if k == "loglog":
            return -np.log(-np.log1p(-c))
        return np.log(-np.log(c))

    def _log_deriv_c(self, c):
        c = np.asarray(c, dtype=float)
        k = self.kind
        if k == "logit":
            return -np.log(c) - np.log1p(-c)
        if k == "probit":
            x = self._forward_c(c)
            return 0.5 * x * x + _LOG_SQRT_2PI
        if k == "cauchit":
            return _LOG_PI + _log1p_square(self._forward_c(c))
        if k == "loglog":
            m = -np.log1p(-c)
            return m - np.log(m)
        m = -np.log(c)
        return m - np.log(m)

    def forward(self, y):
        return self._forward(_check_unit(y, f"{self.kind} link"))

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "logit":
            return special.expit(x)
        if k == "probit":
            return special.ndtr(x)
        if k == "cauchit":
            return np.arctan2(1.0, -x) / np.pi
        with np.errstate(over="ignore"):
            if k == "loglog":
                return np.exp(-np.exp(-x))
            return -np.expm1(-np.exp(x))

    def inverse_c(self, x):
        """``1 - inverse(x)`` computed directly."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "logit":
            return special.expit(-x)
        if k == "probit":
            return special.ndtr(-x)
        if k == "cauchit":
            return np.arctan2(1.0, x) / np.pi
        with np.errstate(over="ignore"):
            if k == "loglog":
                return -np.expm1(-np.exp(-x))
            return np.exp(-np.exp(x))

    def deriv(self, y):
        return np.exp(self._log_deriv(_check_unit(y, f"{self.kind} link derivative")))

    def log_deriv(self, y):
        return self._log_deriv(_check_unit(y, f"{self.kind} link derivative"))


def as_kernel(family) -> KernelFamily:
    return family if isinstance(family, KernelFamily) else KernelFamily(str(family))


def as_link(link) -> LinkTransform:
    return link if isinstance(link, LinkTransform) else LinkTransform(str(link))


def g_pdf(family, u):
    return as_kernel(family).pdf(u)


def g_cdf(family, u):
    return as_kernel(family).cdf(u)


def g_quantile(family, p):
    return as_kernel(family).ppf(p)


def link_forward(link, y):
    return as_link(link).forward(y)


def link_inverse(link, x):
    return as_link(link).inverse(x)


def link_deriv(link, y):
    return as_link(link).deriv(y)

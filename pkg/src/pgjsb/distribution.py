"""Power generalized Johnson S_B distribution under its two quantile
parameterizations.

RPGJSB1 carries a free shape ``alpha`` and anchors ``psi`` at the q-quantile
through ``gamma = xstar(q, alpha) - delta * Q(psi)``.  RPGJSB2 pins
``alpha = -log(q) / log(2)`` so that ``xi`` is the q-quantile with no shift.

The density is

    f(y) = delta * alpha * G(t)**(alpha - 1) * g(t) * |dQ/dy|,
    t    = delta * (Q(y) - Q(psi)) + xstar(q, alpha),

and the cdf is ``G(t)**alpha``.  Both G and g take the same argument ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .kernel import KernelFamily, LinkTransform, _check_unit, as_kernel, as_link

ArrayLike = Union[float, np.ndarray]


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0.0) & (q < 1.0))):
        raise ValueError("quantile level q must lie in (0, 1)")
    return q


def alpha_of_q(q):
    """Shape that makes the median of G land on the q-quantile: (1/2)**alpha = q."""
    q = _check_q(q)
    out = -np.log2(q)
    return float(out) if out.ndim == 0 else out


def xstar(kernel, q, alpha):
    """Kernel quantile ``G^{-1}(q**(1/alpha))``, computed from ``log(q)/alpha``."""
    q = _check_q(q)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0.0)):
        raise ValueError("alpha must be positive")
    out = as_kernel(kernel).ppf_from_log(np.log(q) / alpha)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Shared core, no validation; arrays broadcast.
# ---------------------------------------------------------------------------


def _log_density_q(qy, log_jac, eta, delta, alpha, shift, kernel: KernelFamily):
    """log f given ``qy = Q(y)`` and ``log_jac = log dQ/dy``."""
    t = delta * (qy - eta) + shift
    with np.errstate(invalid="ignore", over="ignore"):
        core = kernel.logpdf(t) + np.where(alpha == 1.0, 0.0, (alpha - 1.0) * kernel.logcdf(t))
    # -inf + inf only arises as |t| -> inf, where g(t) G(t)**(alpha-1) -> 0
    core = np.where(np.isnan(core) & ~np.isnan(t), -np.inf, core)
    return np.log(delta) + np.log(alpha) + core + log_jac


def _log_density(y, eta, delta, alpha, shift, kernel: KernelFamily, link: LinkTransform):
    """log f at y where ``eta = Q(quantile parameter)``."""
    return _log_density_q(link._forward(y), link._log_deriv(y), eta, delta, alpha, shift, kernel)


def _log_sf_q(qy, eta, delta, alpha, shift, kernel: KernelFamily):
    """log(1 - G(t)**alpha) without cancellation when the cdf is close to 1."""
    t = delta * (qy - eta) + shift
    log_cdf = alpha * kernel.logcdf(t)
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(log_cdf))


def _log_cdf(y, eta, delta, alpha, shift, kernel: KernelFamily, link: LinkTransform):
    t = delta * (link._forward(y) - eta) + shift
    return alpha * kernel.logcdf(t)


def _quantile(p, eta, delta, alpha, shift, kernel: KernelFamily, link: LinkTransform):
    x = kernel.ppf_from_log(np.log(p) / alpha)
    return link.inverse(eta + (x - shift) / delta)


def _quantile_c(p, eta, delta, alpha, shift, kernel: KernelFamily, link: LinkTransform):
    x = kernel.ppf_from_log(np.log(p) / alpha)
    return link.inverse_c(eta + (x - shift) / delta)


def _isf(s, eta, delta, alpha, shift, kernel: KernelFamily, link: LinkTransform):
    # G(x) = (1 - s)^(1/alpha); above 1/2 the kernel is inverted from its upper tail
    log_g = np.log1p(-s) / alpha
    with np.errstate(divide="ignore"):
        upper = -np.expm1(log_g)
        x = np.where(log_g < -np.log(2.0), kernel.ppf_from_log(log_g), -kernel.ppf_from_log(np.log(upper)))
    return link.inverse(eta + (x - shift) / delta)


def _to_open_unit(y):
    # draws that round to exactly 0 or 1 in double precision are nudged inward
    return np.clip(y, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# RPGJSB1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rpgjsb1Params:
    """RPGJSB1 parameters; ``psi`` is the q-quantile, ``alpha`` the free shape.

    ``psi`` and ``delta`` may be arrays (one entry per observation).
    """

    psi: ArrayLike
    delta: ArrayLike
    alpha: float
    q: float
    kernel: KernelFamily = KernelFamily("normal")
    link: LinkTransform = LinkTransform("logit")

    def __post_init__(self):
        object.__setattr__(self, "kernel", as_kernel(self.kernel))
        object.__setattr__(self, "link", as_link(self.link))
        _check_unit(self.psi, "psi")
        if np.any(~(np.asarray(self.delta, dtype=float) > 0.0)):
            raise ValueError("delta must be positive")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        _check_q(self.q)

    @property
    def shift(self) -> float:
        return xstar(self.kernel, self.q, self.alpha)

    @property
    def gamma(self):
        """Intercept of the unparameterized form ``[G(gamma + delta Q(y))]**alpha``."""
        return self.shift - np.asarray(self.delta) * self.link._forward(self.psi)

    def _args(self):
        eta = self.link._forward(np.asarray(self.psi, dtype=float))
        return eta, np.asarray(self.delta, dtype=float), float(self.alpha), self.shift, self.kernel, self.link


def log_pdf1(y, params: Rpgjsb1Params):
    y = _check_unit(y, "RPGJSB1 density")
    return _log_density(y, *params._args())


def pdf1(y, params: Rpgjsb1Params):
    return np.exp(log_pdf1(y, params))


def cdf1(y, params: Rpgjsb1Params):
    y = _check_unit(y, "RPGJSB1 cdf")
    return np.exp(_log_cdf(y, *params._args()))


def log_pdf1_complement(c, params: Rpgjsb1Params):
    """log density at ``y = 1 - c``, passing ``c`` so values near 1 keep their digits."""
    c = _check_unit(c, "RPGJSB1 density complement")
    eta, delta, alpha, shift, kernel, link = params._args()
    return _log_density_q(link._forward_c(c), link._log_deriv_c(c), eta, delta, alpha, shift, kernel)


def sf1_complement(c, params: Rpgjsb1Params):
    """Survival probability ``P(Y > 1 - c)``."""
    c = _check_unit(c, "RPGJSB1 survival complement")
    eta, delta, alpha, shift, kernel, link = params._args()
    return np.exp(_log_sf_q(link._forward_c(c), eta, delta, alpha, shift, kernel))


def quantile1(p, params: Rpgjsb1Params):
    """Closed-form inverse of the cdf; quantiles beyond double range are clipped into (0, 1)."""
    p = _check_q(p)
    return _to_open_unit(_quantile(p, *params._args()))


def quantile1_complement(p, params: Rpgjsb1Params):
    """``1 - quantile1(p)`` without cancellation for quantiles close to 1."""
    p = _check_q(p)
    return _to_open_unit(_quantile_c(p, *params._args()))


def isf1(s, params: Rpgjsb1Params):
    """Inverse survival function: the y with ``P(Y > y) = s``, accurate for small s."""
    s = _check_q(s)
    return _to_open_unit(_isf(s, *params._args()))


def sample1(params: Rpgjsb1Params, n: int, rng_seed=None):
    """Inverse-cdf draws; ``rng_seed`` is an int or a ``numpy.random.Generator``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    u = _rng(rng_seed).uniform(size=n)
    # uniform() can return exactly 0.0
    u = np.where(u > 0.0, u, np.nextafter(0.0, 1.0))
    return _to_open_unit(_quantile(u, *params._args()))


# ---------------------------------------------------------------------------
# RPGJSB2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rpgjsb2Params:
    """RPGJSB2 parameters; ``xi`` is the q-quantile and alpha is tied to q."""

    xi: ArrayLike
    delta: ArrayLike
    q: float
    kernel: KernelFamily = KernelFamily("normal")
    link: LinkTransform = LinkTransform("logit")

    def __post_init__(self):
        object.__setattr__(self, "kernel", as_kernel(self.kernel))
        object.__setattr__(self, "link", as_link(self.link))
        _check_unit(self.xi, "xi")
        if np.any(~(np.asarray(self.delta, dtype=float) > 0.0)):
            raise ValueError("delta must be positive")
        _check_q(self.q)

    @property
    def alpha(self) -> float:
        return alpha_of_q(self.q)

    def _args(self):
        eta = self.link._forward(np.asarray(self.xi, dtype=float))
        return eta, np.asarray(self.delta, dtype=float), self.alpha, 0.0, self.kernel, self.link


def log_pdf2(y, params: Rpgjsb2Params):
    y = _check_unit(y, "RPGJSB2 density")
    return _log_density(y, *params._args())


def pdf2(y, params: Rpgjsb2Params):
    return np.exp(log_pdf2(y, params))


def cdf2(y, params: Rpgjsb2Params):
    y = _check_unit(y, "RPGJSB2 cdf")
    return np.exp(_log_cdf(y, *params._args()))


def log_pdf2_complement(c, params: Rpgjsb2Params):
    c = _check_unit(c, "RPGJSB2 density complement")
    eta, delta, alpha, shift, kernel, link = params._args()
    return _log_density_q(link._forward_c(c), link._log_deriv_c(c), eta, delta, alpha, shift, kernel)


def sf2_complement(c, params: Rpgjsb2Params):
    c = _check_unit(c, "RPGJSB2 survival complement")
    eta, delta, alpha, shift, kernel, link = params._args()
    return np.exp(_log_sf_q(link._forward_c(c), eta, delta, alpha, shift, kernel))


def quantile2(p, params: Rpgjsb2Params):
    p = _check_q(p)
    return _to_open_unit(_quantile(p, *params._args()))


def quantile2_complement(p, params: Rpgjsb2Params):
    p = _check_q(p)
    return _to_open_unit(_quantile_c(p, *params._args()))


def isf2(s, params: Rpgjsb2Params):
    """Inverse survival function: the y with ``P(Y > y) = s``, accurate for small s."""
    s = _check_q(s)
    return _to_open_unit(_isf(s, *params._args()))


def sample2(params: Rpgjsb2Params, n: int, rng_seed=None):
    if n < 1:
        raise ValueError("n must be at least 1")
    u = _rng(rng_seed).uniform(size=n)
    u = np.where(u > 0.0, u, np.nextafter(0.0, 1.0))
    return _to_open_unit(_quantile(u, *params._args()))

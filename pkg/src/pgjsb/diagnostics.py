"""Residuals, normality tests and local-influence diagnostics for fitted models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import special, stats

from .distribution import _log_cdf, _log_density
from .regression import (
    FitOptions,
    FitResult,
    ModelSpec,
    _clamp,
    check_response,
    fit as fit_model,
    loglik_terms,
    unpack,
    wald_table,
)

SCHEMES = ("case_weight", "response", "predictor")
TARGETS = ("theta", "beta", "nu")
CDF_CLAMP = 1e-15


# ---------------------------------------------------------------------------
# Quantile residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResidualReport:
    residuals: np.ndarray
    test_pvalues: dict
    n_clamped: int = 0


def fitted_cdf(fit: FitResult, spec: ModelSpec, y) -> np.ndarray:
    """Fitted conditional cdf at each observed response."""
    y = check_response(y)
    eta1, delta, alpha, shift = unpack(fit.theta, spec)
    return np.exp(_log_cdf(_clamp(y), eta1, delta, alpha, shift, spec.kernel, spec.link))


def rqr(fit: FitResult, spec: ModelSpec, y, return_clamped: bool = False):
    """Quantile residuals ``Phi^{-1}(F(y_i; fitted parameters))``.

    The response is continuous, so no randomisation step is involved.  Cdf
    values are clamped to ``[1e-15, 1 - 1e-15]`` before inversion.
    """
    u = fitted_cdf(fit, spec, y)
    clamped = int(np.sum((u < CDF_CLAMP) | (u > 1.0 - CDF_CLAMP)))
    r = special.ndtri(np.clip(u, CDF_CLAMP, 1.0 - CDF_CLAMP))
    return (r, clamped) if return_clamped else r


def anderson_darling_simple(x, logcdf=special.log_ndtr, logsf=None):
    """Anderson-Darling test against a fully specified continuous law.

    Returns ``(A2, p_value)``.  The p-value uses the Marsaglia & Marsaglia
    (2004) asymptotic distribution with their finite-n correction.  Defaults
    to the standard normal.
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if logsf is None:
        def logsf(v):
            return special.log_ndtr(-v)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (logcdf(x) + logsf(x[::-1])))
    return float(a2), float(1.0 - _ad_cdf(n, a2))


def _ad_inf(z):
    if z <= 0:
        return 0.0
    if z < 2.0:
        return np.exp(-1.2337141 / z) / np.sqrt(z) * (
            2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    return np.exp(-np.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z))


def _ad_errfix(n, x):
    if x > 0.8:
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n
    c = 0.01265 + 0.1757 / n
    if x < c:
        t = x / c
        t = np.sqrt(t) * (1.0 - t) * (49 * t - 102)
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n
    t = (x - c) / (0.8 - c)
    t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t
    return t * (0.04213 + 0.01365 / n) / n


def _ad_cdf(n, z):
    x = _ad_inf(z)
    return float(np.clip(x + _ad_errfix(n, x), 0.0, 1.0))


def normality_tests(residuals) -> dict:
    """p-values of KS, SW, AD and CVM tests of the residuals.

    KS, AD and CVM test the fully specified N(0, 1) null; SW tests composite
    normality (unknown mean and variance).
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 8:
        raise ValueError("normality tests need at least 8 residuals")
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals contain non-finite values")
    if np.ptp(r) == 0.0:
        raise ValueError("residuals are constant; Shapiro-Wilk is degenerate")
    return {
        "KS": float(stats.kstest(r, "norm").pvalue),
        "SW": float(stats.shapiro(r).pvalue),
        "AD": anderson_darling_simple(r)[1],
        "CVM": float(stats.cramervonmises(r, "norm").pvalue),
    }


def residual_report(fit: FitResult, spec: ModelSpec, y) -> ResidualReport:
    r, clamped = rqr(fit, spec, y, return_clamped=True)
    return ResidualReport(r, normality_tests(r), clamped)


# ---------------------------------------------------------------------------
# Local influence
# ---------------------------------------------------------------------------


def _baseline(scheme, y):
    n = y.size
    if scheme == "response":
        s_y = float(np.std(y, ddof=1))
        return np.full(n, 1.0 / s_y), s_y
    return np.ones(n), None


def _terms_factory(spec: ModelSpec, y, scheme, s_y=None, literal_response_tau=False):
    """Per-observation perturbed log-likelihood ``(theta, w) -> l_i(theta; w_i)``."""
    if scheme == "case_weight":
        return lambda theta, w: w * loglik_terms(theta, spec, y)
    if scheme == "response":
        if literal_response_tau and spec.has_alpha:
            def terms(theta, w):
                eta1, delta, alpha, _ = unpack(theta, spec)
                yw = _clamp(y * w * s_y)
                with np.errstate(all="ignore"):
                    return _log_density(yw, eta1, delta, alpha, 0.0, spec.kernel, spec.link)
            return terms
        return lambda theta, w: loglik_terms(theta, spec, y * w * s_y)
    if scheme == "predictor":
        return lambda theta, w: loglik_terms(theta, spec, y, X=spec.X * w[:, None], Z=spec.Z * w[:, None])
    raise ValueError(f"unknown perturbation scheme {scheme!r}; expected one of {SCHEMES}")


def perturbation_nabla(fit: FitResult, spec: ModelSpec, y, scheme: str,
                       literal_response_tau: bool = False) -> np.ndarray:
    """Mixed partials ``d^2 l(theta; w) / d theta_j d w_i`` at (theta_hat, w0).

    Each l_i depends on its own w_i only, so all n columns come from four
    evaluations of the per-observation terms per parameter.  Schemes:

    * ``case_weight``: ``l(theta; w) = sum w_i l_i(theta)``, ``w0 = 1``;
    * ``response``: ``y_i(w_i) = y_i w_i s_y`` with ``s_y`` the sample standard
      deviation of y and ``w0 = 1 / s_y``;
    * ``predictor``: both linear predictors multiplied by ``w_i``, ``w0 = 1``.

    ``literal_response_tau`` drops the xstar shift in the RPGJSB1 response
    scheme, for comparison with an alternative reading of that likelihood.
    """
    y = check_response(y)
    theta = np.asarray(fit.theta, dtype=float)
    w0, s_y = _baseline(scheme, y)
    terms = _terms_factory(spec, y, scheme, s_y, literal_response_tau)
    hw = 1e-5 * (1.0 + np.abs(w0))
    if scheme == "response":
        # shrink the step where y_i (w0 + h) s_y would leave (0, 1)
        room = (1.0 - y) / (y * s_y)
        hw = np.minimum(hw, 0.5 * room)
    ht = 1e-5 * (1.0 + np.abs(theta))
    out = np.empty((theta.size, y.size))
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = ht[j]
        pp = terms(theta + e, w0 + hw)
        pm = terms(theta + e, w0 - hw)
        mp = terms(theta - e, w0 + hw)
        mm = terms(theta - e, w0 - hw)
        out[j] = (pp - pm - mp + mm) / (4.0 * ht[j] * hw)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite perturbation matrix for scheme {scheme!r}")
    return out


def target_indices(spec: ModelSpec, target: str) -> np.ndarray:
    p, r = spec.p, spec.r
    if target == "theta":
        return np.arange(spec.dim)
    if target == "beta":
        return np.arange(p)
    if target == "nu":
        return np.arange(p, p + r)
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


def curvature_kernel(info, idx) -> np.ndarray:
    """``Sigma^{-1}`` minus the complement-block inverse (zero if no complement)."""
    info = np.asarray(info, dtype=float)
    inv = np.linalg.inv(info)
    comp = np.setdiff1d(np.arange(info.shape[0]), idx)
    if comp.size:
        inv[np.ix_(comp, comp)] -= np.linalg.inv(info[np.ix_(comp, comp)])
    return inv


@dataclass(frozen=True, eq=False)
class InfluenceReport:
    scheme: str
    target: str
    C: np.ndarray
    d_max: np.ndarray
    c_max: float
    threshold: float
    flagged: np.ndarray
    B: np.ndarray = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "index": np.arange(1, self.C.size + 1),
            "C_i": self.C,
            "d_max": self.d_max,
            "threshold": np.full(self.C.size, self.threshold),
            "flag": self.C > self.threshold,
        })


def local_influence(fit: FitResult, spec: ModelSpec, y, scheme: str = "case_weight",
                    target: str = "theta", nabla: Optional[np.ndarray] = None,
                    literal_response_tau: bool = False) -> InfluenceReport:
    """Total local influence ``C_i = 2 |b_ii|`` of ``B = nabla' M nabla``.

    ``M`` is the inverse observed information, reduced to the ``target``
    block by subtracting the inverse of the complementary block.
    """
    info = fit.observed_info
    if not np.all(np.isfinite(info)):
        raise np.linalg.LinAlgError("observed information is not finite")
    if nabla is None:
        nabla = perturbation_nabla(fit, spec, y, scheme, literal_response_tau)
    M = curvature_kernel(info, target_indices(spec, target))
    B = nabla.T @ M @ nabla
    B = 0.5 * (B + B.T)
    C = 2.0 * np.abs(np.diag(B))
    ev, vec = np.linalg.eigh(B)
    d = vec[:, -1]
    d = d if d[np.argmax(np.abs(d))] >= 0 else -d
    threshold = 2.0 * float(np.sum(C)) / C.size
    return InfluenceReport(scheme, target, C, d, 2.0 * float(abs(ev[-1])), threshold,
                           np.flatnonzero(C > threshold), B)


# ---------------------------------------------------------------------------
# Case deletion
# ---------------------------------------------------------------------------


def case_deletion_rc(fit_full: FitResult, spec: ModelSpec, y,
                     drop_index: Union[int, Sequence[int], None],
                     options: Optional[FitOptions] = None) -> pd.DataFrame:
    """Relative changes (%) in estimates and standard errors after dropping rows.

    ``drop_index`` is zero-based.  Where a full-data estimate (or SE) is
    exactly zero the absolute change is reported and ``rc_absolute`` is set.
    The refit starts from the full-data estimate.  Whether it converged is
    stored in ``frame.attrs["converged"]``.
    """
    y = check_response(y)
    drop = np.atleast_1d(np.asarray([] if drop_index is None else drop_index, dtype=int))
    if np.any((drop < 0) | (drop >= y.size)):
        raise IndexError("drop index out of range")
    keep = np.setdiff1d(np.arange(y.size), drop)
    if keep.size - 1 <= spec.dim:
        raise ValueError("too few observations left after deletion")
    base = options or FitOptions()
    opts = FitOptions(max_restarts=base.max_restarts, seed=base.seed, maxiter=base.maxiter,
                      gtol=base.gtol, start=np.asarray(fit_full.theta, dtype=float))
    reduced = fit_model(spec.subset(keep), y[keep], opts)
    est0, est1 = np.asarray(fit_full.theta), np.asarray(reduced.theta)
    se0, se1 = np.asarray(fit_full.se), np.asarray(reduced.se)

    def rel(a, b):
        diff = np.abs(a - b)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a == 0.0, diff, 100.0 * diff / np.abs(a)), a == 0.0

    rc, rc_abs = rel(est0, est1)
    rcse, rcse_abs = rel(se0, se1)
    wt = wald_table(reduced)
    out = pd.DataFrame({
        "estimate_full": est0, "estimate_reduced": est1, "RC": rc, "rc_absolute": rc_abs,
        "se_full": se0, "se_reduced": se1, "RCSE": rcse, "rcse_absolute": rcse_abs,
        "p_value": wt["p_two_sided"].to_numpy(), "p_one_sided": wt["p_one_sided"].to_numpy(),
    }, index=pd.Index(fit_full.names, name="parameter"))
    out.attrs["converged"] = bool(reduced.converged)
    out.attrs["dropped"] = drop.tolist()
    return out

"""Quantile regression on the RPGJSB1 / RPGJSB2 families.

Regression structure (same link Q for the response and the quantile):

    Q(psi_i) = x_i' beta,     log(delta_i) = z_i' nu

The parameter vector is flattened as ``(beta, nu[, log_alpha])``; RPGJSB1
carries the shape on the log scale, RPGJSB2 fixes it at ``alpha_of_q(q)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize, stats

from .distribution import _log_density, _quantile, alpha_of_q, xstar
from .kernel import KernelFamily, LinkTransform, as_kernel, as_link
from .numdiff import fd_gradient, fd_hessian

log = logging.getLogger(__name__)

VARIANTS = ("rpgjsb1", "rpgjsb2")

# Responses are kept strictly inside the representable open interval before Q.
Y_LOWER = np.finfo(float).tiny
Y_UPPER = np.nextafter(1.0, 0.0)


def _as_design(M, n=None):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError("design matrices must be two-dimensional")
    if n is not None and M.shape[0] != n:
        raise ValueError(f"design has {M.shape[0]} rows, expected {n}")
    return M


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Model variant, quantile level, kernel, link and both design matrices.

    ``Z`` may have zero columns, in which case every ``delta_i`` is 1.
    """

    variant: str
    q: float
    kernel: KernelFamily
    link: LinkTransform
    X: np.ndarray
    Z: np.ndarray
    x_names: Optional[Sequence[str]] = None
    z_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        variant = str(self.variant).lower()
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if not 0.0 < float(self.q) < 1.0:
            raise ValueError("q must lie in (0, 1)")
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "kernel", as_kernel(self.kernel))
        object.__setattr__(self, "link", as_link(self.link))
        X = _as_design(self.X)
        n = X.shape[0]
        Z = np.ones((n, 0)) if self.Z is None else _as_design(self.Z, n)
        p, r = X.shape[1], Z.shape[1]
        if p == 0:
            raise ValueError("quantile design needs at least one column")
        if np.linalg.matrix_rank(X) < p:
            raise ValueError("quantile design matrix X is rank deficient")
        if r and np.linalg.matrix_rank(Z) < r:
            raise ValueError("scale design matrix Z is rank deficient")
        if p + r >= n:
            raise ValueError(f"need p + r < n (p={p}, r={r}, n={n})")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        xn = tuple(self.x_names) if self.x_names is not None else tuple(f"beta{j}" for j in range(p))
        zn = tuple(self.z_names) if self.z_names is not None else tuple(f"nu{j}" for j in range(r))
        if len(xn) != p or len(zn) != r:
            raise ValueError("parameter names do not match the design widths")
        object.__setattr__(self, "x_names", xn)
        object.__setattr__(self, "z_names", zn)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def r(self) -> int:
        return self.Z.shape[1]

    @property
    def has_alpha(self) -> bool:
        return self.variant == "rpgjsb1"

    @property
    def dim(self) -> int:
        return self.p + self.r + int(self.has_alpha)

    @property
    def param_names(self) -> list[str]:
        names = list(self.x_names) + list(self.z_names)
        return names + ["log_alpha"] if self.has_alpha else names

    def with_designs(self, X, Z) -> "ModelSpec":
        return ModelSpec(self.variant, self.q, self.kernel, self.link, X, Z, self.x_names, self.z_names)

    def with_q(self, q: float, variant: Optional[str] = None) -> "ModelSpec":
        return ModelSpec(variant or self.variant, q, self.kernel, self.link, self.X, self.Z,
                         self.x_names, self.z_names)

    def subset(self, keep) -> "ModelSpec":
        return self.with_designs(self.X[keep], self.Z[keep])


@dataclass(frozen=True)
class ParamVector:
    beta: np.ndarray
    nu: np.ndarray
    log_alpha: Optional[float] = None

    def flat(self) -> np.ndarray:
        parts = [np.atleast_1d(self.beta), np.atleast_1d(self.nu)]
        if self.log_alpha is not None:
            parts.append([self.log_alpha])
        return np.concatenate(parts).astype(float)

    @classmethod
    def from_flat(cls, theta, spec: ModelSpec) -> "ParamVector":
        theta = np.asarray(theta, dtype=float)
        if theta.size != spec.dim:
            raise ValueError(f"theta has {theta.size} entries, model needs {spec.dim}")
        p, r = spec.p, spec.r
        la = float(theta[p + r]) if spec.has_alpha else None
        return cls(theta[:p].copy(), theta[p:p + r].copy(), la)


def _flat(theta) -> np.ndarray:
    return theta.flat() if isinstance(theta, ParamVector) else np.asarray(theta, dtype=float)


def check_response(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    bad = np.flatnonzero(~((y > 0.0) & (y < 1.0)))
    if bad.size:
        raise ValueError(f"response must lie strictly inside (0, 1); offending rows: {bad[:10].tolist()}")
    return y


def _clamp(y):
    return np.clip(y, Y_LOWER, Y_UPPER)


def unpack(theta, spec: ModelSpec):
    """Return (eta1, delta, alpha, shift) per observation for a flat theta."""
    theta = _flat(theta)
    p, r = spec.p, spec.r
    eta1 = spec.X @ theta[:p]
    delta = np.exp(spec.Z @ theta[p:p + r]) if r else np.ones(spec.n)
    if spec.has_alpha:
        alpha = float(np.exp(theta[p + r]))
        shift = xstar(spec.kernel, spec.q, alpha) if np.isfinite(alpha) and alpha > 0 else np.nan
    else:
        alpha = alpha_of_q(spec.q)
        shift = 0.0
    return eta1, delta, alpha, shift


def loglik_terms(theta, spec: ModelSpec, y, X=None, Z=None) -> np.ndarray:
    """Per-observation log-likelihood contributions.

    ``X`` / ``Z`` override the designs (used by predictor perturbation).
    """
    theta = _flat(theta)
    if X is not None or Z is not None:
        spec = _Override(spec, X, Z)
    eta1, delta, alpha, shift = unpack(theta, spec)
    with np.errstate(all="ignore"):
        return _log_density(_clamp(np.asarray(y, dtype=float)), eta1, delta, alpha, shift,
                            spec.kernel, spec.link)


class _Override:
    # duck-typed stand-in for a ModelSpec with swapped designs, no validation
    def __init__(self, spec, X, Z):
        self.__dict__.update(variant=spec.variant, q=spec.q, kernel=spec.kernel, link=spec.link,
                             X=spec.X if X is None else X, Z=spec.Z if Z is None else Z)
        self.n, self.p, self.r, self.has_alpha = spec.n, spec.p, spec.r, spec.has_alpha


class _Objective:
    """Negative log-likelihood bound to (spec, y) with Q(y) and log|Q'(y)| cached."""

    def __init__(self, spec: ModelSpec, y):
        self.spec = spec
        yc = _clamp(check_response(y))
        if yc.size != spec.n:
            raise ValueError(f"response has {yc.size} rows, design has {spec.n}")
        self.Qy = spec.link._forward(yc)
        self.logjac = float(np.sum(spec.link._log_deriv(yc)))
        self.nevals = 0

    def __call__(self, theta) -> float:
        self.nevals += 1
        spec = self.spec
        eta1, delta, alpha, shift = unpack(theta, spec)
        with np.errstate(all="ignore"):
            t = delta * (self.Qy - eta1) + shift
            ll = np.sum(np.log(delta)) + spec.n * np.log(alpha) + np.sum(spec.kernel.logpdf(t))
            if alpha != 1.0:
                ll += (alpha - 1.0) * np.sum(spec.kernel.logcdf(t))
        val = -(ll + self.logjac)
        return float(val) if np.isfinite(val) else np.inf

    def gradient(self, theta) -> np.ndarray:
        return fd_gradient(self, theta)


def neg_loglik(theta, spec: ModelSpec, y) -> float:
    """Negative log-likelihood; +inf outside the valid parameter region."""
    return _Objective(spec, y)(_flat(theta))


def neg_loglik1(theta, spec: ModelSpec, y) -> float:
    if spec.variant != "rpgjsb1":
        raise ValueError("neg_loglik1 needs an RPGJSB1 model")
    return neg_loglik(theta, spec, y)


def neg_loglik2(theta, spec: ModelSpec, y) -> float:
    if spec.variant != "rpgjsb2":
        raise ValueError("neg_loglik2 needs an RPGJSB2 model")
    return neg_loglik(theta, spec, y)


def score(theta, spec: ModelSpec, y) -> np.ndarray:
    """Finite-difference gradient of the negative log-likelihood."""
    return _Objective(spec, y).gradient(_flat(theta))


def observed_information(theta_hat, spec: ModelSpec, y) -> np.ndarray:
    """Hessian of the negative log-likelihood at ``theta_hat``."""
    H = fd_hessian(_Objective(spec, y), _flat(theta_hat))
    if not np.all(np.isfinite(H)):
        raise FloatingPointError("observed information has non-finite entries")
    return H


def is_positive_definite(H, rel_tol: float = 1e-8) -> bool:
    if not np.all(np.isfinite(H)):
        return False
    ev = np.linalg.eigvalsh(H)
    return bool(ev[-1] > 0 and ev[0] > rel_tol * ev[-1])


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitOptions:
    max_restarts: int = 100
    seed: int = 0
    maxiter: int = 500
    gtol: float = 1e-6
    start: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class FitResult:
    theta_hat: ParamVector
    theta: np.ndarray
    names: list
    loglik: float
    observed_info: np.ndarray
    vcov: np.ndarray
    se: np.ndarray
    aic: float
    bic: float
    converged: bool
    restarts_used: int
    zero_init_converged: bool
    fitted_quantile: np.ndarray
    fitted_delta: np.ndarray
    n: int
    variant: str
    q: float
    alpha: float
    message: str = ""
    attempts: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.theta.size


def information_criteria(loglik: float, dim: int, n: float) -> tuple[float, float]:
    return -2.0 * loglik + 2.0 * dim, -2.0 * loglik + np.log(n) * dim


def aic_bic(fit: FitResult) -> tuple[float, float]:
    return information_criteria(fit.loglik, fit.dim, fit.n)


def _run_bfgs(obj: _Objective, start, options: FitOptions):
    """One BFGS run; ``ok`` is the optimizer-level convergence verdict.

    Converged means: stopped before ``maxiter`` at a finite point where either
    the gradient sup-norm is below ``1e-6 * (1 + |f|)`` or the last iteration
    decreased ``f`` by less than ``1e-10`` relative.
    """
    trace = [obj(start)]

    def record(intermediate_result):
        trace.append(float(intermediate_result.fun))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(obj, start, jac=obj.gradient, method="BFGS", callback=record,
                                options={"gtol": options.gtol, "maxiter": options.maxiter})
    f = float(res.fun)
    ok = bool(np.isfinite(f) and np.all(np.isfinite(res.x)) and res.nit < options.maxiter)
    if ok:
        g = obj.gradient(res.x)
        small_grad = bool(np.all(np.isfinite(g)) and np.max(np.abs(g)) < 1e-6 * (1.0 + abs(f)))
        stalled = len(trace) > 1 and abs(trace[-2] - trace[-1]) <= 1e-10 * max(abs(trace[-1]), 1e-300)
        ok = small_grad or stalled
    return res, f, ok


def fit(spec: ModelSpec, y, options: Optional[FitOptions] = None) -> FitResult:
    """Maximum-likelihood fit with BFGS from zeros and random restarts.

    A solution is accepted when BFGS stops at a point satisfying the
    first-order condition and the observed information there is positive
    definite.  Otherwise BFGS is rerun from i.i.d. standard normal starts,
    up to ``options.max_restarts`` times.
    """
    options = options or FitOptions()
    obj = _Objective(spec, y)
    rng = np.random.default_rng(options.seed)
    start = np.zeros(spec.dim) if options.start is None else np.asarray(options.start, dtype=float)
    best = None
    attempts = []
    accepted = None
    for attempt in range(options.max_restarts + 1):
        if attempt:
            start = rng.standard_normal(spec.dim)
        res, f, ok = _run_bfgs(obj, start, options)
        H = None
        if ok:
            try:
                H = observed_information(res.x, spec, y)
                ok = is_positive_definite(H)
            except FloatingPointError:
                ok = False
        attempts.append({"attempt": attempt, "nll": f, "accepted": ok, "nit": int(res.nit)})
        if ok:
            accepted = (res, f, H, attempt)
            break
        if np.isfinite(f) and (best is None or f < best[1]):
            best = (res, f, H, attempt)
    if accepted is None and best is None:
        best = (res, f, None, options.max_restarts)
    res, f, H, attempt = accepted if accepted is not None else best
    converged = accepted is not None
    return _make_result(spec, y, res.x, f, H, converged, attempt, attempts)


def _make_result(spec, y, theta, nll, H, converged, restarts, attempts) -> FitResult:
    theta = np.asarray(theta, dtype=float)
    if H is None:
        try:
            H = observed_information(theta, spec, y)
        except FloatingPointError:
            H = np.full((spec.dim, spec.dim), np.nan)
    try:
        vcov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        vcov = np.full_like(H, np.nan)
    with np.errstate(invalid="ignore"):
        se = np.sqrt(np.diag(vcov))
    eta1, delta, alpha, _ = unpack(theta, spec)
    loglik = -nll
    aic, bic = information_criteria(loglik, spec.dim, spec.n)
    msg = "converged" if converged else "no accepted solution after all restarts"
    return FitResult(
        theta_hat=ParamVector.from_flat(theta, spec), theta=theta, names=spec.param_names,
        loglik=loglik, observed_info=H, vcov=vcov, se=se, aic=aic, bic=bic,
        converged=converged, restarts_used=restarts,
        zero_init_converged=bool(converged and restarts == 0),
        fitted_quantile=spec.link.inverse(eta1), fitted_delta=delta, n=spec.n,
        variant=spec.variant, q=spec.q, alpha=float(alpha), message=msg, attempts=attempts,
    )


# ---------------------------------------------------------------------------
# Inference and prediction
# ---------------------------------------------------------------------------


def wald_table(fit: FitResult) -> pd.DataFrame:
    """Estimate, standard error, z statistic and normal-tail p-values.

    Both the two-sided ``2 * (1 - Phi(|t|))`` and one-sided ``1 - Phi(|t|)``
    p-values are reported.
    """
    est = np.asarray(fit.theta, dtype=float)
    se = np.asarray(fit.se, dtype=float)
    return wald_from_arrays(est, se, fit.names)


def wald_from_arrays(estimate, se, names=None) -> pd.DataFrame:
    estimate = np.atleast_1d(np.asarray(estimate, dtype=float))
    se = np.atleast_1d(np.asarray(se, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(estimate == 0.0, 0.0, estimate / se)
    one = stats.norm.sf(np.abs(t))
    names = list(names) if names is not None else [f"theta{j}" for j in range(estimate.size)]
    return pd.DataFrame({"estimate": estimate, "se": se, "t_value": t,
                         "p_one_sided": one, "p_two_sided": np.minimum(1.0, 2.0 * one)},
                        index=pd.Index(names, name="parameter"))


def predict_quantile(fit: FitResult, spec: ModelSpec, new_x, p_levels, new_z=None) -> np.ndarray:
    """Conditional quantiles, one row per covariate row and one column per level."""
    p_levels = np.atleast_1d(np.asarray(p_levels, dtype=float))
    if np.any(~((p_levels > 0) & (p_levels < 1))):
        raise ValueError("quantile levels must lie in (0, 1)")
    new_x = _as_design(new_x)
    if new_x.shape[1] != spec.p:
        raise ValueError(f"new_x needs {spec.p} columns")
    m = new_x.shape[0]
    if spec.r == 0:
        new_z = np.ones((m, 0))
    elif new_z is None:
        raise ValueError("new_z is required when the scale submodel has covariates")
    new_z = _as_design(new_z, m)
    if new_z.shape[1] != spec.r:
        raise ValueError(f"new_z needs {spec.r} columns")
    th = ParamVector.from_flat(fit.theta, spec)
    eta1 = new_x @ th.beta
    delta = np.exp(new_z @ th.nu) if spec.r else np.ones(m)
    if spec.has_alpha:
        alpha = float(np.exp(th.log_alpha))
        shift = xstar(spec.kernel, spec.q, alpha)
    else:
        alpha, shift = alpha_of_q(spec.q), 0.0
    out = _quantile(p_levels[None, :], eta1[:, None], delta[:, None], alpha, shift, spec.kernel, spec.link)
    at_q = np.isclose(p_levels, spec.q, rtol=0, atol=0)
    if at_q.any():
        out[:, at_q] = spec.link.inverse(eta1)[:, None]
    return out


def quantile_scan(spec_template: ModelSpec, y, q_grid, variants=VARIANTS,
                  options: Optional[FitOptions] = None) -> pd.DataFrame:
    """One fit per (variant, q); failures are recorded and the scan continues."""
    q_grid = np.asarray(q_grid, dtype=float)
    if np.any(~((q_grid > 0) & (q_grid < 1))):
        raise ValueError("q grid must lie in (0, 1)")
    rows = []
    for q in np.sort(q_grid):
        for variant in variants:
            row = {"q": float(q), "variant": variant}
            try:
                res = fit(spec_template.with_q(q, variant), y, options)
                row.update(loglik=res.loglik, dim=res.dim, aic=res.aic, bic=res.bic,
                           converged=res.converged, error="")
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                log.warning("scan cell q=%s %s failed: %s", q, variant, exc)
                row.update(loglik=np.nan, dim=np.nan, aic=np.nan, bic=np.nan,
                           converged=False, error=str(exc))
            rows.append(row)
    return pd.DataFrame(rows)

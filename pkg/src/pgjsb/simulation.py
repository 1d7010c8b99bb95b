"""Monte-Carlo recovery studies: bias, SE1, SE2, coverage and convergence rates."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from .distribution import _quantile, alpha_of_q, xstar
from .kernel import as_kernel, as_link
from .regression import FitOptions, ModelSpec, fit

Z975 = 1.959964
COVARIATE_RANGE = (-5.478, -2.305)

# Table of true values: (kernel, link, q) -> (beta0, beta1, nu0, nu1, log_alpha)
_TRUTHS = {
    ("logistic", "logit", 0.1): (4.9, 2.6, 2.2, 0.4, -0.7),
    ("logistic", "logit", 0.5): (4.8, 2.1, 2.2, 0.4, -0.7),
    ("logistic", "logit", 0.9): (4.7, 1.8, 2.2, 0.4, -0.7),
    ("normal", "logit", 0.1): (4.4, 2.4, 1.5, 0.3, -1.4),
    ("normal", "logit", 0.5): (4.6, 2.1, 1.5, 0.3, -1.4),
    ("normal", "logit", 0.9): (4.8, 1.9, 1.5, 0.3, -1.4),
    ("logistic", "loglog", 0.1): (1.3, 0.8, 0.8, -0.3, 0.1),
    ("logistic", "loglog", 0.5): (2.1, 0.9, 1.0, -0.2, 0.1),
    ("logistic", "loglog", 0.9): (2.8, 1.0, 1.1, -0.2, 0.1),
    ("normal", "loglog", 0.1): (1.2, 0.7, -0.1, -0.3, 1.1),
    ("normal", "loglog", 0.5): (2.0, 0.9, 0.0, -0.3, 1.0),
    ("normal", "loglog", 0.9): (2.8, 1.0, 0.1, -0.2, 1.0),
}
PARAM_NAMES = ("beta0", "beta1", "nu0", "nu1", "log_alpha")
DEFAULT_SAMPLE_SIZES = (100, 200, 500)


def default_truths() -> pd.DataFrame:
    """The twelve true-value rows (2 kernels x 2 links x 3 quantiles)."""
    rows = [dict(kernel=k, link=l, q=q, **dict(zip(PARAM_NAMES, v))) for (k, l, q), v in _TRUTHS.items()]
    return pd.DataFrame(rows)


def truth_for(kernel: str, link: str, q: float) -> np.ndarray:
    try:
        return np.array(_TRUTHS[(kernel, link, round(float(q), 10))], dtype=float)
    except KeyError:
        raise KeyError(f"no default truth for cell ({kernel}, {link}, {q})") from None


def worker_count(requested: Optional[int] = None) -> int:
    if requested:
        return max(1, int(requested))
    env = os.environ.get("PGJSB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class StudyConfig:
    kernel: str
    link: str
    q: float
    n: int
    replicates: int = 1000
    variant: str = "rpgjsb1"
    truth: Optional[tuple] = None
    covariate_law: tuple = COVARIATE_RANGE
    seed: int = 20201103
    parallel_workers: Optional[int] = None
    max_restarts: int = 100

    def __post_init__(self):
        as_kernel(self.kernel), as_link(self.link)
        lo, hi = self.covariate_law
        if not lo < hi:
            raise ValueError("covariate law needs lo < hi")
        if self.replicates < 1 or self.n < 5:
            raise ValueError("need replicates >= 1 and n >= 5")
        truth = self.truth if self.truth is not None else truth_for(self.kernel, self.link, self.q)
        truth = tuple(float(v) for v in truth)
        want = 5 if self.variant == "rpgjsb1" else 4
        if self.variant == "rpgjsb2" and len(truth) == 5:
            truth = truth[:4]
        if len(truth) != want:
            raise ValueError(f"truth needs {want} entries for {self.variant}")
        object.__setattr__(self, "truth", truth)

    @property
    def param_names(self) -> tuple:
        return PARAM_NAMES if self.variant == "rpgjsb1" else PARAM_NAMES[:4]


def simulate_dataset(config: StudyConfig, replicate_index: int):
    """Covariates and responses for one replicate, deterministic in (seed, index)."""
    rng = np.random.default_rng([config.seed, replicate_index])
    lo, hi = config.covariate_law
    x = rng.uniform(lo, hi, size=config.n)
    X = np.column_stack([np.ones(config.n), x])
    Z = X.copy()
    truth = np.asarray(config.truth)
    kernel, link = as_kernel(config.kernel), as_link(config.link)
    eta1 = X @ truth[:2]
    delta = np.exp(Z @ truth[2:4])
    if config.variant == "rpgjsb1":
        alpha = float(np.exp(truth[4]))
        shift = xstar(kernel, config.q, alpha)
    else:
        alpha, shift = alpha_of_q(config.q), 0.0
    u = rng.uniform(size=config.n)
    u = np.where(u > 0.0, u, np.nextafter(0.0, 1.0))
    y = _quantile(u, eta1, delta, alpha, shift, kernel, link)
    y = np.clip(y, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return X, Z, y


def _replicate(args):
    config, i = args
    X, Z, y = simulate_dataset(config, i)
    spec = ModelSpec(config.variant, config.q, config.kernel, config.link, X, Z)
    res = fit(spec, y, FitOptions(max_restarts=config.max_restarts, seed=config.seed + i))
    return res.theta, res.se, res.converged, res.zero_init_converged, res.restarts_used


@dataclass(frozen=True, eq=False)
class StudyReport:
    config: StudyConfig
    table: pd.DataFrame
    convergence_from_zero_rate: float
    replicates_used: int
    replicates_failed: int
    se1_missing: bool
    estimates: np.ndarray = field(repr=False)
    std_errors: np.ndarray = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        """Long layout: G, link, q, n, parameter, bias, SE1, SE2, CP."""
        c = self.config
        out = self.table.reset_index()
        out.insert(0, "n", c.n)
        out.insert(0, "q", c.q)
        out.insert(0, "link", c.link)
        out.insert(0, "G", c.kernel)
        out["conv_zero_pct"] = 100.0 * self.convergence_from_zero_rate
        return out


def run_study(config: StudyConfig) -> StudyReport:
    """Fit every replicate and aggregate bias / SE1 / SE2 / CP.

    Replicates with no accepted fit are excluded from the moments and
    counted in ``replicates_failed``.
    """
    jobs = [(config, i) for i in range(config.replicates)]
    workers = min(worker_count(config.parallel_workers), config.replicates)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_replicate(j) for j in jobs]
    return summarize(config, results)


def summarize(config: StudyConfig, results) -> StudyReport:
    truth = np.asarray(config.truth)
    conv = np.array([r[2] for r in results], dtype=bool)
    zero = np.array([r[3] for r in results], dtype=bool)
    est = np.array([r[0] for r in results])[conv]
    se = np.array([r[1] for r in results])[conv]
    used = int(conv.sum())
    bias = est.mean(axis=0) - truth if used else np.full(truth.size, np.nan)
    se1 = est.std(axis=0, ddof=1) if used >= 2 else np.full(truth.size, np.nan)
    se2 = se.mean(axis=0) if used else np.full(truth.size, np.nan)
    cp = (np.abs(est - truth) <= Z975 * se).mean(axis=0) if used else np.full(truth.size, np.nan)
    table = pd.DataFrame({"truth": truth, "bias": bias, "SE1": se1, "SE2": se2, "CP": cp},
                         index=pd.Index(config.param_names, name="parameter"))
    return StudyReport(config, table, float(zero.mean()), used, len(results) - used,
                       used < 2, est, se)


def default_cells(sample_sizes=DEFAULT_SAMPLE_SIZES, replicates: int = 1000, **kw) -> list:
    return [StudyConfig(k, l, q, n, replicates=replicates, **kw)
            for (k, l, q) in _TRUTHS for n in sample_sizes]


def with_n(config: StudyConfig, n: int) -> StudyConfig:
    return replace(config, n=n)

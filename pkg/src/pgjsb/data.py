"""CSV ingestion, design-matrix construction and the bundled synthetic dataset."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .distribution import _quantile, xstar
from .kernel import KernelFamily, LinkTransform


class DataError(ValueError):
    """Invalid input data or column reference."""


@dataclass(frozen=True)
class Term:
    """One raw covariate column: numeric, or categorical with its level order."""

    column: str
    levels: Optional[tuple] = None

    @property
    def names(self) -> list[str]:
        if self.levels is None:
            return [self.column]
        return [f"{self.column}[{lv}]" for lv in self.levels[1:]]

    def encode(self, values) -> np.ndarray:
        values = pd.Series(values)
        if self.levels is None:
            return values.astype(float).to_numpy()[:, None]
        unknown = set(values.astype(str)) - set(self.levels)
        if unknown:
            raise DataError(f"unknown level(s) {sorted(unknown)} for column {self.column!r}")
        v = values.astype(str).to_numpy()
        return np.column_stack([(v == lv).astype(float) for lv in self.levels[1:]]) if len(self.levels) > 1 \
            else np.zeros((len(v), 0))


@dataclass(frozen=True)
class Design:
    """Intercept plus encoded terms; rebuilds rows for new covariate values."""

    terms: tuple

    @property
    def names(self) -> list[str]:
        out = ["(Intercept)"]
        for t in self.terms:
            out.extend(t.names)
        return out

    def matrix(self, frame: pd.DataFrame) -> np.ndarray:
        cols = [np.ones((len(frame), 1))]
        cols += [t.encode(frame[t.column]) for t in self.terms]
        return np.hstack(cols)


def _is_numeric(s: pd.Series) -> bool:
    return pd.api.types.is_numeric_dtype(s) and not pd.api.types.is_bool_dtype(s)


def build_design(frame: pd.DataFrame, columns: Sequence[str]) -> Design:
    """Numeric columns enter as-is; others become dummies, first-seen level as reference."""
    terms = []
    for c in columns:
        if c not in frame.columns:
            raise DataError(f"unknown column {c!r}; available: {list(frame.columns)}")
        s = frame[c]
        if _is_numeric(s):
            terms.append(Term(c))
        else:
            terms.append(Term(c, tuple(pd.unique(s.astype(str)))))
    return Design(tuple(terms))


@dataclass(frozen=True, eq=False)
class Dataset:
    frame: pd.DataFrame
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_design: Design
    z_design: Design


def load_dataset(path, response: str, quantile_covariates: Sequence[str] = (),
                 scale_covariates: Sequence[str] = ()) -> Dataset:
    """Read a CSV and build (y, X, Z); X and Z always carry an intercept.

    Rows with missing values in any used column and responses outside the
    open unit interval are rejected; the message names the offending rows
    (1-based data rows, header excluded).
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    return dataset_from_frame(frame, response, quantile_covariates, scale_covariates)


def dataset_from_frame(frame: pd.DataFrame, response: str, quantile_covariates=(),
                       scale_covariates=()) -> Dataset:
    used = [response, *quantile_covariates, *scale_covariates]
    for c in used:
        if c not in frame.columns:
            raise DataError(f"unknown column {c!r}; available: {list(frame.columns)}")
    missing = frame[list(dict.fromkeys(used))].isna().any(axis=1).to_numpy()
    if missing.any():
        rows = (np.flatnonzero(missing) + 1).tolist()
        raise DataError(f"missing values in row(s) {rows[:20]}")
    try:
        y = frame[response].astype(float).to_numpy()
    except (TypeError, ValueError):
        raise DataError(f"response column {response!r} is not numeric") from None
    bad = ~((y > 0.0) & (y < 1.0))
    if bad.any():
        rows = (np.flatnonzero(bad) + 1).tolist()
        raise DataError(f"response {response!r} must lie strictly inside (0, 1); bad row(s) {rows[:20]}")
    xd = build_design(frame, quantile_covariates)
    zd = build_design(frame, scale_covariates)
    return Dataset(frame, y, xd.matrix(frame), zd.matrix(frame), xd, zd)


# ---------------------------------------------------------------------------
# Bundled synthetic COVID-like dataset
# ---------------------------------------------------------------------------

SYNTHETIC_SEED = 20201103
# Generating values: logistic kernel, cloglog link, q = 0.5, RPGJSB1.
SYNTHETIC_TRUTH = {
    "beta": (-5.6835, 0.1290, 0.4749, 0.1886),
    "nu": (0.9060, 0.4294, 0.2264),
    "log_alpha": 0.1164,
}
CONTINENTS = ("AfricaAsiaOceania", "America", "Europe")
CONTINENT_COUNTS = (56, 28, 39)


def make_synthetic_covid(seed: int = SYNTHETIC_SEED) -> pd.DataFrame:
    """123-row synthetic dataset with the schema of the mortality example.

    Not real data: covariates are random and ``mort`` is drawn from the
    RPGJSB1 model (logistic kernel, cloglog link, q = 0.5) at fixed values.
    """
    rng = np.random.default_rng(seed)
    # one row per continent first, so first-seen level order matches CONTINENTS
    rest = np.repeat(CONTINENTS, np.array(CONTINENT_COUNTS) - 1)
    cont = np.concatenate([np.array(CONTINENTS), rng.permutation(rest)])
    n = cont.size
    log_surface = np.clip(rng.normal(12.0, 2.2, size=n), 5.5, 17.0)
    america = (cont == "America").astype(float)
    europe = (cont == "Europe").astype(float)
    X = np.column_stack([np.ones(n), log_surface, america, europe])
    Z = np.column_stack([np.ones(n), america, europe])
    kernel, link = KernelFamily("logistic"), LinkTransform("cloglog")
    alpha = float(np.exp(SYNTHETIC_TRUTH["log_alpha"]))
    eta1 = X @ np.array(SYNTHETIC_TRUTH["beta"])
    delta = np.exp(Z @ np.array(SYNTHETIC_TRUTH["nu"]))
    u = rng.uniform(size=n)
    mort = _quantile(u, eta1, delta, alpha, xstar(kernel, 0.5, alpha), kernel, link)
    return pd.DataFrame({
        "country": [f"C{i + 1:03d}" for i in range(n)],
        "mort": np.round(mort, 8),
        "surface": np.round(np.exp(log_surface)).astype(int),
        "log_surface": np.round(log_surface, 6),
        "cont": cont,
    })


def synthetic_covid_path() -> Path:
    return Path(str(resources.files("pgjsb") / "data" / "covid_synthetic.csv"))

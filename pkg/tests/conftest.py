import numpy as np
import pytest

from pgjsb.regression import FitOptions, ModelSpec, fit
from pgjsb.simulation import StudyConfig, simulate_dataset


def simulated_fit(kernel="logistic", link="logit", q=0.5, n=200, seed=1, variant="rpgjsb1", index=0):
    """Fit to one replicate simulated at the default truth for the cell."""
    cfg = StudyConfig(kernel, link, q, n, replicates=1, variant=variant, seed=seed)
    X, Z, y = simulate_dataset(cfg, index)
    spec = ModelSpec(variant, q, kernel, link, X, Z)
    return spec, y, fit(spec, y, FitOptions(max_restarts=20, seed=seed))


@pytest.fixture(scope="session")
def logistic_fit():
    return simulated_fit()


@pytest.fixture(scope="session")
def normal_fit_rpgjsb2():
    return simulated_fit(kernel="normal", variant="rpgjsb2", q=0.5, n=150, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def planted_outlier_fit(index, n=100, seed=2024, level=0.999, max_restarts=20):
    """Logistic/logit q=0.5 replicate whose first response sits at its conditional ``level`` quantile."""
    from pgjsb.distribution import _quantile, xstar
    from pgjsb.kernel import as_kernel, as_link

    cfg = StudyConfig("logistic", "logit", 0.5, n, replicates=1, seed=seed)
    X, Z, y = simulate_dataset(cfg, index)
    truth = np.asarray(cfg.truth)
    kernel, link = as_kernel("logistic"), as_link("logit")
    alpha = float(np.exp(truth[4]))
    y = y.copy()
    y[0] = _quantile(np.array([level]), X[:1] @ truth[:2], np.exp(Z[:1] @ truth[2:4]), alpha,
                     xstar(kernel, 0.5, alpha), kernel, link)[0]
    spec = ModelSpec("rpgjsb1", 0.5, "logistic", "logit", X, Z)
    return spec, y, fit(spec, y, FitOptions(max_restarts=max_restarts, seed=index))


# One line per acceptance criterion, filled in by tests/test_acceptance.py.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)

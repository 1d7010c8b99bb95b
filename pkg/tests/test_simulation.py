import numpy as np
import pytest

from pgjsb.distribution import _log_cdf, xstar
from pgjsb.kernel import as_kernel, as_link
from pgjsb.simulation import (
    COVARIATE_RANGE,
    StudyConfig,
    default_truths,
    default_cells,
    run_study,
    simulate_dataset,
    summarize,
    truth_for,
    worker_count,
)


def test_default_truth_table():
    t = default_truths()
    assert len(t) == 12
    assert set(t["kernel"]) == {"logistic", "normal"} and set(t["link"]) == {"logit", "loglog"}
    assert tuple(truth_for("logistic", "logit", 0.1)) == (4.9, 2.6, 2.2, 0.4, -0.7)
    assert tuple(truth_for("normal", "loglog", 0.9)) == (2.8, 1.0, 0.1, -0.2, 1.0)
    assert tuple(truth_for("normal", "logit", 0.5)) == (4.6, 2.1, 1.5, 0.3, -1.4)
    with pytest.raises(KeyError):
        truth_for("cauchy", "logit", 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig("logistic", "logit", 0.5, 100, covariate_law=(1.0, 1.0))
    with pytest.raises(ValueError):
        StudyConfig("logistic", "logit", 0.5, 100, replicates=0)
    with pytest.raises(ValueError):
        StudyConfig("logistic", "logit", 0.5, 100, truth=(1.0, 2.0))
    c = StudyConfig("logistic", "logit", 0.5, 100, variant="rpgjsb2")
    assert c.truth == (4.8, 2.1, 2.2, 0.4) and len(c.param_names) == 4
    assert len(default_cells(replicates=3)) == 36


def test_simulated_dataset_support_and_design():
    cfg = StudyConfig("normal", "loglog", 0.9, 2000, replicates=1)
    X, Z, y = simulate_dataset(cfg, 0)
    assert np.all((y > 0) & (y < 1))
    assert np.array_equal(X, Z) and np.all(X[:, 0] == 1.0)
    lo, hi = COVARIATE_RANGE
    assert X[:, 1].min() >= lo and X[:, 1].max() <= hi


@pytest.mark.parametrize("variant", ["rpgjsb1", "rpgjsb2"])
def test_simulated_responses_are_anchored(variant):
    cfg = StudyConfig("logistic", "logit", 0.5, 10_000, replicates=1, variant=variant)
    X, Z, y = simulate_dataset(cfg, 0)
    psi = 1.0 / (1.0 + np.exp(-X @ np.asarray(cfg.truth[:2])))
    assert abs(np.mean(y < psi) - 0.5) < 0.05


def test_simulated_responses_follow_the_model():
    from scipy import stats
    cfg = StudyConfig("normal", "loglog", 0.1, 3000, replicates=1)
    X, Z, y = simulate_dataset(cfg, 4)
    truth = np.asarray(cfg.truth)
    kernel, link = as_kernel("normal"), as_link("loglog")
    alpha = float(np.exp(truth[4]))
    u = np.exp(_log_cdf(y, X @ truth[:2], np.exp(Z @ truth[2:4]), alpha, xstar(kernel, 0.1, alpha), kernel, link))
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_dataset_determinism():
    cfg = StudyConfig("logistic", "logit", 0.5, 50, replicates=1, seed=3)
    a, b = simulate_dataset(cfg, 7), simulate_dataset(cfg, 7)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)
    assert not np.array_equal(a[2], simulate_dataset(cfg, 8)[2])


def test_single_replicate_flags_missing_se1():
    rep = run_study(StudyConfig("logistic", "logit", 0.5, 100, replicates=1, parallel_workers=1))
    assert rep.se1_missing
    assert rep.table["SE1"].isna().all()
    assert (rep.table["SE2"] > 0).all()


def test_failed_replicates_are_excluded():
    cfg = StudyConfig("logistic", "logit", 0.5, 100, replicates=3)
    truth = np.asarray(cfg.truth)
    results = [(truth + 0.1, np.full(5, 0.2), True, True, 0),
               (truth - 0.1, np.full(5, 0.2), True, False, 2),
               (np.zeros(5), np.full(5, np.nan), False, False, 100)]
    rep = summarize(cfg, results)
    assert rep.replicates_used == 2 and rep.replicates_failed == 1
    assert np.allclose(rep.table["bias"], 0.0)
    assert np.allclose(rep.table["SE2"], 0.2)
    assert np.allclose(rep.table["CP"], 1.0)
    assert rep.convergence_from_zero_rate == pytest.approx(1 / 3)


def test_study_is_deterministic_and_order_free():
    cfg = StudyConfig("logistic", "logit", 0.5, 80, replicates=6, seed=5, parallel_workers=1, max_restarts=5)
    a = run_study(cfg)
    b = run_study(StudyConfig(**{**cfg.__dict__, "parallel_workers": 2}))
    assert a.table.equals(b.table)
    assert np.array_equal(a.estimates, b.estimates)
    frame = a.to_frame()
    assert list(frame.columns[:9]) == ["G", "link", "q", "n", "parameter", "truth", "bias", "SE1", "SE2"]


def test_worker_count(monkeypatch):
    monkeypatch.setenv("PGJSB_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2


@pytest.fixture(scope="module")
def logistic_studies():
    kw = dict(replicates=500, seed=11, parallel_workers=1, max_restarts=20)
    return {n: run_study(StudyConfig("logistic", "logit", 0.5, n, **kw)) for n in (100, 500)}


@pytest.mark.slow
def test_bias_shrinks_with_n(logistic_studies):
    small, large = logistic_studies[100].table, logistic_studies[500].table
    assert np.all(large["bias"].abs() <= small["bias"].abs() + 0.005)


@pytest.mark.slow
def test_standard_error_agreement(logistic_studies):
    # With 500 replicates the Monte-Carlo sd of SE1 is about SE1 / sqrt(1000),
    # so the gap is checked against that noise level rather than ranked across n.
    for rep in logistic_studies.values():
        t = rep.table
        gap = (t["SE1"] - t["SE2"]).abs() / t["SE1"]
        assert np.all(gap < 3.0 / np.sqrt(2 * (rep.replicates_used - 1)))
        assert rep.convergence_from_zero_rate >= 0.995


@pytest.mark.slow
@pytest.mark.parametrize("q", [0.1, 0.9])
def test_coverage_at_n500(q):
    rep = run_study(StudyConfig("logistic", "logit", q, 500, replicates=500, seed=13, parallel_workers=1,
                                max_restarts=20))
    # three binomial standard deviations around the nominal level
    half = 3.0 * np.sqrt(0.95 * 0.05 / rep.replicates_used)
    cp = rep.table["CP"].iloc[:4]
    assert np.all(np.abs(cp - 0.95) <= half), cp

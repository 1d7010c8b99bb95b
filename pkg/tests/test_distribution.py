import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import normal_cdf, normal_ppf, total_mass
from pgjsb.distribution import (
    Rpgjsb1Params,
    Rpgjsb2Params,
    alpha_of_q,
    cdf1,
    cdf2,
    isf1,
    isf2,
    log_pdf1,
    log_pdf1_complement,
    log_pdf2,
    log_pdf2_complement,
    pdf1,
    pdf2,
    quantile1,
    quantile1_complement,
    quantile2,
    quantile2_complement,
    sample1,
    sample2,
    sf1_complement,
    sf2_complement,
    xstar,
)
from pgjsb.kernel import KERNELS, LINKS


def mass1(P):
    return total_mass(lambda y: log_pdf1(y, P), lambda y: cdf1(y, P),
                      lambda c: log_pdf1_complement(c, P), lambda c: sf1_complement(c, P),
                      lambda p: quantile1(p, P), lambda p: quantile1_complement(p, P))


def mass2(P):
    return total_mass(lambda y: log_pdf2(y, P), lambda y: cdf2(y, P),
                      lambda c: log_pdf2_complement(c, P), lambda c: sf2_complement(c, P),
                      lambda p: quantile2(p, P), lambda p: quantile2_complement(p, P))


# --- anchoring helpers -----------------------------------------------------


def test_xstar_values():
    assert xstar("normal", 0.5, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert xstar("logistic", 0.25, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert xstar("normal", 0.5, 2.0) == pytest.approx(normal_ppf(math.sqrt(0.5)), abs=1e-12)
    assert xstar("normal", 0.5, 2.0) == pytest.approx(0.5449521, abs=1e-7)


@settings(max_examples=300, deadline=None)
@given(kernel=st.sampled_from(KERNELS), q=st.floats(0.001, 0.999), alpha=st.floats(0.05, 20))
def test_xstar_anchors(kernel, q, alpha):
    from pgjsb.kernel import KernelFamily
    x = xstar(kernel, q, alpha)
    assert KernelFamily(kernel).cdf(x) ** alpha == pytest.approx(q, abs=1e-9)


def test_alpha_of_q_values():
    assert alpha_of_q(0.5) == 1.0
    assert alpha_of_q(0.25) == 2.0
    assert alpha_of_q(0.9) == pytest.approx(-math.log(0.9) / math.log(2.0), rel=1e-14)
    assert alpha_of_q(0.9) == pytest.approx(0.1520031, abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(q=st.floats(1e-6, 1 - 1e-6))
def test_alpha_of_q_inverts(q):
    a = alpha_of_q(q)
    assert a > 0
    assert 0.5 ** a == pytest.approx(q, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 2.0])
def test_domain_errors(bad):
    with pytest.raises(ValueError):
        alpha_of_q(bad)
    with pytest.raises(ValueError):
        xstar("normal", bad, 1.0)
    P = Rpgjsb1Params(0.5, 1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        pdf1(bad, P)
    with pytest.raises(ValueError):
        cdf1(bad, P)
    with pytest.raises(ValueError):
        quantile1(bad, P)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        Rpgjsb1Params(0.5, -1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        Rpgjsb1Params(0.5, 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        Rpgjsb1Params(1.0, 1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        Rpgjsb2Params(0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        xstar("normal", 0.5, 0.0)


# --- RPGJSB1 ---------------------------------------------------------------


def test_pdf1_point_values():
    P = Rpgjsb1Params(0.5, 1.0, 1.0, 0.5, "normal", "logit")
    assert pdf1(0.5, P) == pytest.approx(4.0 / math.sqrt(2.0 * math.pi), rel=1e-12)
    assert pdf1(0.5, P) == pytest.approx(1.5957691, abs=1e-7)
    U = Rpgjsb1Params(0.5, 1.0, 1.0, 0.5, "logistic", "logit")
    assert pdf1(0.5, U) == pytest.approx(1.0, rel=1e-14)
    y = np.linspace(0.01, 0.99, 50)
    # logistic kernel through the logit link at psi = 1/2, delta = alpha = 1 is uniform
    assert np.allclose(pdf1(y, U), 1.0, rtol=1e-12)
    assert np.allclose(cdf1(y, U), y, rtol=1e-12)
    assert quantile1(0.3, U) == pytest.approx(0.3, rel=1e-13)


def test_pdf1_matches_written_out_formula():
    # delta * alpha * G(t)^(alpha - 1) * g(t) / (y (1 - y)) with the logistic kernel
    psi, delta, alpha, q = 0.3, 1.7, 2.5, 0.2
    P = Rpgjsb1Params(psi, delta, alpha, q, "logistic", "logit")
    G = lambda t: 1.0 / (1.0 + math.exp(-t))
    xs = math.log(q ** (1 / alpha)) - math.log(1 - q ** (1 / alpha))
    for y in (0.05, 0.3, 0.61, 0.97):
        t = delta * (math.log(y / (1 - y)) - math.log(psi / (1 - psi))) + xs
        f = delta * alpha * G(t) ** (alpha - 1) * G(t) * (1 - G(t)) / (y * (1 - y))
        assert pdf1(y, P) == pytest.approx(f, rel=1e-12)
        assert cdf1(y, P) == pytest.approx(G(t) ** alpha, rel=1e-12)


def test_normal_kernel_reduces_to_power_johnson_sb():
    # F(y) = Phi(gamma + delta * logit(y))**alpha, gamma = Phi^-1(q^(1/alpha)) - delta * logit(psi)
    psi, delta, alpha, q = 0.42, 0.8, 0.6, 0.35
    P = Rpgjsb1Params(psi, delta, alpha, q, "normal", "logit")
    gamma = normal_ppf(q ** (1 / alpha)) - delta * math.log(psi / (1 - psi))
    assert P.gamma == pytest.approx(gamma, abs=1e-9)
    for y in np.linspace(0.02, 0.98, 13):
        z = gamma + delta * math.log(y / (1 - y))
        phi = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        dens = alpha * normal_cdf(z) ** (alpha - 1) * phi * delta / (y * (1 - y))
        assert cdf1(y, P) == pytest.approx(normal_cdf(z) ** alpha, rel=1e-9)
        assert pdf1(y, P) == pytest.approx(dens, rel=1e-9)


def test_pdf1_integrates_to_one_example():
    assert mass1(Rpgjsb1Params(0.4, 1.0, 0.5, 0.5, "normal", "logit")) == pytest.approx(1.0, abs=1e-6)


def test_cdf1_anchoring_examples():
    assert cdf1(0.4, Rpgjsb1Params(0.4, 2.0, 0.7, 0.25, "normal", "logit")) == pytest.approx(0.25, abs=1e-12)
    assert quantile1(0.25, Rpgjsb1Params(0.4, 2.0, 0.7, 0.25, "normal", "logit")) == pytest.approx(0.4, abs=1e-12)


params1 = st.builds(
    Rpgjsb1Params,
    psi=st.floats(0.01, 0.99),
    delta=st.floats(0.2, 5.0),
    alpha=st.floats(0.1, 8.0),
    q=st.floats(0.02, 0.98),
    kernel=st.sampled_from(KERNELS),
    link=st.sampled_from(LINKS),
)
params2 = st.builds(
    Rpgjsb2Params,
    xi=st.floats(0.01, 0.99),
    delta=st.floats(0.2, 5.0),
    q=st.floats(0.02, 0.98),
    kernel=st.sampled_from(KERNELS),
    link=st.sampled_from(LINKS),
)


@settings(max_examples=1000, deadline=None)
@given(P=params1)
def test_anchoring_rpgjsb1(P):
    assert cdf1(P.psi, P) == pytest.approx(P.q, abs=1e-9)


@settings(max_examples=1000, deadline=None)
@given(P=params2)
def test_anchoring_rpgjsb2(P):
    assert cdf2(P.xi, P) == pytest.approx(P.q, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(P=params1)
def test_inversion_both_directions(P):
    # for |xstar| near 1e9 the shift cancels against delta * Q(y) and t keeps
    # only about 1e-7 absolute accuracy, which is too coarse for a 1e-8 check
    assume(abs(P.shift) < 1e6)
    p = np.linspace(0.05, 0.95, 19)
    y = quantile1(p, P)
    c = quantile1_complement(p, P)
    # quantiles packed against 1 are checked through the complement pair
    upper = c < 0.5
    lower = ~upper & (y > 1e-300)
    assert np.allclose(cdf1(y[lower], P), p[lower], atol=1e-8, rtol=0)
    upper &= c > 1e-300
    assert np.allclose(sf1_complement(c[upper], P), 1 - p[upper], atol=1e-8, rtol=0)
    inner = (y > 1e-12) & (y < 1 - 1e-12)
    assert np.allclose(quantile1(cdf1(y[inner], P), P), y[inner], atol=1e-8, rtol=0)
    assert np.all((y > 0) & (y < 1))


@settings(max_examples=200, deadline=None)
@given(P=params1)
def test_cdf_monotone_and_quantile_monotone(P):
    y = np.linspace(0.001, 0.999, 400)
    assert np.all(np.diff(cdf1(y, P)) >= 0)
    assert np.all(np.diff(quantile1(np.linspace(0.01, 0.99, 50), P)) >= 0)


def test_round_trip_deciles():
    P = Rpgjsb1Params(0.3, 1.4, 2.2, 0.7, "cauchy", "cloglog")
    y = np.arange(1, 10) / 10
    assert np.allclose(quantile1(cdf1(y, P), P), y, atol=1e-10)
    assert quantile1(0.7, P) == pytest.approx(0.3, abs=1e-12)


@pytest.mark.parametrize("kernel,link", list(itertools.product(KERNELS, LINKS)))
def test_normalisation_grid(kernel, link):
    for alpha, delta in itertools.product((0.1, 1.0, 5.0), (0.5, 2.0)):
        P = Rpgjsb1Params(0.5, delta, alpha, 0.5, kernel, link)
        assert abs(mass1(P) - 1.0) < 1e-6


@pytest.mark.parametrize("kernel,link", list(itertools.product(KERNELS, LINKS)))
def test_log_pdf_finite_near_boundaries(kernel, link):
    y = np.concatenate([np.geomspace(1e-9, 0.5, 40), 1 - np.geomspace(1e-9, 0.5, 40)])
    for alpha, delta in itertools.product((0.1, 1.0, 5.0), (0.5, 2.0)):
        for psi in (0.1, 0.5, 0.9):
            lp = log_pdf1(y, Rpgjsb1Params(psi, delta, alpha, 0.5, kernel, link))
            assert not np.any(np.isnan(lp))
            assert np.all(lp > -np.inf) or kernel == "normal"


def test_extreme_tails_give_zero_density_not_nan():
    # normal kernel pushed through the cauchit link: t overflows towards -inf
    P = Rpgjsb1Params(0.5, 2.0, 0.1, 0.5, "normal", "cauchit")
    y = np.array([1e-300, 1e-200])
    assert np.all(pdf1(y, P) == 0.0)
    assert np.all(log_pdf1(y, P) == -np.inf)


def test_complement_forms_agree_with_direct():
    for kernel, link in itertools.product(KERNELS, LINKS):
        P = Rpgjsb1Params(0.6, 1.3, 0.8, 0.4, kernel, link)
        y = np.array([0.2, 0.5, 0.75, 0.9])
        assert np.allclose(log_pdf1_complement(1 - y, P), log_pdf1(y, P), rtol=1e-10, atol=1e-10)
        assert np.allclose(sf1_complement(1 - y, P), 1 - cdf1(y, P), rtol=1e-10, atol=1e-12)
        p = np.array([0.1, 0.5, 0.9])
        assert np.allclose(quantile1_complement(p, P), 1 - quantile1(p, P), rtol=1e-9, atol=1e-14)


def test_sample1_anchoring_and_calibration():
    P = Rpgjsb1Params(0.35, 1.5, 0.6, 0.3, "logistic", "loglog")
    n = 100_000
    y = sample1(P, n, rng_seed=7)
    assert np.all((y > 0) & (y < 1))
    frac = np.mean(y <= P.psi)
    assert abs(frac - 0.3) < 3 * math.sqrt(0.3 * 0.7 / n)
    u = cdf1(y[:10_000], P)
    assert stats.kstest(u, "uniform").statistic < 1.36 / math.sqrt(10_000)


def test_sampling_is_deterministic():
    P = Rpgjsb1Params(0.5, 1.0, 2.0, 0.5)
    assert np.array_equal(sample1(P, 50, 3), sample1(P, 50, 3))
    assert not np.array_equal(sample1(P, 50, 3), sample1(P, 50, 4))
    Q2 = Rpgjsb2Params(0.5, 1.0, 0.5)
    assert np.array_equal(sample2(Q2, 50, 3), sample2(Q2, 50, 3))
    with pytest.raises(ValueError):
        sample1(P, 0, 1)


# --- RPGJSB2 ---------------------------------------------------------------


def test_rpgjsb2_anchoring_and_identity():
    Q2 = Rpgjsb2Params(0.3, 0.8, 0.9, "logistic", "cloglog")
    assert cdf2(0.3, Q2) == pytest.approx(0.9, abs=1e-12)
    assert quantile2(0.9, Q2) == pytest.approx(0.3, abs=1e-12)
    assert mass2(Q2) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("kernel,link", list(itertools.product(KERNELS, LINKS)))
def test_rpgjsb2_median_equals_rpgjsb1_alpha_one(kernel, link):
    y = np.arange(1, 100) / 100
    a = pdf2(y, Rpgjsb2Params(0.37, 1.6, 0.5, kernel, link))
    b = pdf1(y, Rpgjsb1Params(0.37, 1.6, 1.0, 0.5, kernel, link))
    assert np.max(np.abs(a - b)) < 1e-10


def test_quantile2_closed_form():
    Q2 = Rpgjsb2Params(0.6, 1.2, 0.25, "normal", "probit")
    p = 0.8
    x = stats.norm.ppf(0.6) + stats.norm.ppf(p ** (1 / 2.0)) / 1.2
    assert quantile2(p, Q2) == pytest.approx(stats.norm.cdf(x), rel=1e-12)


def test_sample2_anchoring():
    Q2 = Rpgjsb2Params(0.2, 2.0, 0.75, "cauchy", "logit")
    y = sample2(Q2, 100_000, 11)
    assert abs(np.mean(y <= 0.2) - 0.75) < 3 * math.sqrt(0.75 * 0.25 / 100_000)


@settings(max_examples=300, deadline=None)
@given(P=params1)
def test_isf_inverts_the_survival_function(P):
    s = np.array([0.9, 0.5, 0.1, 1e-3, 1e-8, 1e-14])
    y = isf1(s, P)
    assert np.all(np.diff(y) >= 0)
    mid = (s >= 0.1) & (y > 1e-300) & (y < 1 - 1e-12)
    assert np.allclose(y[mid], quantile1(1 - s[mid], P), atol=1e-8, rtol=0)
    c = 1.0 - y
    # 1 - y only carries a few digits once c is tiny
    ok = (y > 1e-6) & (c > 1e-6)
    assert np.allclose(sf1_complement(c[ok], P), s[ok], rtol=1e-6, atol=0)


def test_isf2_median_symmetry():
    P = Rpgjsb2Params(0.3, 1.5, 0.5, "logistic", "logit")
    assert isf2(0.5, P) == pytest.approx(0.3, abs=1e-14)
    assert isf2(0.2, P) == pytest.approx(quantile2(0.8, P), abs=1e-14)
    with pytest.raises(ValueError):
        isf2(0.0, P)

"""Parametric quantile regression for responses on the unit interval.

Two reparameterisations of the power generalised Johnson S_B law are
provided: RPGJSB1 (free shape ``alpha``) and RPGJSB2 (``alpha`` tied to q).
"""

from .data import DataError, load_dataset, make_synthetic_covid, synthetic_covid_path
from .diagnostics import (
    case_deletion_rc,
    local_influence,
    normality_tests,
    perturbation_nabla,
    residual_report,
    rqr,
)
from .distribution import (
    Rpgjsb1Params,
    Rpgjsb2Params,
    alpha_of_q,
    cdf1,
    cdf2,
    isf1,
    isf2,
    log_pdf1,
    log_pdf2,
    pdf1,
    pdf2,
    quantile1,
    quantile2,
    sample1,
    sample2,
    xstar,
)
from .kernel import KernelFamily, LinkTransform, g_cdf, g_pdf, g_quantile, link_deriv, link_forward, link_inverse
from .regression import (
    FitOptions,
    FitResult,
    ModelSpec,
    fit,
    neg_loglik,
    neg_loglik1,
    neg_loglik2,
    observed_information,
    predict_quantile,
    quantile_scan,
    score,
    wald_table,
)
from .simulation import StudyConfig, StudyReport, run_study

__version__ = "0.1.0"

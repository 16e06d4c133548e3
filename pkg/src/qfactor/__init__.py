"""Bayesian quantile factor models.

MCMC estimation of quantile-specific factor loadings and latent factors
under a multivariate asymmetric Laplace error model, Bayesian quantile
correlation, model-comparison criteria, convergence diagnostics and
seeded synthetic-data generators, with a matching command-line interface.
"""

from .distributions import (
    asym_laplace_logpdf,
    check_loss,
    gig_logpdf,
    sample_asym_laplace,
    sample_asym_laplace_mv,
    sample_gig,
    sample_mvn,
    sample_truncnorm_pos,
    tau_constants,
)
from .errors import ConfigurationError, DataError, NumericalError, QFactorError
from .estimator import BayesianQuantileRegression, QuantileFactorModel
from .model import (
    ChainState,
    ModelSpec,
    PriorHyper,
    al_location_scatter,
    implied_moments,
    max_factors,
    uniqueness_inflation,
    validate_spec,
    variance_decomposition,
)
from .quantreg import (
    QuantileCorrelationEstimate,
    QuantRegPosterior,
    correlation_band,
    fit_quantile_regression,
    quantile_correlation,
    quantile_correlation_curve,
)
from .rng import RngStream
from .sampler import McmcConfig, PosteriorSample, run_chain, run_parallel_chains
from .criteria import CriteriaReport, criteria_report
from .diagnostics import effective_sample_size, potential_scale_reduction

__version__ = "0.1.0"

__all__ = [
    "BayesianQuantileRegression",
    "ChainState",
    "ConfigurationError",
    "CriteriaReport",
    "DataError",
    "McmcConfig",
    "ModelSpec",
    "NumericalError",
    "PosteriorSample",
    "PriorHyper",
    "QFactorError",
    "QuantRegPosterior",
    "QuantileCorrelationEstimate",
    "QuantileFactorModel",
    "RngStream",
    "al_location_scatter",
    "asym_laplace_logpdf",
    "check_loss",
    "correlation_band",
    "criteria_report",
    "effective_sample_size",
    "fit_quantile_regression",
    "gig_logpdf",
    "implied_moments",
    "max_factors",
    "potential_scale_reduction",
    "quantile_correlation",
    "quantile_correlation_curve",
    "run_chain",
    "run_parallel_chains",
    "sample_asym_laplace",
    "sample_asym_laplace_mv",
    "sample_gig",
    "sample_mvn",
    "sample_truncnorm_pos",
    "tau_constants",
    "uniqueness_inflation",
    "validate_spec",
    "variance_decomposition",
]

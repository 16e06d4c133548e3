"""Scikit-learn style estimators wrapping the MCMC machinery.

``QuantileFactorModel`` follows the usual fit/transform contract: the
constructor only stores hyperparameters (so ``get_params``/``set_params``
and cloning work), ``fit`` runs the chains and exposes posterior summaries
as trailing-underscore attributes, and ``transform`` returns factor
scores.  ``BayesianQuantileRegression`` is the univariate counterpart
used by the quantile-correlation tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import diagnostics as diag
from .criteria import CriteriaReport, criteria_report
from .errors import ConfigurationError, DataError
from .model import (
    ModelSpec,
    PriorHyper,
    al_location_scatter,
    uniqueness_inflation,
)
from .quantreg import fit_quantile_regression
from .rng import RngStream
from .sampler import McmcConfig, run_parallel_chains

__all__ = ["QuantileFactorModel", "BayesianQuantileRegression", "check_data_matrix"]

SUMMARY_SCHEMA_VERSION = 1
MODEL_FAMILY = "quantile-al"


def check_data_matrix(X, min_rows: int = 1) -> np.ndarray:
    """Validate and return a finite float (n, p) data matrix."""
    Y = np.asarray(X, dtype=float)
    if Y.ndim != 2:
        raise DataError(f"expected a 2-D data matrix, got shape {Y.shape}")
    if Y.shape[0] < min_rows:
        raise DataError(f"need at least {min_rows} observations, got {Y.shape[0]}")
    if not np.all(np.isfinite(Y)):
        raise DataError("data matrix contains non-finite values")
    return Y


class QuantileFactorModel(TransformerMixin, BaseEstimator):
    """Bayesian factor model for a conditional quantile of each variable.

    Parameters
    ----------
    n_factors : int
        Number of latent factors (k); must respect the identifiability
        bound for the data dimension.
    tau : float
        Quantile level in (0, 1) tracked by the loadings.
    c0, nu, s2 : float
        Prior hyperparameters (loading variance; scale prior degrees of
        freedom and mode parameter).
    iterations, burn_in, thin, chains, seed : int
        MCMC protocol.
    proposal_sd : float
        Initial log-scale random-walk step for the scale updates (adapted
        during burn-in when the Metropolis path is active).
    sigma_update : {"auto", "gibbs", "mh"}
        Scale-update flavour; "auto" uses the conjugate Gibbs step exactly
        at tau = 0.5 and Metropolis otherwise.

    Attributes
    ----------
    sample_ : PosteriorSample
        All stored draws with per-chain provenance.
    loadings_, sigma_, factors_, weights_ : posterior means.
    acceptance_rates_ : (chains, p) post-burn-in Metropolis acceptance.
    """

    def __init__(
        self,
        n_factors: int = 1,
        tau: float = 0.5,
        c0: float = 100.0,
        nu: float = 0.02,
        s2: float = 1.0,
        iterations: int = 20_000,
        burn_in: int = 2_000,
        thin: int = 10,
        chains: int = 2,
        seed: int = 0,
        proposal_sd: float = 0.5,
        sigma_update: str = "auto",
    ):
        self.n_factors = n_factors
        self.tau = tau
        self.c0 = c0
        self.nu = nu
        self.s2 = s2
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.chains = chains
        self.seed = seed
        self.proposal_sd = proposal_sd
        self.sigma_update = sigma_update

    def _mcmc_config(self) -> McmcConfig:
        return McmcConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            chains=self.chains,
            seed=self.seed,
            proposal_sd=self.proposal_sd,
            sigma_update=self.sigma_update,
        )

    def fit(self, X, y=None):
        Y = check_data_matrix(X, min_rows=2)
        n, p = Y.shape
        spec = ModelSpec(
            n=n,
            p=p,
            k=int(self.n_factors),
            tau=float(self.tau),
            priors=PriorHyper(c0=float(self.c0), nu=float(self.nu), s2=float(self.s2)),
        )
        self.sample_ = run_parallel_chains(Y, spec, self._mcmc_config())
        self.spec_ = spec
        self.data_ = Y
        self.n_features_in_ = p
        self.loadings_ = self.sample_.beta_draws.mean(axis=0)
        self.sigma_ = self.sample_.sigma_draws.mean(axis=0)
        self.factors_ = self.sample_.factor_draws.mean(axis=0)
        self.weights_ = self.sample_.weight_draws.mean(axis=0)
        self.acceptance_rates_ = np.stack([c.acceptance for c in self.sample_.chains])
        return self

    def transform(self, X=None) -> np.ndarray:
        """Factor scores: stored posterior means for the training data,
        or plug-in conditional means (unit mixture weight) for new rows."""
        check_is_fitted(self, "sample_")
        if X is None:
            return self.factors_
        Y = check_data_matrix(X)
        if Y.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} columns, got {Y.shape[1]}")
        beta = self.loadings_
        location, scatter = al_location_scatter(self.sigma_, self.spec_.tau)
        scaled = beta / scatter[:, None]
        prec = beta.T @ scaled + np.eye(self.spec_.k)
        return np.linalg.solve(prec, scaled.T @ (Y - location).T).T

    def variance_decomposition(self, modified: bool = False) -> np.ndarray:
        """Posterior mean of the per-draw variance decomposition, (p, k+1)."""
        check_is_fitted(self, "sample_")
        beta = self.sample_.beta_draws
        sigma = self.sample_.sigma_draws
        common = beta**2
        unique = sigma**2 if modified else sigma**2 * uniqueness_inflation(self.spec_.tau)
        denom = common.sum(axis=2) + unique
        shares = 100.0 * common / denom[:, :, None]
        both = np.concatenate([shares, shares.sum(axis=2, keepdims=True)], axis=2)
        return both.mean(axis=0)

    def criteria(self, n_draws: int | None = None) -> CriteriaReport:
        check_is_fitted(self, "sample_")
        return criteria_report(self.sample_, self.data_, n_draws=n_draws)

    def diagnostics(self) -> dict:
        check_is_fitted(self, "sample_")
        return diag.sample_diagnostics(self.sample_)

    def _posterior_block(self, draws: np.ndarray) -> dict:
        qs = np.quantile(draws, [0.025, 0.975], axis=0)
        return {
            "mean": draws.mean(axis=0).tolist(),
            "sd": draws.std(axis=0, ddof=1).tolist(),
            "q2.5": qs[0].tolist(),
            "q97.5": qs[1].tolist(),
        }

    def summary(self, n_draws: int | None = None) -> dict:
        """JSON-ready posterior summary: point estimates, intervals,
        decompositions, diagnostics and comparison criteria."""
        check_is_fitted(self, "sample_")
        sample = self.sample_
        crits = self.criteria(n_draws=n_draws)
        report = crits.as_dict()
        crit_warnings = report.pop("warnings")
        out = {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "family": MODEL_FAMILY,
            "model": {
                "n": sample.spec.n,
                "p": sample.spec.p,
                "k": sample.spec.k,
                "tau": sample.spec.tau,
                "priors": {
                    "c0": sample.spec.priors.c0,
                    "nu": sample.spec.priors.nu,
                    "s2": sample.spec.priors.s2,
                },
            },
            "mcmc": {
                "iterations": sample.config.iterations,
                "burn_in": sample.config.burn_in,
                "thin": sample.config.thin,
                "chains": len(sample.chains),
                "seed": sample.config.seed,
                "sigma_update": sample.sigma_update,
                "stored_draws": sample.n_draws,
                "chain_streams": [list(c.stream.path) for c in sample.chains],
                "proposal_sd_final": [c.proposal_sd.tolist() for c in sample.chains],
            },
            "posterior": {
                "beta": self._posterior_block(sample.beta_draws),
                "sigma": self._posterior_block(sample.sigma_draws),
            },
            "variance_decomposition": {
                "standard": self.variance_decomposition(modified=False).tolist(),
                "modified": self.variance_decomposition(modified=True).tolist(),
            },
            "acceptance_rates": self.acceptance_rates_.tolist(),
            "diagnostics": self.diagnostics(),
            "criteria": report,
            "warnings": crit_warnings
            + [f"chain {c} failed: {msg}" for c, msg in sample.failures],
        }
        return out


class BayesianQuantileRegression(BaseEstimator):
    """Univariate Bayesian quantile regression with a single regressor.

    ``fit(x, y)`` samples the posterior of (intercept, slope, scale) for
    the asymmetric Laplace regression of y on x at level ``tau``;
    ``predict`` evaluates the posterior-mean quantile line.
    """

    def __init__(
        self,
        tau: float = 0.5,
        c0: float = 100.0,
        nu: float = 0.02,
        s2: float = 1.0,
        iterations: int = 5_000,
        burn_in: int = 1_000,
        thin: int = 2,
        seed: int = 0,
        proposal_sd: float = 0.5,
    ):
        self.tau = tau
        self.c0 = c0
        self.nu = nu
        self.s2 = s2
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.proposal_sd = proposal_sd

    def fit(self, X, y):
        x = np.asarray(X, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ConfigurationError("exactly one regressor column is supported")
            x = x[:, 0]
        config = McmcConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            chains=1,
            seed=self.seed,
            proposal_sd=self.proposal_sd,
        )
        priors = PriorHyper(c0=float(self.c0), nu=float(self.nu), s2=float(self.s2))
        result = fit_quantile_regression(
            y, x, float(self.tau), config, RngStream(self.seed), priors
        )
        self.posterior_ = result
        self.intercept_ = float(result.intercept.mean())
        self.slope_ = float(result.slope.mean())
        self.scale_ = float(result.sigma.mean())
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "posterior_")
        x = np.asarray(X, dtype=float)
        if x.ndim == 2:
            x = x[:, 0]
        return self.intercept_ + self.slope_ * x

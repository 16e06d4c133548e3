"""Model-comparison criteria: likelihood-based scores and predictive checks.

The likelihood used by the information criteria integrates the latent
factors out of the hierarchical model, leaving a Gaussian with mean
``location * w_i`` and covariance ``beta beta' + w_i diag(scatter)``; it
is evaluated at plug-in posterior means (loadings, scales, per-observation
weights).  The predictive scores replicate each observation from its
stored posterior draws of the latent quantities.

All criteria are "smaller is better".  Likelihood-based criteria are only
comparable across fits sharing the same error family; tabulating mixed
families triggers :data:`CROSS_FAMILY_WARNING`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError
from .model import al_location_scatter
from .rng import RngStream, as_generator

__all__ = [
    "CriteriaReport",
    "CROSS_FAMILY_WARNING",
    "count_free_parameters",
    "adjusted_sample_size",
    "covariance_complexity",
    "gaussian_neg2_loglik",
    "marginal_neg2_loglik",
    "information_criteria",
    "predictive_mean",
    "mean_errors",
    "ranked_probability_score",
    "criteria_report",
]

CROSS_FAMILY_WARNING = (
    "likelihood-based criteria (ICOMP/AIC/BIC/BIC*) are comparable only between "
    "fits with the same error family; across families use them to pick the "
    "quantile level or the number of factors, not the family itself"
)

#: stream tag reserved for posterior-predictive replicates (chains use 0..chains-1)
_PREDICTIVE_STREAM_TAG = 1 << 20


def count_free_parameters(p: int, k: int) -> int:
    """Free parameters of the identified model: ``p (k + 1) - k (k - 1) / 2``."""
    return int(p * (k + 1) - k * (k - 1) // 2)


def adjusted_sample_size(n: int, p: int, k: int) -> float:
    """Bartlett-style effective sample size ``n - (2p + 11) / 6 - 2k / 3``."""
    return n - (2 * p + 11) / 6.0 - 2 * k / 3.0


def covariance_complexity(scatter, k: int) -> float:
    """Complexity penalty ``2 (k + 1) [(p / 2) log(tr/p) - log|.|/2]`` of the scatter.

    Accepts a diagonal vector or a full matrix; zero exactly when all
    eigenvalues are equal (the arithmetic/geometric mean gap), hence
    non-negative for any positive definite argument.
    """
    scatter = np.asarray(scatter, dtype=float)
    if scatter.ndim == 1:
        p = scatter.shape[0]
        trace = scatter.sum()
        logdet = np.sum(np.log(scatter))
    else:
        p = scatter.shape[0]
        trace = np.trace(scatter)
        sign, logdet = np.linalg.slogdet(scatter)
        if sign <= 0:
            raise NumericalError("scatter matrix must be positive definite")
    return float(2.0 * (k + 1) * (0.5 * p * np.log(trace / p) - 0.5 * logdet))


def gaussian_neg2_loglik(data, beta, sigma, weights, tau) -> float:
    """``-2 log L`` of the factor-marginal Gaussian at fixed plug-in values.

    Observation i is ``N_p(location * w_i, beta beta' + w_i diag(scatter))``
    with ``location, scatter = al_location_scatter(sigma, tau)``.
    """
    data = np.asarray(data, dtype=float)
    beta = np.asarray(beta, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n, p = data.shape
    location, scatter = al_location_scatter(sigma, tau)
    common = beta @ beta.T
    cov = common[None, :, :] + weights[:, None, None] * np.diag(scatter)[None, :, :]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"marginal covariance not positive definite: {err}") from err
    resid = data - np.outer(weights, location)
    solved = np.linalg.solve(chol, resid[:, :, None])[:, :, 0]
    quad = (solved**2).sum(axis=1)
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    return float((quad + logdet + p * np.log(2.0 * np.pi)).sum())


def marginal_neg2_loglik(sample, data) -> float:
    """``-2 log L`` at posterior-mean plug-ins of a fitted sample."""
    if sample.n_draws == 0:
        raise DataError("posterior sample is empty")
    state = sample.posterior_mean_state()
    return gaussian_neg2_loglik(data, state.beta, state.sigma, state.weights, sample.spec.tau)


def information_criteria(neg2loglik: float, n: int, p: int, k: int, scatter) -> dict:
    """AIC/BIC/BIC*/ICOMP from ``-2 log L`` and the plug-in scatter.

    ``BIC*`` is None (with a warning entry) when the adjusted sample size
    is not positive.
    """
    p_k = count_free_parameters(p, k)
    n_tilde = adjusted_sample_size(n, p, k)
    warnings_: list[str] = []
    if n_tilde > 0:
        bic_star = neg2loglik + np.log(n_tilde) * p_k
    else:
        bic_star = None
        warnings_.append(f"adjusted sample size {n_tilde:.2f} <= 0; BIC* undefined")
    return {
        "aic": neg2loglik + 2.0 * p_k,
        "bic": neg2loglik + np.log(n) * p_k,
        "bic_star": bic_star,
        "icomp": neg2loglik + covariance_complexity(scatter, k),
        "p_k": p_k,
        "n_tilde": n_tilde,
        "warnings": warnings_,
    }


def _draw_indices(total: int, n_draws: int | None) -> np.ndarray:
    if n_draws is None or n_draws >= total:
        return np.arange(total)
    if n_draws < 2:
        raise DataError("predictive scores need at least 2 posterior draws")
    return np.unique(np.linspace(0, total - 1, n_draws).round().astype(int))


def _conditional_means_sds(sample, idx):
    """Per-draw predictive mean and sd of every data cell, (T, n, p) each."""
    beta = sample.beta_draws[idx]
    factors = sample.factor_draws[idx]
    sigma = sample.sigma_draws[idx]
    weights = sample.weight_draws[idx]
    location, scatter = al_location_scatter(sigma, sample.spec.tau)
    mean = np.einsum("tnk,tpk->tnp", factors, beta) + weights[:, :, None] * location[:, None, :]
    sd = np.sqrt(weights[:, :, None] * scatter[:, None, :])
    return mean, sd


def predictive_mean(sample, n_draws: int | None = None) -> np.ndarray:
    """Posterior-predictive mean of every cell, averaging the per-draw
    conditional means (no replicate noise enters the average)."""
    if sample.n_draws == 0:
        raise DataError("posterior sample is empty")
    idx = _draw_indices(sample.n_draws, n_draws)
    mean, _ = _conditional_means_sds(sample, idx)
    return mean.mean(axis=0)


def mean_errors(fitted, data) -> tuple[float, float]:
    """(MAE, MSE) of fitted values against the data, averaged over all cells."""
    diff = np.asarray(fitted, dtype=float) - np.asarray(data, dtype=float)
    return float(np.abs(diff).mean()), float((diff**2).mean())


def ranked_probability_score(sample, data, rng=None, n_draws: int | None = None) -> float:
    """Continuous ranked probability score of the posterior predictive.

    For every cell, ``mean_t |rep_t - y| - mean_t |rep_t - rep'_t| / 2``
    with two independent replicates per stored draw, averaged over all
    ``p * n`` cells.  Deterministic given the sample and the stream.
    """
    if sample.n_draws == 0:
        raise DataError("posterior sample is empty")
    data = np.asarray(data, dtype=float)
    if rng is None:
        rng = RngStream(sample.config.seed).derive(_PREDICTIVE_STREAM_TAG)
    g = as_generator(rng)
    idx = _draw_indices(sample.n_draws, n_draws)
    mean, sd = _conditional_means_sds(sample, idx)
    rep_a = mean + sd * g.standard_normal(mean.shape)
    rep_b = mean + sd * g.standard_normal(mean.shape)
    term_data = np.abs(rep_a - data[None, :, :]).mean(axis=0)
    term_spread = np.abs(rep_a - rep_b).mean(axis=0)
    return float((term_data - 0.5 * term_spread).mean())


@dataclass
class CriteriaReport:
    """All comparison criteria of one fit plus the plug-ins they used."""

    neg2loglik: float
    aic: float
    bic: float
    bic_star: float | None
    icomp: float
    rps: float
    mae: float
    mse: float
    p_k: int
    n_tilde: float
    beta_hat: np.ndarray
    sigma_hat: np.ndarray
    weights_hat: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "neg2loglik": self.neg2loglik,
            "AIC": self.aic,
            "BIC": self.bic,
            "BIC_star": self.bic_star,
            "ICOMP": self.icomp,
            "RPS": self.rps,
            "MAE": self.mae,
            "MSE": self.mse,
            "p_k": self.p_k,
            "n_tilde": self.n_tilde,
            "warnings": list(self.warnings),
        }


def criteria_report(sample, data, rng=None, n_draws: int | None = None) -> CriteriaReport:
    """Full criteria suite for a fitted posterior sample on its data."""
    data = np.asarray(data, dtype=float)
    state = sample.posterior_mean_state()
    _, scatter = al_location_scatter(state.sigma, sample.spec.tau)
    neg2 = gaussian_neg2_loglik(data, state.beta, state.sigma, state.weights, sample.spec.tau)
    info = information_criteria(neg2, sample.spec.n, sample.spec.p, sample.spec.k, scatter)
    mae, mse = mean_errors(predictive_mean(sample, n_draws), data)
    rps = ranked_probability_score(sample, data, rng=rng, n_draws=n_draws)
    return CriteriaReport(
        neg2loglik=neg2,
        aic=info["aic"],
        bic=info["bic"],
        bic_star=info["bic_star"],
        icomp=info["icomp"],
        rps=rps,
        mae=mae,
        mse=mse,
        p_k=info["p_k"],
        n_tilde=info["n_tilde"],
        beta_hat=state.beta,
        sigma_hat=state.sigma,
        weights_hat=state.weights,
        warnings=info["warnings"],
    )

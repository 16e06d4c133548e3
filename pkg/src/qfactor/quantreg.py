"""Univariate Bayesian quantile regression and quantile correlation.

The regression ``y_i = intercept + slope * x_i + eps_i`` with an
asymmetric Laplace error tracking quantile ``tau`` is fitted by the same
normal-exponential mixture Gibbs sampler as the factor model, specialised
to one observed variable with a known regressor.

The quantile correlation of a pair (x, y) at level ``tau`` is the signed
geometric mean of the two directional quantile-regression slopes.  Its
Bayesian version propagates paired posterior draws of the two slopes:
draw t of the correlation combines draw t of each regression, both run on
deterministically derived streams of one seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .model import PriorHyper, al_location_scatter
from .rng import RngStream, as_generator
from .sampler import (
    McmcConfig,
    _row_posterior,
    tune_proposal_sd,
    update_scales_gibbs,
    update_scales_mh,
    update_weights,
)

__all__ = [
    "QuantRegPosterior",
    "QuantileCorrelationEstimate",
    "correlation_band",
    "fit_quantile_regression",
    "quantile_correlation",
    "quantile_correlation_curve",
    "WEAK_THRESHOLD",
    "STRONG_THRESHOLD",
]

#: |rho| banding thresholds separating weak / moderate / strong association
WEAK_THRESHOLD = 0.3
STRONG_THRESHOLD = 0.7

_QUANTREG_DEFAULTS = dict(iterations=5_000, burn_in=1_000, thin=2, chains=1)


@dataclass
class QuantRegPosterior:
    """Posterior draws of one univariate quantile regression."""

    tau: float
    intercept: np.ndarray
    slope: np.ndarray
    sigma: np.ndarray
    acceptance: float
    stream: RngStream

    def predict(self, x):
        """Posterior-mean quantile line evaluated at x."""
        return self.intercept.mean() + self.slope.mean() * np.asarray(x, dtype=float)


def _default_config(config: McmcConfig | None) -> McmcConfig:
    return McmcConfig(**_QUANTREG_DEFAULTS) if config is None else config


def fit_quantile_regression(y, x, tau, config: McmcConfig | None = None, stream: RngStream | None = None, priors: PriorHyper | None = None) -> QuantRegPosterior:
    """Gibbs/Metropolis posterior sample of (intercept, slope, scale).

    ``y`` is regressed on ``x`` at quantile level ``tau``; both are
    length-n vectors, with ``n >= 3`` and ``x`` not constant.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if y.shape != x.shape:
        raise DataError(f"x and y lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if y.shape[0] < 3:
        raise DataError("quantile regression needs at least 3 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("x and y must be finite")
    if np.ptp(x) == 0:
        raise DataError("regressor x is constant; the slope is not identifiable")
    if not 0.0 < tau < 1.0:
        raise ConfigurationError(f"tau={tau} outside the open interval (0, 1)")
    config = _default_config(config)
    if bad := config.violations():
        raise ConfigurationError("; ".join(bad))
    priors = priors or PriorHyper()
    stream = stream if stream is not None else RngStream(config.seed)
    g = stream.generator()

    n = y.shape[0]
    design = np.column_stack([np.ones(n), x])
    data = y[:, None]
    sigma_update = "gibbs" if tau == 0.5 else "mh"

    theta = np.zeros(2)
    sigma = np.array([np.sqrt(priors.s2)])
    weights = np.ones(n)
    proposal_sd = np.array([float(config.proposal_sd)])
    band = config.target_acceptance
    window_accepts = 0.0
    window_rounds = 0
    post_accepts = 0.0
    post_steps = 0

    n_stored = config.n_stored()
    draws = np.empty((n_stored, 3))
    stored = 0
    for sweep in range(1, config.iterations + 1):
        beta_row = theta[None, :]
        weights = update_weights(beta_row, design, sigma, data, tau, g)
        location, scatter = al_location_scatter(sigma, tau)
        mean, cov = _row_posterior(design, y - location[0] * weights, weights * scatter[0], priors.c0)
        theta = mean + np.linalg.cholesky(cov) @ g.standard_normal(2)
        if sigma_update == "gibbs":
            sigma = update_scales_gibbs(theta[None, :], design, weights, data, tau, priors, g)
        else:
            sigma, accepted = update_scales_mh(
                theta[None, :], design, weights, sigma, data, tau, priors, proposal_sd, g
            )
            if sweep <= config.burn_in:
                window_accepts += accepted[0]
                if sweep % config.adapt_window == 0:
                    window_rounds += 1
                    rate = np.array([window_accepts / config.adapt_window])
                    proposal_sd = tune_proposal_sd(proposal_sd, rate, window_rounds, band)
                    window_accepts = 0.0
            else:
                post_accepts += accepted[0]
                post_steps += 1
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            draws[stored] = (theta[0], theta[1], sigma[0])
            stored += 1

    acceptance = post_accepts / post_steps if post_steps else 1.0
    return QuantRegPosterior(
        tau=tau,
        intercept=draws[:, 0].copy(),
        slope=draws[:, 1].copy(),
        sigma=draws[:, 2].copy(),
        acceptance=float(acceptance),
        stream=stream,
    )


def correlation_band(value: float) -> str:
    """Classify |rho| as weak (< 0.3), moderate or strong (> 0.7)."""
    mag = abs(value)
    if mag < WEAK_THRESHOLD:
        return "weak"
    if mag <= STRONG_THRESHOLD:
        return "moderate"
    return "strong"


@dataclass
class QuantileCorrelationEstimate:
    """Posterior summary of the quantile correlation of one pair."""

    tau: float
    draws: np.ndarray
    mean: float
    interval: tuple[float, float]
    negative_product_fraction: float

    @property
    def band(self) -> str:
        return correlation_band(self.mean)


def quantile_correlation(x, y, tau, config: McmcConfig | None = None, stream: RngStream | None = None, priors: PriorHyper | None = None) -> QuantileCorrelationEstimate:
    """Bayesian quantile correlation of a pair at one quantile level.

    Runs both directional regressions on derived streams of one seed and
    combines the t-th slope draws as ``sign(slope_yx) * sqrt(slope_yx *
    slope_xy)``.  Draw pairs with a negative slope product, where the
    geometric mean is undefined, contribute zero (the no-association
    value); their fraction is reported for transparency.
    """
    config = _default_config(config)
    stream = stream if stream is not None else RngStream(config.seed)
    fit_yx = fit_quantile_regression(y, x, tau, config, stream.derive(0), priors)
    fit_xy = fit_quantile_regression(x, y, tau, config, stream.derive(1), priors)
    product = fit_yx.slope * fit_xy.slope
    rho = np.where(product >= 0, np.sign(fit_yx.slope) * np.sqrt(np.abs(product)), 0.0)
    negative_fraction = float(np.mean(product < 0))
    if negative_fraction > 0.5:
        warnings.warn(
            f"{negative_fraction:.0%} of slope-product draws were negative; "
            "the quantile correlation is weakly identified for this pair",
            RuntimeWarning,
            stacklevel=2,
        )
    lo, hi = np.quantile(rho, [0.025, 0.975])
    return QuantileCorrelationEstimate(
        tau=tau,
        draws=rho,
        mean=float(rho.mean()),
        interval=(float(lo), float(hi)),
        negative_product_fraction=negative_fraction,
    )


def quantile_correlation_curve(x, y, taus, config: McmcConfig | None = None, stream: RngStream | None = None, priors: PriorHyper | None = None) -> list[QuantileCorrelationEstimate]:
    """Independent quantile-correlation estimates over a grid of levels."""
    taus = [float(t) for t in np.atleast_1d(taus)]
    if any(not 0.0 < t < 1.0 for t in taus):
        raise ConfigurationError("every grid level must lie in (0, 1)")
    config = _default_config(config)
    stream = stream if stream is not None else RngStream(config.seed)
    return [
        quantile_correlation(x, y, t, config, stream.derive(i), priors)
        for i, t in enumerate(taus)
    ]

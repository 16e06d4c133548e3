"""Seeded synthetic-data generators for the two case studies and the model itself.

Case study 1: a 5-variate Gaussian whose variables 3-5 are strongly
coupled, contaminated in the joint lower tail of variables 1-2 so that
their association exists only at low quantiles.  Case study 2: a 6-variate
heavy-tailed Student-t with three independent pairs of coupled variables.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DataError
from .model import ChainState, ModelSpec, al_location_scatter
from .rng import as_generator
from .distributions import sample_mvn

__all__ = [
    "CASE1_COVARIANCE",
    "CASE2_SCATTER",
    "gen_case1",
    "gen_case2",
    "gen_qfm",
]

CASE1_COVARIANCE = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.95, 0.95],
        [0.0, 0.0, 0.95, 1.0, 0.95],
        [0.0, 0.0, 0.95, 0.95, 1.0],
    ]
)

CASE2_SCATTER = np.array(
    [
        [1.0, 0.95, 0.0, 0.0, 0.0, 0.0],
        [0.95, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.95, 0.0, 0.0],
        [0.0, 0.0, 0.95, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.95],
        [0.0, 0.0, 0.0, 0.0, 0.95, 1.0],
    ]
)


def gen_case1(n: int, rng, threshold: float = -0.4, contamination_var: float = 9.0) -> np.ndarray:
    """Tail-contaminated Gaussian sample (n, 5).

    Draws ``N_5(0, CASE1_COVARIANCE)``, then pushes variables 1 and 2
    jointly further down whenever both sit below ``threshold``: one shared
    downward shock per row, with magnitude ``|N(0, contamination_var)|``.
    Downward shocks keep shocked rows inside the joint lower tail, so the
    extra dependence lives only in the low quantiles while the median and
    upper quantiles of the pair stay essentially independent.
    """
    if n < 2:
        raise DataError("case study 1 needs n >= 2")
    g = as_generator(rng)
    y = sample_mvn(np.zeros(5), CASE1_COVARIANCE, g, size=n)
    shock = -np.abs(g.normal(0.0, np.sqrt(contamination_var), n))
    hit = (y[:, 0] < threshold) & (y[:, 1] < threshold)
    y[:, 0] += shock * hit
    y[:, 1] += shock * hit
    return y


def gen_case2(n: int, rng, dof: float = 2.5, scatter: np.ndarray | None = None) -> np.ndarray:
    """Multivariate Student-t sample (n, 6) with three coupled pairs.

    Uses the scale-mixture construction ``z / sqrt(g / dof)`` with
    ``z ~ N_6(0, scatter)`` and ``g ~ chi-square(dof)``.
    """
    if n < 2:
        raise DataError("case study 2 needs n >= 2")
    if dof <= 0:
        raise ConfigurationError("degrees of freedom must be positive")
    scatter = CASE2_SCATTER if scatter is None else np.asarray(scatter, dtype=float)
    g = as_generator(rng)
    z = sample_mvn(np.zeros(scatter.shape[0]), scatter, g, size=n)
    mix = g.chisquare(dof, n)
    return z / np.sqrt(mix / dof)[:, None]


def gen_qfm(spec: ModelSpec, beta, sigma, rng) -> tuple[np.ndarray, ChainState]:
    """Simulate data from the quantile factor model itself.

    Draws factors ``N_k(0, I)``, mixture weights ``Exp(1)`` and
    observations from the conditional Gaussian of the hierarchical
    representation.  Returns ``(data, truth)`` where ``truth`` is the full
    generating state, for parameter-recovery checks.
    """
    # identifiability constraints matter for inference, not simulation, so
    # only shapes, ranges and positivity are enforced on the generating values
    problems = []
    if spec.n < 1 or spec.p < 1 or spec.k < 1:
        problems.append("n, p and k must all be at least 1")
    if not 0.0 < spec.tau < 1.0:
        problems.append(f"tau={spec.tau} outside the open interval (0, 1)")
    beta = np.asarray(beta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if beta.shape != (spec.p, spec.k):
        problems.append(f"loadings shape {beta.shape} does not match (p={spec.p}, k={spec.k})")
    if sigma.shape != (spec.p,) or np.any(sigma <= 0):
        problems.append("sigma must be a positive vector of length p")
    if problems:
        raise ConfigurationError("; ".join(problems))
    g = as_generator(rng)
    location, scatter = al_location_scatter(sigma, spec.tau)
    factors = g.standard_normal((spec.n, spec.k))
    weights = g.standard_exponential(spec.n)
    noise = g.standard_normal((spec.n, spec.p)) * np.sqrt(weights[:, None] * scatter)
    data = factors @ beta.T + np.outer(weights, location) + noise
    return data, ChainState(beta=beta, factors=factors, sigma=sigma, weights=weights)

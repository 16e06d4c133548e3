"""Model algebra for the quantile factor model.

A p-vector observation ``y_i`` is tied to ``k`` latent factors through

    y_i = beta @ f_i + eps_i,

where ``beta`` is a p-by-k loadings matrix constrained block lower
triangular with a strictly positive diagonal (resolving rotation
invariance) and ``eps_i`` follows a multivariate asymmetric Laplace law
whose skewness tracks the quantile level ``tau``.  The error location and
scatter are tied to the per-variable scales ``sigma`` by

    location_l = sigma_l * a_tau,     scatter_ll = sigma_l**2 * b_sq_tau,

with zero off-diagonal scatter.  This module holds the specification
records, the implied second moments, the variance decompositions and the
factor-count bound; it contains no sampling code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import tau_constants

__all__ = [
    "PriorHyper",
    "ModelSpec",
    "ChainState",
    "max_factors",
    "uniqueness_inflation",
    "al_location_scatter",
    "implied_moments",
    "variance_decomposition",
    "validate_spec",
    "check_loadings",
]


@dataclass(frozen=True)
class PriorHyper:
    """Prior hyperparameters: N(0, c0) loadings, inverse-gamma(nu/2, nu*s2/2) scales.

    The defaults (c0=100, nu=0.02, s2=1) are deliberately vague.
    """

    c0: float = 100.0
    nu: float = 0.02
    s2: float = 1.0

    def violations(self) -> list[str]:
        out = []
        for name in ("c0", "nu", "s2"):
            if not getattr(self, name) > 0:
                out.append(f"prior hyperparameter {name} must be positive")
        return out


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions, quantile level and priors of one model fit."""

    n: int
    p: int
    k: int
    tau: float
    priors: PriorHyper = field(default_factory=PriorHyper)


@dataclass
class ChainState:
    """One full state of the Gibbs sampler.

    Attributes
    ----------
    beta : (p, k) loadings, block lower triangular with positive diagonal
    factors : (n, k) latent factor scores
    sigma : (p,) positive per-variable scales
    weights : (n,) positive mixture weights of the AL representation
    """

    beta: np.ndarray
    factors: np.ndarray
    sigma: np.ndarray
    weights: np.ndarray

    def violations(self) -> list[str]:
        out = check_loadings(self.beta, self.beta.shape[1])
        if self.factors.shape != (self.weights.shape[0], self.beta.shape[1]):
            out.append("factors shape does not match (n, k)")
        if self.sigma.shape != (self.beta.shape[0],):
            out.append("sigma length does not match p")
        if np.any(self.sigma <= 0):
            out.append("all sigma entries must be positive")
        if np.any(self.weights <= 0):
            out.append("all mixture weights must be positive")
        return out


def max_factors(p: int) -> int:
    """Largest factor count identifiable from a p-variate covariance.

    The constrained loadings plus scales use ``p(k+1) - k(k-1)/2`` free
    parameters against ``p(p+1)/2`` in an unconstrained covariance; the
    bound is the largest k keeping the difference non-negative.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    best = 0
    for k in range(1, p + 1):
        if p * (p + 1) / 2 - p * (k + 1) + k * (k - 1) / 2 >= 0:
            best = k
    return best


def uniqueness_inflation(tau: float) -> float:
    """Multiplier on sigma_l**2 in the marginal variance of variable l.

    Equals ``(1 - 2 tau + 2 tau**2) / (tau**2 (1 - tau)**2)``, which is
    also ``a_tau**2 + b_sq_tau``: 8 at the median and growing without
    bound toward either tail.  Symmetric under ``tau -> 1 - tau``.
    """
    a, b_sq = tau_constants(tau)
    return a * a + b_sq


def al_location_scatter(sigma, tau):
    """Error location vector and diagonal scatter implied by (sigma, tau)."""
    sigma = np.asarray(sigma, dtype=float)
    a, b_sq = tau_constants(tau)
    return sigma * a, sigma**2 * b_sq


def implied_moments(state: ChainState, tau: float):
    """Marginal and factor-conditional covariance of the observations.

    Returns ``(marginal, conditional)`` p-by-p matrices.  The conditional
    covariance is ``location location' + diag(scatter)`` (the error law's
    second moment); the marginal adds the common part ``beta beta'``.
    """
    beta = np.asarray(state.beta, dtype=float)
    location, scatter = al_location_scatter(state.sigma, tau)
    conditional = np.outer(location, location) + np.diag(scatter)
    marginal = beta @ beta.T + conditional
    return marginal, conditional


def variance_decomposition(state: ChainState, tau: float, modified: bool = False):
    """Percentage of each variable's variance attributed to each factor.

    Returns a (p, k+1) array whose first k columns are per-factor shares
    ``100 * beta_lj**2 / denom_l`` and whose last column is their sum.  The
    standard form uses ``denom_l = sum_j beta_lj**2 + sigma_l**2 *
    uniqueness_inflation(tau)``; the modified form drops the tau-dependent
    inflation so different quantiles can be compared on one scale.
    """
    beta = np.asarray(state.beta, dtype=float)
    sigma = np.asarray(state.sigma, dtype=float)
    common = beta**2
    unique = sigma**2 if modified else sigma**2 * uniqueness_inflation(tau)
    denom = common.sum(axis=1) + unique
    if np.any(denom <= 0):
        raise ValueError("degenerate variable: zero loadings row and zero scale")
    shares = 100.0 * common / denom[:, None]
    return np.hstack([shares, shares.sum(axis=1, keepdims=True)])


def validate_spec(spec: ModelSpec) -> list[str]:
    """All constraint violations of a model specification (empty if valid)."""
    out = []
    if spec.n < 1:
        out.append("n must be at least 1")
    if spec.p < 1:
        out.append("p must be at least 1")
    if spec.p >= 1:
        bound = max_factors(spec.p)
        if not 1 <= spec.k <= bound:
            out.append(f"k={spec.k} outside the identifiable range [1, {bound}] for p={spec.p}")
    if not 0.0 < spec.tau < 1.0:
        out.append(f"tau={spec.tau} outside the open interval (0, 1)")
    out.extend(spec.priors.violations())
    return out


def check_loadings(beta: np.ndarray, k: int) -> list[str]:
    """Violations of the identifiability constraints on a loadings matrix."""
    beta = np.asarray(beta, dtype=float)
    out = []
    if beta.ndim != 2 or beta.shape[1] != k:
        out.append(f"loadings must be a (p, {k}) matrix")
        return out
    p = beta.shape[0]
    for j in range(min(p, k)):
        if np.any(beta[j, j + 1 :] != 0):
            out.append(f"loadings row {j + 1} must be zero above the diagonal")
        if not beta[j, j] > 0:
            out.append(f"diagonal loading [{j + 1}, {j + 1}] must be strictly positive")
    if p >= k and np.linalg.matrix_rank(beta) < k:
        out.append("loadings matrix must have full column rank")
    return out

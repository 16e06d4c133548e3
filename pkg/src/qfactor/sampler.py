"""Gibbs/Metropolis sampler for the quantile factor model.

One sweep updates, in fixed order, the mixture weights (generalized
inverse Gaussian), the latent factors (multivariate normal), the loadings
rows (normal, positive-truncated on the diagonal) and the per-variable
scales.  The scales are conjugate only at the median; elsewhere they move
by a log-scale random-walk Metropolis step whose proposal is adapted
during burn-in to keep acceptance inside the target band.

All full conditionals are derived from the hierarchical form

    y_i | f_i, w_i ~ N_p(beta f_i + location * w_i, w_i * diag(scatter)),
    w_i ~ Exp(1),   f_i ~ N_k(0, I),

with ``location, scatter = al_location_scatter(sigma, tau)``; the
``*_conditional`` helpers expose each conditional's parameters so tests
can check them against ``log_joint`` directly.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .distributions import sample_gig, sample_truncnorm_pos
from .errors import ConfigurationError, DataError, NumericalError
from .model import ChainState, ModelSpec, al_location_scatter, tau_constants, validate_spec
from .rng import RngStream, as_generator

__all__ = [
    "McmcConfig",
    "ChainResult",
    "PosteriorSample",
    "weights_conditional",
    "update_weights",
    "factors_conditional",
    "update_factors",
    "loadings_row_conditional",
    "update_loadings_row",
    "update_loadings",
    "scales_logkernel",
    "update_scales_gibbs",
    "update_scales_mh",
    "tune_proposal_sd",
    "initial_state",
    "run_chain",
    "run_parallel_chains",
    "log_joint",
]


@dataclass(frozen=True)
class McmcConfig:
    """Run protocol for one fit.

    The defaults are the desk-scale preset; ``paper_protocol`` returns the
    long protocol (160k iterations, 10k burn-in, thin 50, two chains).
    """

    iterations: int = 20_000
    burn_in: int = 2_000
    thin: int = 10
    chains: int = 2
    seed: int = 0
    proposal_sd: float = 0.5
    target_acceptance: tuple[float, float] = (0.25, 0.45)
    adapt_window: int = 50
    sigma_update: str = "auto"  # auto | gibbs | mh

    @classmethod
    def paper_protocol(cls, **overrides) -> "McmcConfig":
        base = dict(iterations=160_000, burn_in=10_000, thin=50, chains=2)
        base.update(overrides)
        return cls(**base)

    def violations(self) -> list[str]:
        out = []
        if self.iterations < 1:
            out.append("iterations must be positive")
        if self.burn_in < 0 or self.burn_in >= self.iterations:
            out.append("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            out.append("thin must be at least 1")
        if self.chains < 1:
            out.append("chains must be at least 1")
        if np.any(np.asarray(self.proposal_sd, dtype=float) <= 0):
            out.append("proposal_sd must be positive")
        lo, hi = self.target_acceptance
        if not 0.0 < lo < hi < 1.0:
            out.append("target_acceptance must be an ordered interval inside (0, 1)")
        if self.adapt_window < 1:
            out.append("adapt_window must be positive")
        if self.sigma_update not in ("auto", "gibbs", "mh"):
            out.append("sigma_update must be one of auto|gibbs|mh")
        return out

    def n_stored(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class ChainResult:
    """Stored draws and bookkeeping of a single chain."""

    beta: np.ndarray  # (S, p, k)
    factors: np.ndarray  # (S, n, k)
    sigma: np.ndarray  # (S, p)
    weights: np.ndarray  # (S, n)
    acceptance: np.ndarray  # (p,) post-burn-in MH acceptance rate per scale
    proposal_sd: np.ndarray  # (p,) final (frozen) proposal standard deviations
    stream: RngStream
    init_scale: float
    wall_time: float


@dataclass
class PosteriorSample:
    """Thinned post-burn-in draws across chains with per-chain provenance."""

    spec: ModelSpec
    config: McmcConfig
    chains: list[ChainResult]
    failures: list[tuple[int, str]] = field(default_factory=list)
    sigma_update: str = "gibbs"

    @property
    def n_draws(self) -> int:
        return sum(c.beta.shape[0] for c in self.chains)

    def _stacked(self, name: str) -> np.ndarray:
        return np.concatenate([getattr(c, name) for c in self.chains], axis=0)

    @property
    def beta_draws(self) -> np.ndarray:
        return self._stacked("beta")

    @property
    def sigma_draws(self) -> np.ndarray:
        return self._stacked("sigma")

    @property
    def factor_draws(self) -> np.ndarray:
        return self._stacked("factors")

    @property
    def weight_draws(self) -> np.ndarray:
        return self._stacked("weights")

    def states(self):
        """Iterate over stored draws as :class:`ChainState` values."""
        for c in self.chains:
            for t in range(c.beta.shape[0]):
                yield ChainState(c.beta[t], c.factors[t], c.sigma[t], c.weights[t])

    def posterior_mean_state(self) -> ChainState:
        return ChainState(
            beta=self.beta_draws.mean(axis=0),
            factors=self.factor_draws.mean(axis=0),
            sigma=self.sigma_draws.mean(axis=0),
            weights=self.weight_draws.mean(axis=0),
        )


# ---------------------------------------------------------------------------
# Full-conditional updates
# ---------------------------------------------------------------------------


def weights_conditional(beta, factors, sigma, data, tau):
    """GIG parameters (lam, a, b_i) of the mixture-weight conditionals."""
    location, scatter = al_location_scatter(sigma, tau)
    p = data.shape[1]
    lam = 1.0 - p / 2.0
    a = 2.0 + float(location @ (location / scatter))
    resid = data - factors @ beta.T
    b = (resid**2 / scatter).sum(axis=1)
    return lam, a, b


def update_weights(beta, factors, sigma, data, tau, rng):
    """Redraw all mixture weights from their GIG full conditionals."""
    lam, a, b = weights_conditional(beta, factors, sigma, data, tau)
    if lam <= 0 and np.any(b == 0):
        raise DataError(
            "mixture-weight conditional degenerate: residual exactly zero for "
            f"observation(s) {np.flatnonzero(b == 0).tolist()} with p >= 2"
        )
    return sample_gig(lam, a, b, rng)


def factors_conditional(beta, weights, sigma, data, tau):
    """Means (n, k) and covariances (n, k, k) of the factor conditionals."""
    location, scatter = al_location_scatter(sigma, tau)
    k = beta.shape[1]
    scaled = beta / scatter[:, None]  # Delta^{-1} beta
    a_mat = beta.T @ scaled  # (k, k), shared across observations
    prec = a_mat[None, :, :] / weights[:, None, None] + np.eye(k)[None, :, :]
    resid = data - np.outer(weights, location)
    rhs = (resid @ scaled) / weights[:, None]
    cov = np.linalg.inv(prec)
    mean = np.einsum("nkl,nl->nk", cov, rhs)
    return mean, cov


def update_factors(beta, weights, sigma, data, tau, rng):
    """Redraw all latent factor vectors from their normal full conditionals."""
    g = as_generator(rng)
    mean, cov = factors_conditional(beta, weights, sigma, data, tau)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"factor conditional covariance not positive definite: {err}") from err
    z = g.standard_normal(mean.shape)
    return mean + np.einsum("nkl,nl->nk", chol, z)


def _row_posterior(design, response, noise_var, c0):
    """Posterior (mean, cov) of normal regression weights with N(0, c0 I) prior.

    ``response_i ~ N(design_i . coef, noise_var_i)`` with independent
    coefficient priors; empty designs return the prior itself.
    """
    d = design.shape[1]
    weighted = design / noise_var[:, None]
    prec = np.eye(d) / c0 + weighted.T @ design
    cov = np.linalg.inv(prec)
    cov = (cov + cov.T) / 2.0
    mean = cov @ (weighted.T @ response)
    return mean, cov


def loadings_row_conditional(j, factors, weights, sigma, data, tau, priors):
    """Posterior (mean, cov, constrained) of loadings row ``j`` (0-based).

    Rows with index below k have ``j + 1`` free coordinates, the last being
    the diagonal entry constrained positive; later rows have all k free.
    """
    k = factors.shape[1]
    location, scatter = al_location_scatter(sigma, tau)
    d = min(j + 1, k)
    design = factors[:, :d]
    response = data[:, j] - location[j] * weights
    noise_var = weights * scatter[j]
    mean, cov = _row_posterior(design, response, noise_var, priors.c0)
    return mean, cov, j < k


def update_loadings_row(j, factors, weights, sigma, data, tau, priors, rng):
    """Redraw the free coefficients of loadings row ``j``; returns a length-min(j+1, k) vector."""
    g = as_generator(rng)
    mean, cov, constrained = loadings_row_conditional(j, factors, weights, sigma, data, tau, priors)
    d = mean.shape[0]
    if not constrained:
        chol = np.linalg.cholesky(cov)
        return mean + chol @ g.standard_normal(d)
    # exact draw under the positivity constraint on the last (diagonal)
    # coordinate: truncated marginal first, then the conditional of the rest
    last = d - 1
    diag_draw = sample_truncnorm_pos(mean[last], cov[last, last], g)
    if d == 1:
        return np.array([diag_draw])
    rest = np.arange(last)
    gain = cov[rest, last] / cov[last, last]
    cond_mean = mean[rest] + gain * (diag_draw - mean[last])
    cond_cov = cov[np.ix_(rest, rest)] - np.outer(gain, cov[last, rest])
    cond_cov = (cond_cov + cond_cov.T) / 2.0
    chol = np.linalg.cholesky(cond_cov)
    out = np.empty(d)
    out[rest] = cond_mean + chol @ g.standard_normal(d - 1)
    out[last] = diag_draw
    return out


def update_loadings(factors, weights, sigma, data, tau, priors, rng):
    """Redraw the whole loadings matrix (rows are conditionally independent).

    The constrained head rows are drawn one by one; the unconstrained tail
    rows share dimension k and are drawn in one batched precision solve.
    """
    g = as_generator(rng)
    p = data.shape[1]
    k = factors.shape[1]
    beta = np.zeros((p, k))
    for j in range(min(p, k)):
        d = min(j + 1, k)
        beta[j, :d] = update_loadings_row(j, factors, weights, sigma, data, tau, priors, g)
    if p <= k:
        return beta
    location, scatter = al_location_scatter(sigma, tau)
    inv_noise = 1.0 / (weights[:, None] * scatter[None, k:])  # (n, p - k)
    weighted = inv_noise.T[:, :, None] * factors[None, :, :]  # (p - k, n, k)
    prec = factors.T[None, :, :] @ weighted
    prec += np.eye(k)[None, :, :] / priors.c0
    resid = data[:, k:] - np.outer(weights, location[k:])
    rhs = ((resid * inv_noise).T[:, None, :] @ factors)[:, 0, :]
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"loadings conditional precision not positive definite: {err}") from err
    mean = np.linalg.solve(prec, rhs[:, :, None])[:, :, 0]
    z = g.standard_normal((p - k, k, 1))
    beta[k:] = mean + np.linalg.solve(np.transpose(chol, (0, 2, 1)), z)[:, :, 0]
    return beta


def _scale_stats(beta, factors, weights, data):
    """Sufficient statistics of the scale conditionals: per-variable
    ``sum_i resid_ij**2 / w_i`` and ``sum_i resid_ij``."""
    resid = data - factors @ beta.T
    return (resid**2 / weights[:, None]).sum(axis=0), resid.sum(axis=0)


def scales_logkernel(inv_var, sq_stat, lin_stat, n, tau, priors):
    """Log full-conditional kernel of the precision-like variable ``1 / sigma_j**2``.

    Derived from the hierarchical joint:  the quadratic statistic enters at
    rate ``tau (1 - tau) / 4`` and the linear statistic couples to
    ``1 / sigma_j`` with coefficient ``+(1 - 2 tau) / 2``.  (The linear
    term's sign follows from expanding the Gaussian exponent; it vanishes
    at the median, where the kernel is exactly Gamma.)
    """
    inv_var = np.asarray(inv_var, dtype=float)
    rate = priors.nu * priors.s2 / 2.0 + tau * (1.0 - tau) / 4.0 * sq_stat
    shape = (n + priors.nu) / 2.0
    with np.errstate(divide="ignore"):
        out = (shape - 1.0) * np.log(inv_var) - inv_var * rate
    out = out + np.sqrt(inv_var) * (1.0 - 2.0 * tau) / 2.0 * lin_stat
    return out


def update_scales_gibbs(beta, factors, weights, data, tau, priors, rng):
    """Exact Gamma redraw of all scale parameters; valid only at tau = 1/2."""
    if tau != 0.5:
        raise ConfigurationError("the conjugate scale update requires tau = 0.5 exactly")
    g = as_generator(rng)
    n = data.shape[0]
    sq_stat, _ = _scale_stats(beta, factors, weights, data)
    shape = (n + priors.nu) / 2.0
    rate = priors.nu * priors.s2 / 2.0 + tau * (1.0 - tau) / 4.0 * sq_stat
    inv_var = g.gamma(shape, 1.0 / rate)
    return 1.0 / np.sqrt(inv_var)


def update_scales_mh(beta, factors, weights, sigma, data, tau, priors, proposal_sd, rng):
    """Log-scale random-walk Metropolis step on every ``1 / sigma_j**2``.

    Returns ``(sigma, accepted)`` with a boolean acceptance flag per
    coordinate.  The acceptance ratio includes the Jacobian of the
    log-scale proposal; non-finite proposal kernels are rejected.
    """
    g = as_generator(rng)
    n = data.shape[0]
    sq_stat, lin_stat = _scale_stats(beta, factors, weights, data)
    inv_var = 1.0 / sigma**2
    log_cur = scales_logkernel(inv_var, sq_stat, lin_stat, n, tau, priors)
    step = g.normal(0.0, proposal_sd)
    proposed = inv_var * np.exp(step)
    log_prop = scales_logkernel(proposed, sq_stat, lin_stat, n, tau, priors)
    # step is also log(proposed) - log(inv_var), the proposal Jacobian term
    log_alpha = log_prop - log_cur + step
    log_alpha = np.where(np.isfinite(log_prop), log_alpha, -np.inf)
    accepted = np.log(g.random(sigma.shape[0])) < log_alpha
    new_inv_var = np.where(accepted, proposed, inv_var)
    return 1.0 / np.sqrt(new_inv_var), accepted


def tune_proposal_sd(proposal_sd, acceptance, round_index, band=(0.25, 0.45)):
    """One Robbins-Monro adaptation step toward the acceptance band.

    Coordinates already inside ``band`` are left untouched; the rest are
    scaled multiplicatively with a gain that decays as ``1/sqrt(round)``.
    """
    proposal_sd = np.asarray(proposal_sd, dtype=float)
    acceptance = np.asarray(acceptance, dtype=float)
    target = 0.5 * (band[0] + band[1])
    gain = min(1.0, 1.0 / np.sqrt(max(round_index, 1)))
    inside = (acceptance >= band[0]) & (acceptance <= band[1])
    factor = np.exp(gain * (acceptance - target) / target)
    return np.where(inside, proposal_sd, proposal_sd * factor)


# ---------------------------------------------------------------------------
# Chain orchestration
# ---------------------------------------------------------------------------


def _overdispersion_scale(chain_index: int) -> float:
    """Deterministic spread of initial loadings draws across chains: 1, 1/2, 2, 1/4, 4, ..."""
    half_steps = (chain_index + 1) // 2
    return float(2.0 ** (half_steps if chain_index % 2 == 0 else -half_steps))


def _principal_loadings(data: np.ndarray, k: int) -> np.ndarray:
    """Constrained loadings start from the leading principal components.

    The principal loadings are rotated so their top k-by-k block is lower
    triangular (LQ decomposition) and columns are sign-flipped to a
    positive diagonal.  Weakly supported diagonals are floored away from
    the constraint boundary.
    """
    p = data.shape[1]
    cov = np.cov(data, rowvar=False).reshape(p, p)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    loadings = evecs[:, order] * np.sqrt(np.clip(evals[order], 0.0, None))
    q, _ = np.linalg.qr(loadings[:k, :].T)
    beta = loadings @ q
    beta[np.triu_indices(k, k=1)] = 0.0
    for col in range(k):
        if beta[col, col] < 0:
            beta[:, col] = -beta[:, col]
    floor = 0.05 * np.sqrt(max(np.trace(cov) / p, 1e-12))
    for col in range(k):
        beta[col, col] = max(beta[col, col], floor)
    return beta


def initial_state(spec: ModelSpec, rng, scale: float = 1.0, data: np.ndarray | None = None) -> ChainState:
    """Starting point of one chain.

    With ``data`` given, the loadings start from principal-component
    loadings rotated into the identified (block lower triangular, positive
    diagonal) form, scaled by ``scale`` and jittered, so every chain
    starts inside the basin the constraint identifies; prior draws land
    desk-scale chains in reflected metastable modes.  Without data the
    loadings are scaled constrained prior draws.  Factors start N(0, I),
    scales at the prior mode parameter, mixture weights at one.
    """
    g = as_generator(rng)
    p, k, n = spec.p, spec.k, spec.n
    c0 = spec.priors.c0
    if data is None:
        beta = np.zeros((p, k))
        for j in range(p):
            d = min(j + 1, k)
            beta[j, :d] = g.normal(0.0, np.sqrt(c0), d)
            if j < k:
                beta[j, j] = sample_truncnorm_pos(0.0, c0, g)
        beta *= scale
    else:
        beta = _principal_loadings(data, k) * scale
        jitter = 0.05 * scale
        for j in range(p):
            d = min(j + 1, k)
            beta[j, :d] += g.normal(0.0, jitter, d)
            if j < k:
                beta[j, j] = abs(beta[j, j]) + 1e-6
    return ChainState(
        beta=beta,
        factors=g.standard_normal((n, k)),
        sigma=np.full(p, np.sqrt(spec.priors.s2)),
        weights=np.ones(n),
    )


def _resolve_sigma_update(mode: str, tau: float) -> str:
    if mode == "auto":
        return "gibbs" if tau == 0.5 else "mh"
    if mode == "gibbs" and tau != 0.5:
        raise ConfigurationError("sigma_update='gibbs' requires tau = 0.5")
    return mode


def run_chain(data, spec: ModelSpec, config: McmcConfig, stream: RngStream, init: ChainState | None = None, init_scale: float = 1.0) -> ChainResult:
    """Run one chain and return its thinned post-burn-in draws.

    Update order per sweep is weights -> factors -> loadings -> scales.
    Proposal adaptation happens in windows inside the burn-in only, so the
    stored draws come from a fixed transition kernel.
    """
    data = np.ascontiguousarray(data, dtype=float)
    n, p = data.shape
    started = time.perf_counter()
    g = stream.generator()
    state = init if init is not None else initial_state(spec, g, scale=init_scale, data=data)
    tau, priors = spec.tau, spec.priors
    sigma_update = _resolve_sigma_update(config.sigma_update, tau)

    proposal_sd = np.broadcast_to(np.asarray(config.proposal_sd, dtype=float), (p,)).copy()
    band = config.target_acceptance
    window = config.adapt_window
    window_accepts = np.zeros(p)
    window_rounds = 0
    recent_rates: list[np.ndarray] = []
    post_accepts = np.zeros(p)
    post_steps = 0

    n_stored = config.n_stored()
    store = {
        "beta": np.empty((n_stored, p, spec.k)),
        "factors": np.empty((n_stored, n, spec.k)),
        "sigma": np.empty((n_stored, p)),
        "weights": np.empty((n_stored, n)),
    }
    stored = 0

    beta, factors, sigma, weights = state.beta, state.factors, state.sigma, state.weights
    for sweep in range(1, config.iterations + 1):
        try:
            weights = update_weights(beta, factors, sigma, data, tau, g)
            factors = update_factors(beta, weights, sigma, data, tau, g)
            beta = update_loadings(factors, weights, sigma, data, tau, priors, g)
            if sigma_update == "gibbs":
                sigma = update_scales_gibbs(beta, factors, weights, data, tau, priors, g)
            else:
                sigma, accepted = update_scales_mh(
                    beta, factors, weights, sigma, data, tau, priors, proposal_sd, g
                )
                if sweep <= config.burn_in:
                    window_accepts += accepted
                    if sweep % window == 0:
                        window_rounds += 1
                        rate = window_accepts / window
                        recent_rates.append(rate)
                        proposal_sd = tune_proposal_sd(proposal_sd, rate, window_rounds, band)
                        window_accepts[:] = 0.0
                else:
                    post_accepts += accepted
                    post_steps += 1
        except (np.linalg.LinAlgError, FloatingPointError) as err:
            failure = NumericalError(f"sweep {sweep}: {err}")
            failure.partial_state = ChainState(beta, factors, sigma, weights)
            failure.sweep = sweep
            raise failure from err
        except (DataError, NumericalError) as err:
            err.partial_state = ChainState(beta, factors, sigma, weights)
            err.sweep = sweep
            raise

        if sweep > config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            store["beta"][stored] = beta
            store["factors"][stored] = factors
            store["sigma"][stored] = sigma
            store["weights"][stored] = weights
            stored += 1

    if sigma_update == "mh":
        if recent_rates:
            # judge the landing on the trailing few windows, not one noisy window
            trailing = np.mean(recent_rates[-4:], axis=0)
            off = (trailing < band[0]) | (trailing > band[1])
            if np.any(off):
                warnings.warn(
                    "proposal adaptation ended outside the target acceptance band "
                    f"for scales {np.flatnonzero(off).tolist()}",
                    RuntimeWarning,
                    stacklevel=2,
                )
        acceptance = post_accepts / max(post_steps, 1)
    else:
        acceptance = np.ones(p)

    return ChainResult(
        beta=store["beta"],
        factors=store["factors"],
        sigma=store["sigma"],
        weights=store["weights"],
        acceptance=acceptance,
        proposal_sd=proposal_sd,
        stream=stream,
        init_scale=init_scale,
        wall_time=time.perf_counter() - started,
    )


def run_parallel_chains(data, spec: ModelSpec, config: McmcConfig) -> PosteriorSample:
    """Run ``config.chains`` independent chains on non-overlapping streams.

    Chains start from deterministically overdispersed initial points.  A
    chain failure is recorded per chain and does not affect the others;
    the call fails only if no chain survives.
    """
    data = np.ascontiguousarray(data, dtype=float)
    problems = validate_spec(spec) + config.violations()
    if data.shape != (spec.n, spec.p):
        problems.append(f"data shape {data.shape} does not match spec (n={spec.n}, p={spec.p})")
    if problems:
        raise ConfigurationError("; ".join(problems))
    if not np.all(np.isfinite(data)):
        raise DataError("data contains non-finite values")

    base = RngStream(config.seed)
    chains: list[ChainResult] = []
    failures: list[tuple[int, str]] = []
    for c in range(config.chains):
        stream = base.derive(c)
        try:
            chains.append(
                run_chain(data, spec, config, stream, init_scale=_overdispersion_scale(c))
            )
        except (DataError, NumericalError) as err:
            failures.append((c, str(err)))
    if not chains:
        raise NumericalError(
            "all chains failed: " + "; ".join(f"chain {c}: {msg}" for c, msg in failures)
        )
    return PosteriorSample(
        spec=spec,
        config=config,
        chains=chains,
        failures=failures,
        sigma_update=_resolve_sigma_update(config.sigma_update, spec.tau),
    )


# ---------------------------------------------------------------------------
# Joint density (used to validate the conditionals)
# ---------------------------------------------------------------------------


def log_joint(state: ChainState, data, spec: ModelSpec) -> float:
    """Log density of (data, factors, weights, loadings, scales) under the model.

    The scale block enters through the Gamma density of ``1 / sigma_j**2``,
    matching the parameterisation the Metropolis step works in.  Constant
    terms independent of the state are included where they are cheap; the
    value is meant for *differences* between states.
    """
    beta = np.asarray(state.beta, dtype=float)
    factors = np.asarray(state.factors, dtype=float)
    sigma = np.asarray(state.sigma, dtype=float)
    weights = np.asarray(state.weights, dtype=float)
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    k = spec.k
    tau, priors = spec.tau, spec.priors

    if np.any(sigma <= 0) or np.any(weights <= 0):
        return -np.inf
    diag = np.diag(beta[:k, :k]) if k else np.array([])
    if np.any(diag <= 0) or any(np.any(beta[j, j + 1 :] != 0) for j in range(min(p, k))):
        return -np.inf

    location, scatter = al_location_scatter(sigma, tau)
    resid = data - factors @ beta.T - np.outer(weights, location)
    quad = (resid**2 / scatter).sum(axis=1) / weights
    obs = -0.5 * (
        quad + p * np.log(2.0 * np.pi) + p * np.log(weights) + np.log(scatter).sum()
    ).sum()

    weights_prior = -weights.sum()
    factors_prior = -0.5 * (factors**2).sum() - 0.5 * n * k * np.log(2.0 * np.pi)

    free = [beta[j, : min(j + 1, k)] for j in range(p)]
    n_free = sum(v.shape[0] for v in free)
    sq = sum(float(v @ v) for v in free)
    loadings_prior = (
        -0.5 * sq / priors.c0
        - 0.5 * n_free * np.log(2.0 * np.pi * priors.c0)
        + min(p, k) * np.log(2.0)  # half-normal doubling on the diagonal
    )

    inv_var = 1.0 / sigma**2
    shape, rate = priors.nu / 2.0, priors.nu * priors.s2 / 2.0
    scales_prior = (
        shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(inv_var) - rate * inv_var
    ).sum()

    return float(obs + weights_prior + factors_prior + loadings_prior + scales_prior)

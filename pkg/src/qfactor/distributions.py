"""Sampling and density primitives used by the samplers.

Univariate and multivariate asymmetric Laplace, generalized inverse
Gaussian (GIG), positive-truncated normal and Cholesky-based multivariate
normal draws.  All samplers accept an :class:`~qfactor.rng.RngStream` or a
``numpy.random.Generator`` and are vectorised over their parameters.

Conventions
-----------
* The univariate asymmetric Laplace ``AL(loc, scale, tau)`` has density
  ``tau * (1 - tau) / scale * exp(-check_loss(x - loc, tau) / scale)``;
  ``tau`` is both the skewness parameter and the probability mass left of
  ``loc``.
* The GIG density is taken proportional to
  ``x**(lam - 1) * exp(-(a * x + b / x) / 2)`` on ``x > 0``, i.e. ``a``
  penalises large values and ``b`` small ones.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, kve, ndtr, ndtri

from .rng import as_generator

__all__ = [
    "check_loss",
    "tau_constants",
    "asym_laplace_logpdf",
    "sample_asym_laplace",
    "sample_asym_laplace_mv",
    "gig_logpdf",
    "sample_gig",
    "sample_truncnorm_pos",
    "sample_mvn",
]


def _validate_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level tau must lie in (0, 1), got {tau}")
    return tau


def check_loss(u, tau):
    """Quantile check loss ``u * (tau - 1[u < 0])``.

    Non-negative, zero only at ``u = 0``, and piecewise linear with slope
    ``tau`` to the right of zero and ``tau - 1`` to the left.
    """
    tau = _validate_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return out if out.ndim else float(out)


def tau_constants(tau):
    """Location/scale coefficients of the normal-exponential AL mixture.

    Returns ``(a, b_sq)`` with ``a = (1 - 2 tau) / (tau (1 - tau))`` and
    ``b_sq = 2 / (tau (1 - tau))``; an ``AL(0, scale, tau)`` variable is
    ``scale * a * W + scale * sqrt(b_sq * W) * V`` for ``W ~ Exp(1)``,
    ``V ~ N(0, 1)``.
    """
    tau = _validate_tau(tau)
    denom = tau * (1.0 - tau)
    return (1.0 - 2.0 * tau) / denom, 2.0 / denom


def asym_laplace_logpdf(x, loc=0.0, scale=1.0, tau=0.5):
    """Log density of the univariate asymmetric Laplace distribution."""
    tau = _validate_tau(tau)
    scale = float(scale)
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    x = np.asarray(x, dtype=float)
    out = np.log(tau * (1.0 - tau) / scale) - check_loss(x - loc, tau) / scale
    return out if out.ndim else float(out)


def sample_asym_laplace(loc, scale, tau, rng, size=None):
    """Draw from ``AL(loc, scale, tau)`` via its normal-exponential mixture."""
    tau = _validate_tau(tau)
    if np.any(np.asarray(scale, dtype=float) <= 0):
        raise ValueError("scale must be positive")
    g = as_generator(rng)
    a, b_sq = tau_constants(tau)
    w = g.standard_exponential(size)
    v = g.standard_normal(size)
    return loc + scale * (a * w + np.sqrt(b_sq * w) * v)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower factor L with L @ L.T = cov, accepting singular PSD matrices."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        evals, evecs = np.linalg.eigh(cov)
        if evals[0] < -1e-10 * max(evals[-1], 1.0):
            raise ValueError("covariance is not positive semidefinite") from None
        return evecs * np.sqrt(np.clip(evals, 0.0, None))


def sample_mvn(mean, cov, rng, size=None):
    """Multivariate normal draws via a (pivoted-on-failure) Cholesky factor."""
    g = as_generator(rng)
    mean = np.asarray(mean, dtype=float)
    factor = _psd_factor(cov)
    shape = (mean.shape[0],) if size is None else (size, mean.shape[0])
    z = g.standard_normal(shape)
    return mean + z @ factor.T


def sample_asym_laplace_mv(location, scatter, rng, size=None):
    """Multivariate asymmetric Laplace draws ``location * W + sqrt(W) * V``.

    ``W ~ Exp(1)`` and ``V ~ N_p(0, scatter)``; the result has mean
    ``location`` and covariance ``location location' + scatter``.
    """
    g = as_generator(rng)
    location = np.asarray(location, dtype=float)
    factor = _psd_factor(scatter)
    n = 1 if size is None else size
    w = g.standard_exponential(n)
    v = g.standard_normal((n, location.shape[0])) @ factor.T
    x = location * w[:, None] + np.sqrt(w)[:, None] * v
    return x[0] if size is None else x


# ---------------------------------------------------------------------------
# Generalized inverse Gaussian
# ---------------------------------------------------------------------------


def _validate_gig_params(lam, a, b):
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
        raise ValueError("GIG parameters must be finite")
    if np.any(a <= 0):
        raise ValueError("GIG rate parameter a must be positive")
    if np.any(b < 0):
        raise ValueError("GIG inverse-rate parameter b must be non-negative")
    if np.any((b == 0) & (lam <= 0)):
        raise ValueError("GIG with b = 0 requires lam > 0 (Gamma limit)")
    return lam, a, b


def gig_logpdf(x, lam, a, b):
    """Log density of GIG(lam, a, b), normalised via Bessel K functions."""
    lam, a, b = _validate_gig_params(lam, a, b)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    if np.all(b == 0):
        shape, rate = lam, a / 2.0
        out = shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * logx - rate * x
    else:
        omega = np.sqrt(a * b)
        # log K_lam(omega) = log kve(lam, omega) - omega
        log_norm = (lam / 2.0) * (np.log(a) - np.log(b)) - np.log(2.0) - (np.log(kve(lam, omega)) - omega)
        out = log_norm + (lam - 1.0) * logx - 0.5 * (a * x + b / x)
    out = np.where(x > 0, out, -np.inf)
    return out if out.ndim else float(out)


def _gig_psi(x, alpha, lam):
    return -alpha * (np.cosh(x) - 1.0) - lam * (np.expm1(x) - x)


def _gig_dpsi(x, alpha, lam):
    return -alpha * np.sinh(x) - lam * np.expm1(x)


def _sample_gig_two_param(lam, omega, g):
    """Vectorised rejection sampler for density prop. to z**(lam-1) exp(-omega (z + 1/z) / 2).

    Requires lam >= 0 and omega > 0.  Works on the log scale with the
    three-piece hat of Devroye's ratio method; the expected number of
    proposal rounds is uniformly bounded over the parameter range.
    """
    # alpha computed in subtraction-free form to survive omega << lam
    alpha = omega**2 / (np.sqrt(omega**2 + lam**2) + lam)

    x1 = -_gig_psi(1.0, alpha, lam)
    t = np.where(
        (x1 >= 0.5) & (x1 <= 2.0),
        1.0,
        np.where(x1 > 2.0, np.sqrt(2.0 / (alpha + lam)), np.log(4.0 / (alpha + 2.0 * lam))),
    )
    x2 = -_gig_psi(-1.0, alpha, lam)
    with np.errstate(divide="ignore"):
        inv_alpha = 1.0 / alpha
        s_small = np.log1p(inv_alpha + np.sqrt(inv_alpha**2 + 2.0 * inv_alpha))
        s_cap = np.where(lam > 0, 1.0 / np.maximum(lam, 1e-300), np.inf)
    s = np.where(
        (x2 >= 0.5) & (x2 <= 2.0),
        1.0,
        np.where(
            x2 > 2.0,
            np.sqrt(4.0 / (alpha * np.cosh(1.0) + lam)),
            np.minimum(s_cap, s_small),
        ),
    )

    eta = -_gig_psi(t, alpha, lam)
    zeta = -_gig_dpsi(t, alpha, lam)
    theta = -_gig_psi(-s, alpha, lam)
    xi = _gig_dpsi(-s, alpha, lam)
    inv_xi = 1.0 / xi
    inv_zeta = 1.0 / zeta
    td = t - inv_zeta * eta
    sd = s - inv_xi * theta
    q = td + sd
    total = inv_xi + q + inv_zeta

    n = lam.shape[0]
    y = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        u = g.random(pending.size)
        v = g.random(pending.size)
        w = g.random(pending.size)
        al, lm = alpha[pending], lam[pending]
        tp, sp = t[pending], s[pending]
        tdp, sdp, qp = td[pending], sd[pending], q[pending]
        cut = u * total[pending]
        with np.errstate(divide="ignore"):
            logv = np.log(v)
        cand = np.where(
            cut < qp,
            -sdp + qp * v,
            np.where(cut < qp + inv_zeta[pending], tdp - inv_zeta[pending] * logv, -sdp + inv_xi[pending] * logv),
        )
        hat = np.where(
            (cand >= -sdp) & (cand <= tdp),
            1.0,
            np.where(
                cand > tdp,
                np.exp(-eta[pending] - zeta[pending] * (cand - tp)),
                np.exp(-theta[pending] + xi[pending] * (cand + sp)),
            ),
        )
        ok = w * hat <= np.exp(_gig_psi(cand, al, lm))
        y[pending[ok]] = cand[ok]
        pending = pending[~ok]

    ratio = lam / omega
    return np.exp(y) * (ratio + np.sqrt(1.0 + ratio**2))


def sample_gig(lam, a, b, rng, size=None):
    """Draw from the GIG distribution with density prop. to ``x**(lam-1) exp(-(a x + b / x)/2)``.

    Parameters broadcast against each other (and against ``size``); ``b = 0``
    with ``lam > 0`` falls back to the exact Gamma(lam, rate a/2) limit.
    Returns a scalar when all inputs are scalars and ``size`` is None.
    """
    lam, a, b = _validate_gig_params(lam, a, b)
    g = as_generator(rng)
    scalar = size is None and lam.ndim == 0 and a.ndim == 0 and b.ndim == 0
    shape = np.broadcast_shapes(lam.shape, a.shape, b.shape, () if size is None else (size,))
    lam, a, b = (np.broadcast_to(arr, shape).ravel() for arr in (lam, a, b))
    out = np.empty(lam.shape[0])

    gamma_mask = b == 0
    if gamma_mask.any():
        out[gamma_mask] = g.gamma(lam[gamma_mask], 2.0 / a[gamma_mask])
    rest = ~gamma_mask
    if rest.any():
        lam_r, a_r, b_r = lam[rest], a[rest], b[rest]
        omega = np.sqrt(np.maximum(a_r * b_r, 1e-300))
        flip = lam_r < 0
        z = _sample_gig_two_param(np.abs(lam_r), omega, g)
        z[flip] = 1.0 / z[flip]
        out[rest] = z * np.sqrt(b_r / a_r)

    if scalar:
        return float(out[0])
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# Positive-truncated normal
# ---------------------------------------------------------------------------

#: standardized cut beyond which the inverse-CDF loses the tail to underflow
_DEEP_TRUNCATION_CUT = 30.0


def sample_truncnorm_pos(mean, variance, rng, size=None):
    """Draw from ``N(mean, variance)`` conditioned on the positive half line.

    Uses tail-safe inverse-CDF sampling for mild truncation and switches to
    an exponential-proposal rejection step (Robert's method) when the
    truncation point lies deep in the upper tail of the standardised scale.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    g = as_generator(rng)
    scalar = size is None and mean.ndim == 0 and variance.ndim == 0
    shape = np.broadcast_shapes(mean.shape, variance.shape, () if size is None else (size,))
    mean = np.broadcast_to(mean, shape).ravel()
    sd = np.sqrt(np.broadcast_to(variance, shape)).ravel()
    alpha = -mean / sd

    z = np.empty(alpha.shape[0])
    mild = alpha <= _DEEP_TRUNCATION_CUT
    idx = np.flatnonzero(mild)
    while idx.size:
        tail = ndtr(-alpha[idx])
        z[idx] = -ndtri((1.0 - g.random(idx.size)) * tail)
        # redraw the (measure-zero) boundary hits so draws stay strictly positive
        idx = idx[z[idx] <= alpha[idx]]

    deep = np.flatnonzero(~mild)
    while deep.size:
        al = alpha[deep]
        rate = 0.5 * (al + np.sqrt(al**2 + 4.0))
        cand = al + g.standard_exponential(deep.size) / rate
        ok = (g.random(deep.size) <= np.exp(-0.5 * (cand - rate) ** 2)) & (cand > al)
        z[deep[ok]] = cand[ok]
        deep = deep[~ok]

    # sd * (z - alpha) == mean + sd * z, but stays strictly positive in floats
    out = sd * (z - alpha)
    if scalar:
        return float(out[0])
    return out.reshape(shape)

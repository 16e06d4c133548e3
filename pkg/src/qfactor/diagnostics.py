"""Convergence diagnostics: split-chain PSRF and effective sample size."""

from __future__ import annotations

import numpy as np

__all__ = [
    "potential_scale_reduction",
    "effective_sample_size",
    "summarize_scalar",
    "sample_diagnostics",
]


def _split_chains(chains: np.ndarray) -> np.ndarray:
    """Split every chain in half (dropping one draw when odd)."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    half = chains.shape[1] // 2
    return np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)


def potential_scale_reduction(chains) -> float:
    """Split-chain potential scale reduction factor (Gelman-Rubin R-hat).

    ``chains`` is (n_chains, n_draws); a single chain is allowed because
    splitting yields two sequences.  Returns ``inf`` when the within-chain
    variance is zero but the sequences disagree, and 1.0 when all draws
    are identical.
    """
    split = _split_chains(chains)
    m, length = split.shape
    if length < 4:
        raise ValueError("potential_scale_reduction needs at least 4 draws per split chain")
    chain_means = split.mean(axis=1)
    between = length * chain_means.var(ddof=1)
    within = split.var(axis=1, ddof=1).mean()
    if within == 0.0:
        return 1.0 if between == 0.0 else np.inf
    var_plus = (length - 1) / length * within + between / length
    return float(np.sqrt(var_plus / within))


def effective_sample_size(draws) -> float:
    """ESS of a scalar chain: ``N / (1 + 2 sum of autocorrelations)``.

    Autocorrelations are summed over Geyer initial positive pairs
    ``rho[2t] + rho[2t+1]`` until the first non-positive pair.  Input may
    be (n_draws,) or (n_chains, n_draws); chains contribute additively.
    A constant sequence returns the 0 sentinel.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 2:
        return float(sum(effective_sample_size(row) for row in draws))
    n = draws.shape[0]
    if n < 10:
        raise ValueError("effective_sample_size needs at least 10 draws")
    centered = draws - draws.mean()
    variance = centered @ centered / n
    if variance == 0.0:
        return 0.0
    # FFT autocovariance, biased normalisation (divides by n)
    size = int(2 ** np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n].real / n
    rho = acov / acov[0]
    tail = 0.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tail += pair
        t += 2
    return float(n / (1.0 + 2.0 * tail))


def summarize_scalar(chains) -> dict:
    """Per-chain mean/sd/quantile trace summary of one scalar parameter."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    quantiles = np.quantile(chains, [0.025, 0.5, 0.975], axis=1)
    return {
        "mean": chains.mean(axis=1).tolist(),
        "sd": chains.std(axis=1, ddof=1).tolist(),
        "q2.5": quantiles[0].tolist(),
        "median": quantiles[1].tolist(),
        "q97.5": quantiles[2].tolist(),
    }


def sample_diagnostics(sample) -> dict:
    """PSRF and ESS for every identifiable scalar of a posterior sample.

    Diagnoses the free loadings and the scales; the latent factors and
    mixture weights are high-dimensional incidental parameters and are
    deliberately not listed parameter-by-parameter.
    """
    p, k = sample.spec.p, sample.spec.k
    per_chain_beta = [c.beta for c in sample.chains]
    per_chain_sigma = [c.sigma for c in sample.chains]
    out = {}
    for j in range(p):
        for l in range(min(j + 1, k)):
            series = np.stack([b[:, j, l] for b in per_chain_beta])
            out[f"beta[{j + 1},{l + 1}]"] = {
                "psrf": potential_scale_reduction(series),
                "ess": effective_sample_size(series),
            }
    for j in range(p):
        series = np.stack([s[:, j] for s in per_chain_sigma])
        out[f"sigma[{j + 1}]"] = {
            "psrf": potential_scale_reduction(series),
            "ess": effective_sample_size(series),
        }
    return out

"""Command-line front end: simulate, fit, qcor, compare, diagnose.

All commands are deterministic given their inputs, configuration and seed;
floats are written with 17 significant digits so files round-trip
bit-exactly.  Exit codes: 0 ok, 2 configuration error, 3 data error,
4 numerical failure, 5 I/O failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from .errors import ConfigurationError, DataError, NumericalError, QFactorError
from .estimator import MODEL_FAMILY, SUMMARY_SCHEMA_VERSION, QuantileFactorModel
from .model import ModelSpec, PriorHyper
from .quantreg import STRONG_THRESHOLD, WEAK_THRESHOLD, quantile_correlation_curve
from .rng import RngStream
from .sampler import McmcConfig
from .synthetic import gen_case1, gen_case2, gen_qfm

__all__ = ["cli", "main"]

_CRITERIA_COLUMNS = ("ICOMP", "AIC", "BIC", "BIC_star", "RPS", "MAE", "MSE")


def _fmt(value: float) -> str:
    """17-significant-digit decimal, round-trippable for IEEE-754 doubles."""
    return format(float(value), ".17g")


def _jsonify(obj):
    """Make a structure JSON-clean: numpy scalars to Python, non-finite to strings."""
    if isinstance(obj, dict):
        return {key: _jsonify(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(val) for val in obj]
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        if math.isnan(val):
            return "nan"
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        return val
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    return obj


def _dump_json(obj, path: Path) -> None:
    text = json.dumps(_jsonify(obj), indent=2, sort_keys=True) + "\n"
    _write_text(path, text)


def _write_text(path: Path, text: str) -> None:
    # OSError propagates to main(), which maps it to exit code 5
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_config(path: str | None, allowed: set[str]) -> dict:
    if path is None:
        return {}
    raw = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def _read_data_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV with an optional header row; returns (names, matrix)."""
    text = Path(path).read_text(encoding="utf-8")
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows:
        raise DataError(f"data file {path} is empty")

    def parse(row):
        try:
            return [float(cell) for cell in row]
        except ValueError:
            return None

    first = parse(rows[0])
    if first is None:
        names = [cell.strip() for cell in rows[0]]
        body = rows[1:]
    else:
        names = [f"y{i + 1}" for i in range(len(rows[0]))]
        body = rows
    width = len(names)
    data = []
    for i, row in enumerate(body):
        values = parse(row)
        if values is None or len(values) != width:
            raise DataError(f"data file {path}: row {i + 2 if first is None else i + 1} is not a {width}-column numeric row")
        data.append(values)
    if not data:
        raise DataError(f"data file {path} has no data rows")
    matrix = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"data file {path} contains non-finite values")
    return names, matrix


def _write_matrix_csv(path: Path, names: list[str], matrix: np.ndarray) -> None:
    lines = [",".join(names)]
    lines.extend(",".join(_fmt(v) for v in row) for row in matrix)
    _write_text(path, "\n".join(lines) + "\n")


@click.group()
def cli():
    """Bayesian quantile factor models: simulation, fitting, quantile
    correlation and model comparison."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SIMULATE_KEYS = {
    "case1": {"threshold", "contamination_var"},
    "case2": {"dof"},
    "qfm": {"tau", "beta", "sigma"},
}


@cli.command()
@click.argument("scenario", type=click.Choice(["case1", "case2", "qfm"]))
@click.option("--n", type=int, required=True, help="Number of observations.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--truth-out", type=click.Path(dir_okay=False), default=None, help="Also write the generating parameters (qfm scenario).")
@click.option("--config", "config_path", type=click.Path(exists=False), default=None, help="JSON with scenario-specific parameters.")
def simulate(scenario, n, seed, out_path, truth_out, config_path):
    """Write a synthetic dataset as CSV with header y1..yp."""
    cfg = _load_config(config_path, _SIMULATE_KEYS[scenario])
    stream = RngStream(seed)
    truth = None
    if scenario == "case1":
        data = gen_case1(n, stream, threshold=cfg.get("threshold", -0.4), contamination_var=cfg.get("contamination_var", 9.0))
    elif scenario == "case2":
        data = gen_case2(n, stream, dof=cfg.get("dof", 2.5))
    else:
        missing = {"tau", "beta", "sigma"} - set(cfg)
        if missing:
            raise ConfigurationError(f"qfm scenario config must provide: {', '.join(sorted(missing))}")
        beta = np.asarray(cfg["beta"], dtype=float)
        sigma = np.asarray(cfg["sigma"], dtype=float)
        spec = ModelSpec(n=n, p=beta.shape[0], k=beta.shape[1], tau=float(cfg["tau"]))
        data, truth = gen_qfm(spec, beta, sigma, stream)
    names = [f"y{i + 1}" for i in range(data.shape[1])]
    _write_matrix_csv(Path(out_path), names, data)
    if truth_out is not None:
        record = {"scenario": scenario, "n": n, "seed": seed}
        if truth is not None:
            record.update(
                tau=float(cfg["tau"]),
                beta=truth.beta.tolist(),
                sigma=truth.sigma.tolist(),
                factors=truth.factors.tolist(),
                weights=truth.weights.tolist(),
            )
        _dump_json(record, Path(truth_out))
    click.echo(f"wrote {data.shape[0]}x{data.shape[1]} dataset to {out_path}", err=True)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

_FIT_KEYS = {
    "tau", "k", "iterations", "burn_in", "thin", "chains", "seed",
    "proposal_sd", "sigma_update", "c0", "nu", "s2", "rps_draws",
}


def _write_draws_csv(path: Path, sample, store_latent: bool) -> None:
    # parameter names contain commas (beta[j,l]), so that field is quoted
    config = sample.config
    lines = ["chain,iter,param,value"]
    for c, chain in enumerate(sample.chains, start=1):
        n_stored = chain.beta.shape[0]
        p, k = chain.beta.shape[1], chain.beta.shape[2]
        n = chain.factors.shape[1]
        for t in range(n_stored):
            sweep = config.burn_in + (t + 1) * config.thin
            prefix = f"{c},{sweep},"
            for j in range(p):
                for l in range(min(j + 1, k)):
                    lines.append(f'{prefix}"beta[{j + 1},{l + 1}]",{_fmt(chain.beta[t, j, l])}')
            for j in range(p):
                lines.append(f"{prefix}sigma[{j + 1}],{_fmt(chain.sigma[t, j])}")
            if store_latent:
                for i in range(n):
                    for l in range(k):
                        lines.append(f'{prefix}"f[{i + 1},{l + 1}]",{_fmt(chain.factors[t, i, l])}')
                for i in range(n):
                    lines.append(f"{prefix}w[{i + 1}],{_fmt(chain.weights[t, i])}")
    _write_text(path, "\n".join(lines) + "\n")


@cli.command()
@click.argument("data_path", metavar="DATA", type=click.Path(exists=False))
@click.option("--tau", type=float, default=None, help="Quantile level in (0, 1).")
@click.option("--k", type=int, default=None, help="Number of latent factors.")
@click.option("--iters", type=int, default=None)
@click.option("--burnin", type=int, default=None)
@click.option("--thin", type=int, default=None)
@click.option("--chains", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--store-latent", is_flag=True, help="Also write factor and weight draws.")
@click.option("--paper-protocol", is_flag=True, help="Use the long protocol (160k/10k/thin 50).")
def fit(data_path, tau, k, iters, burnin, thin, chains, seed, config_path, out_dir, store_latent, paper_protocol):
    """Fit the quantile factor model to DATA; write draws.csv and summary.json."""
    cfg = _load_config(config_path, _FIT_KEYS)
    defaults = McmcConfig.paper_protocol() if paper_protocol else McmcConfig()

    def pick(flag, key, fallback):
        if flag is not None:
            return flag
        return cfg.get(key, fallback)

    params = dict(
        tau=float(pick(tau, "tau", 0.5)),
        n_factors=int(pick(k, "k", 1)),
        iterations=int(pick(iters, "iterations", defaults.iterations)),
        burn_in=int(pick(burnin, "burn_in", defaults.burn_in)),
        thin=int(pick(thin, "thin", defaults.thin)),
        chains=int(pick(chains, "chains", defaults.chains)),
        seed=int(pick(seed, "seed", 0)),
        proposal_sd=float(cfg.get("proposal_sd", 0.5)),
        sigma_update=str(cfg.get("sigma_update", "auto")),
        c0=float(cfg.get("c0", 100.0)),
        nu=float(cfg.get("nu", 0.02)),
        s2=float(cfg.get("s2", 1.0)),
    )
    rps_draws = cfg.get("rps_draws")

    _, data = _read_data_csv(data_path)
    started = time.perf_counter()
    model = QuantileFactorModel(**params).fit(data)
    summary = model.summary(n_draws=rps_draws)
    out = Path(out_dir)
    _write_draws_csv(out / "draws.csv", model.sample_, store_latent)
    _dump_json(summary, out / "summary.json")
    click.echo(
        f"fit tau={params['tau']} k={params['n_factors']} ({model.sample_.n_draws} draws, "
        f"{time.perf_counter() - started:.1f}s) -> {out}",
        err=True,
    )


# ---------------------------------------------------------------------------
# qcor
# ---------------------------------------------------------------------------

_QCOR_KEYS = {"taus", "iterations", "burn_in", "thin", "seed", "proposal_sd", "c0", "nu", "s2"}


@cli.command()
@click.argument("data_path", metavar="DATA", type=click.Path(exists=False))
@click.option("--pair", type=(int, int), default=None, help="1-based column pair; default all pairs.")
@click.option("--taus", default="0.1,0.25,0.5,0.75,0.9", show_default=True, help="Comma-separated quantile levels.")
@click.option("--iters", type=int, default=None)
@click.option("--burnin", type=int, default=None)
@click.option("--thin", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def qcor(data_path, pair, taus, iters, burnin, thin, seed, config_path, out_path):
    """Bayesian quantile correlation per pair and quantile level (JSON table)."""
    cfg = _load_config(config_path, _QCOR_KEYS)
    names, data = _read_data_csv(data_path)
    p = data.shape[1]
    if p < 2:
        raise DataError("quantile correlation needs at least 2 columns")
    try:
        tau_grid = [float(t) for t in str(cfg.get("taus", taus)).split(",") if t.strip()]
    except ValueError as err:
        raise ConfigurationError(f"cannot parse tau grid: {err}") from err
    config = McmcConfig(
        iterations=int(iters if iters is not None else cfg.get("iterations", 5_000)),
        burn_in=int(burnin if burnin is not None else cfg.get("burn_in", 1_000)),
        thin=int(thin if thin is not None else cfg.get("thin", 2)),
        chains=1,
        seed=int(seed if seed is not None else cfg.get("seed", 0)),
        proposal_sd=float(cfg.get("proposal_sd", 0.5)),
    )
    priors = PriorHyper(c0=float(cfg.get("c0", 100.0)), nu=float(cfg.get("nu", 0.02)), s2=float(cfg.get("s2", 1.0)))
    if pair is not None:
        lo, hi = pair
        if not (1 <= lo <= p and 1 <= hi <= p and lo != hi):
            raise ConfigurationError(f"--pair must name two distinct columns in 1..{p}")
        pairs = [(lo - 1, hi - 1)]
    else:
        pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]

    base = RngStream(config.seed)
    table = []
    for index, (i, j) in enumerate(pairs):
        estimates = quantile_correlation_curve(
            data[:, i], data[:, j], tau_grid, config, base.derive(index), priors
        )
        table.append(
            {
                "pair": [i + 1, j + 1],
                "names": [names[i], names[j]],
                "estimates": [
                    {
                        "tau": est.tau,
                        "mean": est.mean,
                        "q2.5": est.interval[0],
                        "q97.5": est.interval[1],
                        "band": est.band,
                        "negative_product_fraction": est.negative_product_fraction,
                    }
                    for est in estimates
                ],
            }
        )
    _dump_json(
        {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "taus": tau_grid,
            "band_thresholds": {"weak_below": WEAK_THRESHOLD, "strong_above": STRONG_THRESHOLD},
            "pairs": table,
        },
        Path(out_path),
    )
    click.echo(f"wrote quantile correlations for {len(pairs)} pair(s) to {out_path}", err=True)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("summaries", nargs=-1, type=click.Path(exists=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def compare(summaries, out_path):
    """Tabulate comparison criteria from two or more fit summaries (CSV)."""
    if len(summaries) < 2:
        raise ConfigurationError("compare needs at least 2 summary files")
    rows = []
    for path in summaries:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise DataError(f"summary {path} is not valid JSON: {err}") from err
        version = payload.get("schema_version")
        if not isinstance(version, int) or version != SUMMARY_SCHEMA_VERSION:
            raise ConfigurationError(
                f"summary {path} has schema_version {version!r}; this reader handles {SUMMARY_SCHEMA_VERSION}"
            )
        rows.append(
            {
                "source": path,
                "family": payload.get("family", MODEL_FAMILY),
                "tau": payload["model"]["tau"],
                "k": payload["model"]["k"],
                "criteria": payload["criteria"],
            }
        )

    families = {row["family"] for row in rows}
    from .criteria import CROSS_FAMILY_WARNING

    if len(families) > 1:
        click.echo(f"warning: {CROSS_FAMILY_WARNING}", err=True)

    minima = {}
    for col in _CRITERIA_COLUMNS:
        values = [row["criteria"].get(col) for row in rows]
        numeric = [v for v in values if isinstance(v, (int, float))]
        minima[col] = min(numeric) if numeric else None

    header = ["source", "family", "tau", "k", *_CRITERIA_COLUMNS]
    header += [f"is_min_{c}" for c in _CRITERIA_COLUMNS]
    lines = [",".join(header)]
    for row in rows:
        cells = [row["source"], row["family"], _fmt(row["tau"]), str(row["k"])]
        for col in _CRITERIA_COLUMNS:
            val = row["criteria"].get(col)
            cells.append(_fmt(val) if isinstance(val, (int, float)) else "")
        for col in _CRITERIA_COLUMNS:
            val = row["criteria"].get(col)
            flag = isinstance(val, (int, float)) and minima[col] is not None and val == minima[col]
            cells.append("true" if flag else "false")
        lines.append(",".join(cells))
    _write_text(Path(out_path), "\n".join(lines) + "\n")
    click.echo(f"wrote criteria table for {len(rows)} fits to {out_path}", err=True)


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("draws_path", metavar="DRAWS", type=click.Path(exists=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def diagnose(draws_path, out_path):
    """Convergence report (split-chain PSRF, ESS, trace summaries) from a draws CSV."""
    from .diagnostics import effective_sample_size, potential_scale_reduction, summarize_scalar

    text = Path(draws_path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["chain", "iter", "param", "value"]:
        raise DataError("draws file must have columns chain,iter,param,value")
    series: dict[str, dict[int, list[float]]] = {}
    for row in reader:
        if not row:
            continue
        if len(row) != 4:
            raise DataError(f"malformed draws row: {row}")
        try:
            chain, value = int(row[0]), float(row[3])
        except ValueError as err:
            raise DataError(f"malformed draws row {row}: {err}") from err
        series.setdefault(row[2], {}).setdefault(chain, []).append(value)

    parameters = {}
    for param in sorted(series):
        chains = [np.asarray(series[param][c]) for c in sorted(series[param])]
        lengths = {len(c) for c in chains}
        if len(lengths) != 1:
            raise DataError(f"parameter {param} has unequal chain lengths {sorted(lengths)}")
        stacked = np.stack(chains)
        latent = param.startswith(("f[", "w["))
        entry = {
            "psrf": potential_scale_reduction(stacked),
            "ess": effective_sample_size(stacked),
            "per_chain": summarize_scalar(stacked),
        }
        if latent:
            entry["note"] = "high-dimensional latent quantity; interpret marginally"
        parameters[param] = entry
    _dump_json({"schema_version": SUMMARY_SCHEMA_VERSION, "parameters": parameters}, Path(out_path))
    click.echo(f"wrote diagnostics for {len(parameters)} parameters to {out_path}", err=True)


def main(argv=None) -> int:
    """Entry point with error-to-exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as err:
        err.show()
        return 2
    except click.exceptions.Abort:
        return 130
    except ConfigurationError as err:
        click.echo(f"configuration error: {err}", err=True)
        return err.exit_code
    except DataError as err:
        click.echo(f"data error: {err}", err=True)
        return err.exit_code
    except NumericalError as err:
        click.echo(f"numerical failure: {err}", err=True)
        return err.exit_code
    except QFactorError as err:
        click.echo(f"error: {err}", err=True)
        return err.exit_code
    except OSError as err:
        click.echo(f"i/o error: {err}", err=True)
        return 5


if __name__ == "__main__":
    sys.exit(main())

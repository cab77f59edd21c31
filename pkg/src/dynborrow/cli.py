"""Command-line interface: dataset ingestion, analysis reports, the
simulation harness driver, and analytic MSE curves.

Exit codes: 0 success, 2 input/config problems (missing or non-numeric
columns, bad config files), 3 degenerate samples.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import secrets
import sys

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path
from typing import Optional, Tuple

import click
import numpy as np
import pandas as pd

from . import __version__
from .bboot import IntervalMethod, interval, run_many
from .core import (
    ControlSample,
    DatasetError,
    DegenerateSample,
    DegenerateVariance,
    DegenerateWeights,
    DynborrowError,
    InvalidConfig,
    OutcomeKind,
)
from .ipw import balance, fit_ps, ipw_weights
from .posterior import mse_profile, optimal_a
from .rules import BorrowingRule
from .sim import MetricsRow, ScenarioConfig, run_scenario

_LEVEL = 0.95


@dataclass(frozen=True)
class DatasetSpec:
    """Where one or more samples live in a CSV file.

    Either the whole file is one source (arm_column None) or an arm column
    splits it, with arm_values mapping source labels ("internal",
    "external", "treated") to the column's values.
    """

    path: str
    outcome: str
    covariates: Tuple[str, ...] = ()
    arm_column: Optional[str] = None
    arm_values: Optional[dict] = None

    def load(self, kind: OutcomeKind, source_label: str = "internal"):
        """Return {source_label: ControlSample}."""
        frame = _read_columns(self.path, self.outcome, self.covariates,
                              extra=(self.arm_column,) if self.arm_column else ())
        if self.arm_column is None:
            return {source_label: _build_sample(frame, self, kind, source_label)}
        if not self.arm_values:
            raise DatasetError("arm_column requires an arm_values mapping")
        out = {}
        for label, value in self.arm_values.items():
            part = frame[frame[self.arm_column] == value]
            out[label] = _build_sample(part, self, kind, label)
        return out


def _read_columns(path, outcome, covariates, extra=()):
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DatasetError(f"{path}: file not found")
    except Exception as exc:
        raise DatasetError(f"{path}: unreadable CSV ({exc})")
    needed = [outcome, *covariates, *extra]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DatasetError(
            f"{path}: missing column(s) {', '.join(repr(c) for c in missing)} "
            f"(available: {', '.join(map(str, frame.columns))})")
    return frame


def _numeric(frame, column, path):
    raw = frame[column]
    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna() & raw.notna()
    if bad.any():
        raise DatasetError(f"{path}: column {column!r} contains non-numeric values")
    if values.isna().any():
        raise DatasetError(f"{path}: column {column!r} contains missing values "
                           "(missing outcomes/covariates are rejected, not imputed)")
    return values.to_numpy(dtype=np.float64)


def _build_sample(frame, spec: DatasetSpec, kind: OutcomeKind,
                  source_label: str) -> ControlSample:
    y = _numeric(frame, spec.outcome, spec.path)
    x = None
    if spec.covariates:
        x = np.column_stack([_numeric(frame, c, spec.path) for c in spec.covariates])
    if kind is OutcomeKind.BINARY and not np.all((y == 0.0) | (y == 1.0)):
        raise DatasetError(
            f"{spec.path}: outcome declared binary but contains values other than 0/1")
    return ControlSample(outcomes=y, kind=kind, covariates=x,
                         source_label=source_label)


def _detect_kind(choice: str, outcome_vectors) -> OutcomeKind:
    if choice != "auto":
        return OutcomeKind.from_string(choice)
    for y in outcome_vectors:
        if not np.all((y == 0.0) | (y == 1.0)):
            return OutcomeKind.CONTINUOUS
    return OutcomeKind.BINARY


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is None:
        seed = secrets.randbits(63)
        click.echo(f"seed: {seed}", err=True)
    return int(seed)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    degenerate = (DegenerateSample, DegenerateWeights, DegenerateVariance)
    sys.exit(3 if isinstance(exc, degenerate) else 2)


@click.group()
@click.version_option(version=__version__, prog_name="dynborrow")
def main():
    """Dynamic borrowing of external controls: analysis, simulation, curves."""


@main.command("analyze")
@click.option("--internal", "internal_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV with the internal control sample.")
@click.option("--external", "external_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV with the external control sample.")
@click.option("--treated", "treated_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Optional CSV with the treated arm (adds the effect estimate).")
@click.option("--outcome", required=True, help="Outcome column name.")
@click.option("--covariates", default=None,
              help="Comma-separated covariate column names (required with --ipw).")
@click.option("--rule", "rule_names", multiple=True,
              type=click.Choice(["maxml", "cminmse", "minmse"]),
              default=("minmse",), show_default=True,
              help="Borrowing rule; repeat the flag to compare several on shared draws.")
@click.option("--eta", default=1.0, show_default=True,
              help="Bias weight in the minMSE objective.")
@click.option("--cap", default=1.0, show_default=True,
              help="Cap on the external contribution (fraction of internal weight).")
@click.option("--boots", default=1000, show_default=True, help="Bootstrap replicates.")
@click.option("--seed", default=None, type=int,
              help="RNG seed; generated and printed when omitted.")
@click.option("--ipw", is_flag=True, help="Propensity-weight the external sample.")
@click.option("--outcome-kind", default="auto",
              type=click.Choice(["auto", "continuous", "binary"]), show_default=True,
              help="Outcome type; auto requires {0,1}-only columns for binary.")
@click.option("--grid-points", default=51, show_default=True,
              help="Grid size for the binomial maxML discount search.")
@click.option("--format", "fmt", default="json",
              type=click.Choice(["json", "csv"]), show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the report here instead of stdout.")
def cmd_analyze(internal_path, external_path, treated_path, outcome, covariates,
                rule_names, eta, cap, boots, seed, ipw, outcome_kind,
                grid_points, fmt, out):
    """Analyze one dataset: borrowing amount, posterior draws, intervals."""
    try:
        _analyze(internal_path, external_path, treated_path, outcome, covariates,
                 rule_names, eta, cap, boots, seed, ipw, outcome_kind,
                 grid_points, fmt, out)
    except DynborrowError as exc:
        _fail(exc)


def _analyze(internal_path, external_path, treated_path, outcome, covariates,
             rule_names, eta, cap, boots, seed, ipw, outcome_kind,
             grid_points, fmt, out):
    cov_names = tuple(c.strip() for c in covariates.split(",")) if covariates else ()
    if ipw and not cov_names:
        raise InvalidConfig("--ipw requires --covariates")
    if grid_points < 1:
        raise InvalidConfig("--grid-points must be >= 1")
    seed = _resolve_seed(seed)

    paths = {"internal": internal_path, "external": external_path}
    if treated_path:
        paths["treated"] = treated_path
    frames = {label: _read_columns(p, outcome, cov_names)
              for label, p in paths.items()}
    kind = _detect_kind(outcome_kind,
                        [_numeric(f, outcome, paths[l]) for l, f in frames.items()])
    samples = {
        label: _build_sample(frames[label],
                             DatasetSpec(path=paths[label], outcome=outcome,
                                         covariates=cov_names),
                             kind, label)
        for label in paths
    }
    d0, d1 = samples["internal"], samples["external"]
    dt = samples.get("treated")

    rules = [BorrowingRule.from_name(name, eta=eta, cap=cap) for name in rule_names]
    grid = np.arange(grid_points) / max(grid_points - 1, 1)
    results = run_many(d0, d1, rules, boots, seed, dt=dt, use_ipw=ipw, grid=grid)

    report = {
        "version": __version__,
        "outcome_kind": kind.value,
        "n": {label: samples[label].n for label in samples},
        "rules": {},
    }
    for name, draws in zip(rule_names, results):
        entry = {
            "eta": float(eta),
            "cap": float(cap),
            "mu_c": _estimate_block(draws.mu_c, draws.point),
            "a": {
                "mean": float(draws.a_star.mean()),
                "sd": float(draws.a_star.std(ddof=1)),
                "capped_fraction": float(draws.capped_fraction),
                "degenerate_count": int(draws.degenerate_count),
            },
        }
        if draws.tau is not None:
            entry["tau"] = _estimate_block(draws.tau, draws.tau_point)
        report["rules"][name] = entry
    if ipw:
        model = fit_ps(d0.covariates, d1.covariates)
        table = balance(d0.covariates, d1.covariates,
                        ipw_weights(model, d1.covariates), names=cov_names)
        report["balance"] = list(table.rows())
    report["metadata"] = {
        "seed": seed,
        "boots": int(boots),
        "rules": list(rule_names),
        "eta": float(eta),
        "cap": float(cap),
        "grid_points": int(grid_points),
        "ipw": bool(ipw),
        "level": _LEVEL,
        "outcome": outcome,
        "covariates": list(cov_names),
        "inputs": {label: {"path": str(p), "sha256": _sha256(p)}
                   for label, p in paths.items()},
    }

    if fmt == "json":
        _emit(json.dumps(report, indent=2) + "\n", out)
    else:
        _emit(_analyze_csv(report, rule_names), out)


def _estimate_block(draws_vec: np.ndarray, point: float) -> dict:
    iv_n = interval(draws_vec, point, IntervalMethod.NORMAL_APPROX, _LEVEL)
    iv_p = interval(draws_vec, point, IntervalMethod.PERCENTILE, _LEVEL)
    return {
        "point": float(point),
        "posterior_mean": float(draws_vec.mean()),
        "posterior_sd": float(draws_vec.std(ddof=1)),
        "ci_normal": [iv_n.lower, iv_n.upper],
        "ci_percentile": [iv_p.lower, iv_p.upper],
    }


_ANALYZE_COLUMNS = [
    "rule", "point", "posterior_mean", "posterior_sd",
    "ci_normal_lower", "ci_normal_upper",
    "ci_percentile_lower", "ci_percentile_upper",
    "mean_a", "sd_a", "capped_fraction", "degenerate_count",
    "tau_point", "tau_ci_percentile_lower", "tau_ci_percentile_upper",
]


def _analyze_csv(report: dict, rule_names) -> str:
    rows = []
    for name in rule_names:
        entry = report["rules"][name]
        mu = entry["mu_c"]
        tau = entry.get("tau")
        rows.append([_cell(v) for v in (
            name, mu["point"], mu["posterior_mean"], mu["posterior_sd"],
            mu["ci_normal"][0], mu["ci_normal"][1],
            mu["ci_percentile"][0], mu["ci_percentile"][1],
            entry["a"]["mean"], entry["a"]["sd"],
            entry["a"]["capped_fraction"], entry["a"]["degenerate_count"],
            tau["point"] if tau else None,
            tau["ci_percentile"][0] if tau else None,
            tau["ci_percentile"][1] if tau else None,
        )])
    return _csv_text(_ANALYZE_COLUMNS, rows)


_SCENARIO_KEYS = {f.name for f in dataclass_fields(ScenarioConfig)}
_METRICS_COLUMNS = [f.name for f in dataclass_fields(MetricsRow)]


@main.command("simulate")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON or TOML file with a scenario list (see docs).")
@click.option("--seed", default=None, type=int,
              help="Base seed for scenarios without an explicit one; "
                   "generated and printed when omitted.")
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the metrics CSV here instead of stdout.")
def cmd_simulate(config_path, seed, out):
    """Run simulation scenarios and emit one metrics row per scenario and rule.

    Config schema: {"scenarios": [{...}, ...]} (or a bare list). Scenario
    fields: outcome (normal|binary|student_t), n0, nsim, and optionally
    n1_multiplier, delta, p, beta, p0, df, cap, eta, rules, nboot, coverage,
    seed. A scenario without a seed uses base_seed + its index.
    """
    try:
        _simulate(config_path, seed, out)
    except DynborrowError as exc:
        _fail(exc)


def _simulate(config_path, seed, out):
    base_seed = _resolve_seed(seed)
    scenarios = _load_scenarios(config_path, base_seed)
    rows = []
    for cfg in scenarios:
        rows.extend(run_scenario(cfg))
    csv_rows = [[_cell(getattr(row, col)) for col in _METRICS_COLUMNS]
                for row in rows]
    _emit(_csv_text(_METRICS_COLUMNS, csv_rows), out)


def _load_scenarios(config_path, base_seed):
    path = Path(config_path)
    try:
        if path.suffix.lower() == ".toml":
            payload = tomllib.loads(path.read_text())
        else:
            payload = json.loads(path.read_text())
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise InvalidConfig(f"{config_path}: cannot parse ({exc})")
    if isinstance(payload, dict):
        payload = payload.get("scenarios", payload.get("scenario", None))
    if not isinstance(payload, list) or not payload:
        raise InvalidConfig(f"{config_path}: config must contain a nonempty "
                            "'scenarios' list")
    scenarios, errors = [], []
    for i, raw in enumerate(payload):
        if not isinstance(raw, dict):
            errors.append(f"scenarios[{i}]: must be a table/object")
            continue
        unknown = set(raw) - _SCENARIO_KEYS
        if unknown:
            errors.append(f"scenarios[{i}].{sorted(unknown)[0]}: unknown field")
            continue
        raw = dict(raw)
        raw.setdefault("seed", base_seed + i)
        if isinstance(raw.get("rules"), str):
            raw["rules"] = (raw["rules"],)
        try:
            scenarios.append(ScenarioConfig(**raw))
        except (InvalidConfig, TypeError) as exc:
            errors.append(f"scenarios[{i}]: {exc}")
    if errors:
        raise InvalidConfig("invalid config: " + "; ".join(errors))
    return scenarios


_CURVE_COLUMNS = ["delta", "a_star", "bias", "mse", "at_bias_peak"]


@main.command("curve")
@click.option("--sigma0", default=1.0, show_default=True,
              help="Internal-mean standard deviation.")
@click.option("--sigma1", default=1.0, show_default=True,
              help="External-mean standard deviation.")
@click.option("--delta-max", default=3.0, show_default=True,
              help="Upper end of the mean-difference grid.")
@click.option("--eta", default=1.0, show_default=True,
              help="Bias weight in the MSE objective.")
@click.option("--steps", default=200, show_default=True,
              help="Number of grid steps (steps+1 rows).")
@click.option("--seed", default=None, type=int, hidden=True,
              help="Accepted for interface uniformity; the command is deterministic.")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def cmd_curve(sigma0, sigma1, delta_max, eta, steps, seed, out):
    """Analytic optimal-weight curves: a*, bias, and MSE over a delta grid,
    with the bias-maximum row (delta^2 = sigma0^2 + sigma1^2) marked."""
    try:
        _curve(sigma0, sigma1, delta_max, eta, steps, out)
    except DynborrowError as exc:
        _fail(exc)


def _curve(sigma0, sigma1, delta_max, eta, steps, out):
    if sigma0 <= 0.0 or sigma1 <= 0.0:
        raise InvalidConfig("sigma0 and sigma1 must be positive")
    if delta_max <= 0.0 or steps < 1:
        raise InvalidConfig("need delta_max > 0 and steps >= 1")
    if eta < 0.0:
        raise InvalidConfig("eta must be >= 0")
    v0, v1 = sigma0 * sigma0, sigma1 * sigma1
    grid = np.linspace(0.0, delta_max, steps + 1)
    peak_idx = None
    if eta > 0.0:
        peak = float(np.sqrt(v0 + v1)) / eta
        if peak <= delta_max:
            peak_idx = int(np.argmin(np.abs(grid - peak)))
    rows = []
    for i, delta in enumerate(grid):
        a = optimal_a(v0, v1, float(delta), eta)
        prof = mse_profile(a, v0, v1, float(delta), eta)
        rows.append([_cell(v) for v in (
            float(delta), float(a), float(prof.bias), float(prof.mse),
            i == peak_idx)])
    _emit(_csv_text(_CURVE_COLUMNS, rows), out)


if __name__ == "__main__":
    main()

"""Experiment runner: the zero-shot recovery benchmark and stream export.

run_recovery samples a batch of systems, simulates each history, branches
an oracle ensemble plus an independent oracle re-branch (the measurable
stand-in for a perfect forecaster), fits the classical baselines, scores
everything against the oracle, and writes CSV tables and per-metric
plots. All randomness flows through streams derived from the config's
root seed, keyed by purpose, system index, and stage, so outputs are
byte-identical across runs and thread counts.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import (dcc_forecast, dcc_to_dict, fit_dcc,
                        historical_simulation)
from .errors import DimensionMismatch, InvalidParameter, SdeverseError
from .formats import TrainingRecord, read_sample_set, write_training_records
from .rng import RngStream, derive_stream
from .sampler import sample_system
from .scoring import ScoreReport, score_forecast
from .simulate import branch_futures, simulate_history
from .systems import CurriculumLevel, SdeSystemSpec, as_level

FORECASTER_IDS = ("oracle_rebranch", "historical_simulation", "dcc_garch")
BASELINE_IDS = ("historical_simulation", "dcc_garch")

# purpose labels keep recovery and export streams disjoint per root seed
_PURPOSE_RECOVER = 1
_PURPOSE_EXPORT = 2
# per-system stage labels
_STAGE_SPEC = 0
_STAGE_HISTORY = 1
_STAGE_ORACLE = 2
_STAGE_REBRANCH = 3
_STAGE_HISTSIM = 4
_STAGE_DCC = 5

_SCORES_COLUMNS = ("system_id", "forecaster_id", "horizon", "energy",
                   "marginal_energy", "crps_sum")
_SUMMARY_COLUMNS = ("forecaster_id", "horizon", "n_systems", "energy",
                    "marginal_energy", "crps_sum",
                    "energy_gap_vs_best_baseline_pct",
                    "marginal_energy_gap_vs_best_baseline_pct",
                    "crps_sum_gap_vs_best_baseline_pct")
_FAILURES_COLUMNS = ("system_id", "stage", "error_type", "message")
_FITS_COLUMNS = ("system_id", "forecaster_id", "status", "params_json")
_METRICS = ("energy", "marginal_energy", "crps_sum")


@dataclass(frozen=True)
class ExperimentConfig:
    """Benchmark knobs. The defaults are the full recovery protocol:
    200 level-7 systems with 10 targets and no features, a 504-step
    history over 2.0 time units, a 63-step forecast over 0.25, and
    1000-path oracle and forecast ensembles."""

    root_seed: int = 0
    n_systems: int = 200
    level: CurriculumLevel = CurriculumLevel(7)
    n_features: int = 0
    n_targets: int = 10
    n_history_steps: int = 504
    t_in: float = 2.0
    n_horizon_steps: int = 63
    t_out: float = 0.25
    n_oracle_paths: int = 1000
    n_forecast_paths: int = 1000
    forecasters: tuple[str, ...] = FORECASTER_IDS
    output_dir: str = "results"
    thread_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "level", as_level(self.level))
        counts = {
            "n_systems": self.n_systems,
            "n_targets": self.n_targets,
            "n_history_steps": self.n_history_steps,
            "n_horizon_steps": self.n_horizon_steps,
            "n_oracle_paths": self.n_oracle_paths,
            "n_forecast_paths": self.n_forecast_paths,
            "thread_count": self.thread_count,
        }
        for name, value in counts.items():
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidParameter(f"{name} must be an integer >= 1, got {value!r}")
        if not isinstance(self.n_features, (int, np.integer)) or self.n_features < 0:
            raise InvalidParameter(
                f"n_features must be an integer >= 0, got {self.n_features!r}")
        if not isinstance(self.root_seed, (int, np.integer)) or self.root_seed < 0:
            raise InvalidParameter(
                f"root_seed must be a non-negative integer, got {self.root_seed!r}")
        for name in ("t_in", "t_out"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameter(f"{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)
        chosen = tuple(self.forecasters)
        if not chosen:
            raise InvalidParameter("forecasters must not be empty")
        unknown = [f for f in chosen if f not in FORECASTER_IDS]
        if unknown:
            raise InvalidParameter(f"unknown forecasters: {unknown}")
        if len(set(chosen)) != len(chosen):
            raise InvalidParameter("forecasters contains duplicates")
        # canonical order keeps output row order independent of input order
        ordered = tuple(f for f in FORECASTER_IDS if f in chosen)
        object.__setattr__(self, "forecasters", ordered)
        object.__setattr__(self, "output_dir", str(self.output_dir))

    @property
    def dims(self) -> int:
        return self.n_features + self.n_targets


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "root_seed": config.root_seed,
        "n_systems": config.n_systems,
        "level": int(config.level),
        "n_features": config.n_features,
        "n_targets": config.n_targets,
        "n_history_steps": config.n_history_steps,
        "t_in": config.t_in,
        "n_horizon_steps": config.n_horizon_steps,
        "t_out": config.t_out,
        "n_oracle_paths": config.n_oracle_paths,
        "n_forecast_paths": config.n_forecast_paths,
        "forecasters": list(config.forecasters),
        "output_dir": config.output_dir,
        "thread_count": config.thread_count,
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise InvalidParameter("config document must be an object")
    known = set(config_to_dict(ExperimentConfig()))
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InvalidParameter(f"unknown config keys: {unknown}")
    kwargs = dict(doc)
    if "forecasters" in kwargs:
        kwargs["forecasters"] = tuple(kwargs["forecasters"])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise InvalidParameter(f"bad config document: {exc}") from exc


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    """Everything run_recovery computed, plus where it wrote the tables."""

    reports: tuple[ScoreReport, ...]
    summary_rows: tuple[dict, ...]
    failures: tuple[dict, ...]
    fit_rows: tuple[dict, ...]
    output_dir: Path
    n_scored: int
    n_failed: int


def _system_id(index: int) -> str:
    return f"sys{index:04d}"


def _run_one_system(config: ExperimentConfig, index: int,
                    spec: SdeSystemSpec | None) -> dict:
    t0 = time.perf_counter()
    sys_id = _system_id(index)
    stream = derive_stream(derive_stream(RngStream(root_seed=config.root_seed),
                                         _PURPOSE_RECOVER), index)
    out = {"index": index, "system_id": sys_id, "status": "ok",
           "reports": [], "fit_rows": [], "failure": None, "seconds": 0.0}
    stage = "sample_spec"
    try:
        if spec is None:
            spec = sample_system(config.level, config.n_features,
                                 config.n_targets,
                                 derive_stream(stream, _STAGE_SPEC))
        stage = "simulate_history"
        history = simulate_history(spec, config.n_history_steps, config.t_in,
                                   derive_stream(stream, _STAGE_HISTORY))
        stage = "branch_oracle"
        oracle = branch_futures(spec, history.terminal_state,
                                history.terminal_regime, config.t_in,
                                config.n_oracle_paths, config.n_horizon_steps,
                                config.t_out, derive_stream(stream, _STAGE_ORACLE))
        for forecaster in config.forecasters:
            stage = forecaster
            flagged = False
            if forecaster == "oracle_rebranch":
                forecast = branch_futures(
                    spec, history.terminal_state, history.terminal_regime,
                    config.t_in, config.n_forecast_paths,
                    config.n_horizon_steps, config.t_out,
                    derive_stream(stream, _STAGE_REBRANCH))
            elif forecaster == "historical_simulation":
                forecast = historical_simulation(
                    history, config.n_forecast_paths, config.n_horizon_steps,
                    derive_stream(stream, _STAGE_HISTSIM))
            else:
                params = fit_dcc(history)
                forecast = dcc_forecast(params, history,
                                        config.n_forecast_paths,
                                        config.n_horizon_steps,
                                        derive_stream(stream, _STAGE_DCC))
                flagged = params.any_fallback
                out["fit_rows"].append({
                    "system_id": sys_id,
                    "forecaster_id": forecaster,
                    "status": "fallback" if flagged else "ok",
                    "params_json": json.dumps(dcc_to_dict(params),
                                              sort_keys=True,
                                              separators=(",", ":")),
                })
            stage = f"score_{forecaster}"
            report = score_forecast(forecast, oracle, config.n_targets,
                                    forecaster_id=forecaster, system_id=sys_id)
            out["reports"].append((report, flagged))
    except (SdeverseError, np.linalg.LinAlgError, FloatingPointError) as exc:
        out["status"] = "failed"
        out["reports"] = []
        out["fit_rows"] = []
        out["failure"] = {
            "system_id": sys_id,
            "stage": stage,
            "error_type": type(exc).__name__,
            "message": str(exc).splitlines()[0] if str(exc) else "",
        }
    out["seconds"] = time.perf_counter() - t0
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _summarize(reports: list[tuple[ScoreReport, bool]],
               config: ExperimentConfig, strict: bool) -> list[dict]:
    horizon_count = config.n_horizon_steps
    labels = [str(k + 1) for k in range(horizon_count)] + ["avg"]
    means: dict[str, dict[str, list[float | None]]] = {}
    counts: dict[str, int] = {}
    for forecaster in config.forecasters:
        chosen = [r for r, flagged in reports
                  if r.forecaster_id == forecaster and not (strict and flagged)]
        counts[forecaster] = len(chosen)
        per_metric: dict[str, list[float | None]] = {}
        for metric_idx, metric in enumerate(_METRICS):
            cols: list[float | None] = []
            for k in range(horizon_count):
                vals = [_metric_array(r, metric)[k] for r in chosen]
                cols.append(float(np.mean(vals)) if vals else None)
            avg = [r.averages[metric_idx] for r in chosen]
            cols.append(float(np.mean(avg)) if avg else None)
            per_metric[metric] = cols
        means[forecaster] = per_metric

    baselines = [f for f in config.forecasters if f in BASELINE_IDS]
    rows = []
    for forecaster in config.forecasters:
        for row_idx, label in enumerate(labels):
            row = {"forecaster_id": forecaster, "horizon": label,
                   "n_systems": str(counts[forecaster])}
            for metric in _METRICS:
                value = means[forecaster][metric][row_idx]
                row[metric] = _fmt(value) if value is not None else ""
                best = [means[b][metric][row_idx] for b in baselines
                        if means[b][metric][row_idx] is not None]
                gap = ""
                if value is not None and best:
                    floor = min(best)
                    if floor > 0:
                        gap = _fmt(100.0 * (value - floor) / floor)
                row[f"{metric}_gap_vs_best_baseline_pct"] = gap
            rows.append(row)
    return rows


def _metric_array(report: ScoreReport, metric: str) -> np.ndarray:
    if metric == "energy":
        return report.per_horizon_energy
    if metric == "marginal_energy":
        return report.per_horizon_marginal_energy
    return report.per_horizon_crps_sum


def _write_csv(path: Path, columns: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _score_rows(reports: list[tuple[ScoreReport, bool]]):
    for report, _ in reports:
        for k in range(len(report.per_horizon_energy)):
            yield {
                "system_id": report.system_id,
                "forecaster_id": report.forecaster_id,
                "horizon": str(k + 1),
                "energy": _fmt(report.per_horizon_energy[k]),
                "marginal_energy": _fmt(report.per_horizon_marginal_energy[k]),
                "crps_sum": _fmt(report.per_horizon_crps_sum[k]),
            }
        yield {
            "system_id": report.system_id,
            "forecaster_id": report.forecaster_id,
            "horizon": "avg",
            "energy": _fmt(report.averages[0]),
            "marginal_energy": _fmt(report.averages[1]),
            "crps_sum": _fmt(report.averages[2]),
        }


def _plot_summary(summary_rows: list[dict], config: ExperimentConfig,
                  out_dir: Path) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg", force=True)
        import matplotlib.pyplot as plt
    except Exception as exc:
        warnings.warn(f"plotting unavailable, CSVs unaffected: {exc}")
        return
    pretty = {"oracle_rebranch": "oracle rebranch",
              "historical_simulation": "historical simulation",
              "dcc_garch": "DCC-GARCH"}
    try:
        for metric in _METRICS:
            fig, ax = plt.subplots(figsize=(7, 4.5))
            for forecaster in config.forecasters:
                pts = [(int(r["horizon"]), float(r[metric]))
                       for r in summary_rows
                       if r["forecaster_id"] == forecaster
                       and r["horizon"] != "avg" and r[metric] != ""]
                if pts:
                    xs, ys = zip(*pts)
                    ax.plot(xs, ys, label=pretty.get(forecaster, forecaster))
            ax.set_xlabel("forecast horizon (steps)")
            ax.set_ylabel(f"mean {metric.replace('_', ' ')}")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out_dir / f"{metric}.svg", metadata={"Date": None})
            plt.close(fig)
    except Exception as exc:
        warnings.warn(f"plot generation failed, CSVs unaffected: {exc}")


def run_recovery(config: ExperimentConfig, system_specs=None,
                 strict: bool = False) -> RecoveryResult:
    """Run the benchmark and write scores.csv, summary.csv, failures.csv,
    fits.csv, per-metric SVG plots, and timings.json under output_dir.

    system_specs, when given, must hold one SdeSystemSpec per system and
    replaces sampling (the stream layout is unchanged, so histories and
    branches still match a sampled run with the same seed). strict mode
    drops reports whose baseline fit fell back to a constant null from
    the summary aggregates; scores.csv always has every row.
    """
    if system_specs is not None:
        system_specs = list(system_specs)
        if len(system_specs) != config.n_systems:
            raise InvalidParameter(
                f"system_specs has {len(system_specs)} entries for "
                f"{config.n_systems} systems")
        if not all(isinstance(s, SdeSystemSpec) for s in system_specs):
            raise InvalidParameter("system_specs must hold SdeSystemSpec values")
        for i, s in enumerate(system_specs):
            if s.dims != config.dims:
                raise DimensionMismatch(
                    f"system_specs[{i}] has {s.dims} dims, config expects "
                    f"{config.dims}")

    t_start = time.perf_counter()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def job(index: int) -> dict:
        spec = system_specs[index] if system_specs is not None else None
        return _run_one_system(config, index, spec)

    if config.thread_count == 1:
        results = [job(i) for i in range(config.n_systems)]
    else:
        with ThreadPoolExecutor(max_workers=config.thread_count) as pool:
            results = list(pool.map(job, range(config.n_systems)))

    reports: list[tuple[ScoreReport, bool]] = []
    failures: list[dict] = []
    fit_rows: list[dict] = []
    timings = {}
    for res in results:
        timings[res["system_id"]] = res["seconds"]
        if res["status"] == "ok":
            reports.extend(res["reports"])
            fit_rows.extend(res["fit_rows"])
        else:
            failures.append(res["failure"])

    summary_rows = _summarize(reports, config, strict)
    _write_csv(out_dir / "scores.csv", _SCORES_COLUMNS, _score_rows(reports))
    _write_csv(out_dir / "summary.csv", _SUMMARY_COLUMNS, summary_rows)
    _write_csv(out_dir / "failures.csv", _FAILURES_COLUMNS, failures)
    _write_csv(out_dir / "fits.csv", _FITS_COLUMNS, fit_rows)
    _plot_summary(summary_rows, config, out_dir)
    with open(out_dir / "timings.json", "w") as f:
        json.dump({
            "total_seconds": time.perf_counter() - t_start,
            "per_system_seconds": timings,
            "n_scored": config.n_systems - len(failures),
            "n_failed": len(failures),
            "thread_count": config.thread_count,
        }, f, indent=2, sort_keys=True)

    return RecoveryResult(
        reports=tuple(r for r, _ in reports),
        summary_rows=tuple(summary_rows),
        failures=tuple(failures),
        fit_rows=tuple(fit_rows),
        output_dir=out_dir,
        n_scored=config.n_systems - len(failures),
        n_failed=len(failures),
    )


def export_training_stream(config: ExperimentConfig, n_records: int,
                           sink) -> int:
    """Write n_records supervision records to sink (path or binary file).

    Record i draws its spec, history, and branch ensemble from streams
    keyed by (export purpose, i), so no two records share a spec and a
    rerun with the same root seed reproduces the file byte-for-byte.
    """
    if not isinstance(n_records, (int, np.integer)) or n_records < 0:
        raise InvalidParameter(f"n_records must be an integer >= 0, got {n_records!r}")

    def make(index: int) -> TrainingRecord:
        stream = derive_stream(derive_stream(RngStream(root_seed=config.root_seed),
                                             _PURPOSE_EXPORT), index)
        spec = sample_system(config.level, config.n_features, config.n_targets,
                             derive_stream(stream, _STAGE_SPEC))
        history = simulate_history(spec, config.n_history_steps, config.t_in,
                                   derive_stream(stream, _STAGE_HISTORY))
        branches = branch_futures(spec, history.terminal_state,
                                  history.terminal_regime, config.t_in,
                                  config.n_oracle_paths, config.n_horizon_steps,
                                  config.t_out, derive_stream(stream, _STAGE_ORACLE))
        return TrainingRecord(system_spec=spec, history=history,
                              future_branches=branches)

    return write_training_records((make(i) for i in range(int(n_records))), sink)


def score_external(forecast_file, oracle_file, n_targets: int) -> ScoreReport:
    """Score a forecast SampleSet file against an oracle SampleSet file."""
    forecast = read_sample_set(forecast_file)
    oracle = read_sample_set(oracle_file)
    return score_forecast(forecast, oracle, n_targets)

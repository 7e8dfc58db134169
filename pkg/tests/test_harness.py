import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from sdeverse.errors import DimensionMismatch, InvalidParameter
from sdeverse.formats import read_sample_set, read_training_records, write_sample_set
from sdeverse.harness import (BASELINE_IDS, FORECASTER_IDS, ExperimentConfig,
                              config_from_dict, config_to_dict,
                              export_training_stream, run_recovery,
                              score_external)
from sdeverse.rng import RngStream
from sdeverse.scoring import score_forecast
from sdeverse.simulate import branch_futures
from sdeverse.systems import spec_to_json

from conftest import constant_drift, diag_spec

STEP = 1.0 / 252.0


def tiny_config(tmp_path, **overrides):
    base = dict(
        root_seed=11,
        n_systems=3,
        level=2,
        n_targets=2,
        n_history_steps=60,
        t_in=60 * STEP,
        n_horizon_steps=4,
        t_out=4 * STEP,
        n_oracle_paths=30,
        n_forecast_paths=30,
        output_dir=str(tmp_path / "out"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# config


def test_default_config_is_the_full_protocol():
    c = ExperimentConfig()
    assert (c.n_systems, int(c.level), c.n_targets, c.n_features) == (200, 7, 10, 0)
    assert (c.n_history_steps, c.t_in) == (504, 2.0)
    assert (c.n_horizon_steps, c.t_out) == (63, 0.25)
    assert c.n_oracle_paths == c.n_forecast_paths == 1000
    assert c.forecasters == FORECASTER_IDS
    assert c.dims == 10
    # both grids share the daily step
    assert c.t_in / c.n_history_steps == pytest.approx(c.t_out / c.n_horizon_steps)


def test_config_validation():
    with pytest.raises(InvalidParameter):
        ExperimentConfig(n_systems=0)
    with pytest.raises(InvalidParameter):
        ExperimentConfig(t_in=-1.0)
    with pytest.raises(InvalidParameter):
        ExperimentConfig(forecasters=("nope",))
    with pytest.raises(InvalidParameter):
        ExperimentConfig(forecasters=("dcc_garch", "dcc_garch"))
    with pytest.raises(InvalidParameter):
        ExperimentConfig(forecasters=())
    with pytest.raises(InvalidParameter):
        ExperimentConfig(root_seed=-1)


def test_config_forecasters_are_reordered_canonically():
    c = ExperimentConfig(forecasters=("dcc_garch", "oracle_rebranch"))
    assert c.forecasters == ("oracle_rebranch", "dcc_garch")


def test_config_dict_round_trip():
    c = ExperimentConfig(root_seed=5, n_systems=7, level=3, thread_count=2)
    doc = config_to_dict(c)
    assert doc["level"] == 3
    c2 = config_from_dict(doc)
    assert c2 == c
    doc["bogus_knob"] = 1
    with pytest.raises(InvalidParameter):
        config_from_dict(doc)


# ---------------------------------------------------------------------------
# recovery runs
def read_file(path):
    with open(path, "rb") as f:
        return f.read()


def test_run_recovery_outputs(tmp_path):
    config = tiny_config(tmp_path)
    result = run_recovery(config)
    assert result.n_scored == 3 and result.n_failed == 0
    assert len(result.reports) == 3 * 3
    assert {r.forecaster_id for r in result.reports} == set(FORECASTER_IDS)
    assert {r.system_id for r in result.reports} == {"sys0000", "sys0001", "sys0002"}

    out = result.output_dir
    for name in ("scores.csv", "summary.csv", "failures.csv", "fits.csv",
                 "timings.json"):
        assert (out / name).exists()
    with open(out / "scores.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 9 * (4 + 1)
    horizons = [r["horizon"] for r in rows[:5]]
    assert horizons == ["1", "2", "3", "4", "avg"]
    for row in rows:
        for metric in ("energy", "marginal_energy", "crps_sum"):
            assert float(row[metric]) >= 0.0

    with open(out / "summary.csv", newline="") as f:
        srows = list(csv.DictReader(f))
    assert len(srows) == 3 * 5
    avg = {r["forecaster_id"]: r for r in srows if r["horizon"] == "avg"}
    gaps = {f: float(avg[f]["energy_gap_vs_best_baseline_pct"])
            for f in FORECASTER_IDS}
    assert min(gaps[b] for b in BASELINE_IDS) == 0.0
    assert all(r["n_systems"] == "3" for r in srows)

    with open(out / "timings.json") as f:
        timings = json.load(f)
    assert timings["n_scored"] == 3
    assert set(timings["per_system_seconds"]) == {"sys0000", "sys0001", "sys0002"}
    svgs = list(out.glob("*.svg"))
    assert len(svgs) == 3


def test_run_recovery_thread_count_does_not_change_results(tmp_path):
    r1 = run_recovery(tiny_config(tmp_path / "a", thread_count=1))
    r2 = run_recovery(tiny_config(tmp_path / "b", thread_count=2))
    for name in ("scores.csv", "summary.csv", "fits.csv"):
        assert read_file(r1.output_dir / name) == read_file(r2.output_dir / name)


def test_run_recovery_is_seed_deterministic(tmp_path):
    r1 = run_recovery(tiny_config(tmp_path / "a"))
    r2 = run_recovery(tiny_config(tmp_path / "b"))
    r3 = run_recovery(tiny_config(tmp_path / "c", root_seed=12))
    assert read_file(r1.output_dir / "scores.csv") == read_file(
        r2.output_dir / "scores.csv")
    assert read_file(r1.output_dir / "scores.csv") != read_file(
        r3.output_dir / "scores.csv")


def test_run_recovery_spec_override_validation(tmp_path):
    config = tiny_config(tmp_path)
    good = diag_spec(0, [constant_drift(0.01), constant_drift(0.02)],
                     [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InvalidParameter):
        run_recovery(config, system_specs=[good])
    wrong_dims = diag_spec(0, [constant_drift(0.01)], [0.0], [1.0])
    with pytest.raises(DimensionMismatch):
        run_recovery(config, system_specs=[good, good, wrong_dims])


def test_run_recovery_records_failures_and_keeps_going(tmp_path):
    config = tiny_config(tmp_path)
    ok = diag_spec(1, [constant_drift(0.01), constant_drift(0.02)],
                   [0.3, 0.2], [1.0, 1.0])
    exploding = diag_spec(0, [constant_drift(rate=1e9, level_param=1e6),
                              constant_drift(0.0)], [0.0, 0.0], [0.0, 0.0])
    result = run_recovery(config, system_specs=[ok, exploding, ok])
    assert result.n_scored == 2 and result.n_failed == 1
    assert len(result.reports) == 6
    failure = result.failures[0]
    assert failure["system_id"] == "sys0001"
    assert failure["stage"] == "simulate_history"
    assert failure["error_type"] == "NonFiniteState"
    with open(result.output_dir / "failures.csv", newline="") as f:
        frows = list(csv.DictReader(f))
    assert len(frows) == 1 and frows[0]["system_id"] == "sys0001"


def test_strict_mode_drops_fallback_fits_from_summary(tmp_path):
    config = tiny_config(tmp_path)
    # zero-noise specs make increments constant, forcing the constant-
    # variance fallback in every per-series fit
    det = diag_spec(0, [constant_drift(0.01), constant_drift(0.02)],
                    [0.0, 0.0], [1.0, 1.0])
    result = run_recovery(config, system_specs=[det, det, det], strict=True)
    assert result.n_failed == 0
    assert all(row["status"] == "fallback" for row in result.fit_rows)
    dcc_rows = [r for r in result.summary_rows if r["forecaster_id"] == "dcc_garch"]
    assert all(r["n_systems"] == "0" and r["energy"] == "" for r in dcc_rows)
    with open(result.output_dir / "scores.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert sum(r["forecaster_id"] == "dcc_garch" for r in rows) == 3 * 5


def test_forecaster_subset_runs(tmp_path):
    config = tiny_config(tmp_path, forecasters=("historical_simulation",))
    result = run_recovery(config)
    assert {r.forecaster_id for r in result.reports} == {"historical_simulation"}
    assert result.fit_rows == ()


# ---------------------------------------------------------------------------
# export and external scoring


def test_export_stream_is_deterministic_and_distinct_from_recovery(tmp_path):
    config = tiny_config(tmp_path)
    buf1, buf2 = io.BytesIO(), io.BytesIO()
    assert export_training_stream(config, 4, buf1) == 4
    export_training_stream(config, 4, buf2)
    assert buf1.getvalue() == buf2.getvalue()

    records = list(read_training_records(io.BytesIO(buf1.getvalue())))
    assert len(records) == 4
    specs = [spec_to_json(r.system_spec) for r in records]
    assert len(set(specs)) == 4
    for rec in records:
        assert rec.history.n_steps == config.n_history_steps
        assert rec.future_branches.n_samples == config.n_oracle_paths
        assert rec.future_branches.horizon == config.n_horizon_steps

    # records are keyed by index, so a shorter export is a prefix
    export_more = io.BytesIO()
    export_training_stream(replace(config, n_systems=5), 3, export_more)
    exported = [spec_to_json(r.system_spec)
                for r in read_training_records(io.BytesIO(export_more.getvalue()))]
    assert exported == specs[:3]


def test_score_external_matches_direct_scoring(tmp_path):
    spec = diag_spec(1, [constant_drift(0.01), constant_drift(0.0)],
                     [0.2, 0.3], [1.0, 2.0])
    fore = branch_futures(spec, np.array([1.0, 2.0]), 0, 1.0, 40, 5, 5 * STEP,
                          RngStream(root_seed=1))
    orac = branch_futures(spec, np.array([1.0, 2.0]), 0, 1.0, 50, 5, 5 * STEP,
                          RngStream(root_seed=2))
    fpath, opath = tmp_path / "f.sdeu", tmp_path / "o.sdeu"
    write_sample_set(fore, str(fpath))
    write_sample_set(orac, str(opath))
    got = score_external(str(fpath), str(opath), n_targets=2)
    want = score_forecast(read_sample_set(str(fpath)), read_sample_set(str(opath)),
                          n_targets=2)
    assert np.array_equal(got.per_horizon_energy, want.per_horizon_energy)
    assert got.averages == want.averages

import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdeverse.errors import FormatError, InvalidParameter
from sdeverse.formats import (FORMAT_VERSION, MAGIC, TrainingRecord,
                              path_matrix_from_ndjson, path_matrix_to_ndjson,
                              read_path_matrix, read_sample_set,
                              read_training_records, sample_set_from_ndjson,
                              sample_set_to_ndjson, write_path_matrix,
                              write_sample_set, write_training_records)
from sdeverse.rng import RngStream
from sdeverse.sampler import sample_system
from sdeverse.simulate import (PathMatrix, SampleSet, branch_futures,
                               simulate_history)
from sdeverse.systems import spec_to_json


def some_samples(seed=0, shape=(6, 4, 3), dt=0.25):
    vals = np.random.default_rng(seed).normal(size=shape)
    return SampleSet(values=vals, dt=dt)


def some_path(seed=0, shape=(9, 2), dt=0.125, with_trace=False):
    vals = np.random.default_rng(seed).normal(size=shape)
    trace = None
    if with_trace:
        trace = np.random.default_rng(seed + 1).integers(0, 2, size=shape[0])
    return PathMatrix(values=vals, dt=dt, regime_trace=trace)


# ---------------------------------------------------------------------------
# binary frames


def test_sample_set_binary_round_trip_is_exact():
    s = some_samples()
    buf = io.BytesIO()
    n = write_sample_set(s, buf)
    assert n == len(buf.getvalue()) == 32 + 8 * s.values.size
    back = read_sample_set(io.BytesIO(buf.getvalue()))
    assert np.array_equal(back.values, s.values)
    assert back.dt == s.dt


def test_sample_set_file_round_trip(tmp_path):
    s = some_samples(seed=3, shape=(2, 5, 1), dt=1.0 / 252.0)
    p = tmp_path / "branches.sdeu"
    write_sample_set(s, str(p))
    back = read_sample_set(str(p))
    assert np.array_equal(back.values, s.values)
    assert back.dt == s.dt


def test_header_layout_is_stable():
    s = some_samples(seed=1, shape=(3, 2, 4), dt=0.5)
    buf = io.BytesIO()
    write_sample_set(s, buf)
    raw = buf.getvalue()
    magic, version, n, h, d, flags, dt = struct.unpack("<4sIIIIB3xd", raw[:32])
    assert magic == MAGIC == b"SDEU"
    assert version == FORMAT_VERSION == 1
    assert (n, h, d) == (3, 2, 4)
    assert flags == 0
    assert dt == 0.5
    first = struct.unpack("<d", raw[32:40])[0]
    assert first == s.values[0, 0, 0]  # row-major payload


def test_path_matrix_round_trip_with_and_without_trace():
    for with_trace in (False, True):
        p = some_path(seed=5, with_trace=with_trace)
        buf = io.BytesIO()
        write_path_matrix(p, buf)
        back = read_path_matrix(io.BytesIO(buf.getvalue()))
        assert np.array_equal(back.values, p.values)
        assert back.dt == p.dt
        if with_trace:
            assert np.array_equal(back.regime_trace, p.regime_trace)
        else:
            assert back.regime_trace is None


def test_reader_rejects_bad_magic_and_version():
    buf = io.BytesIO()
    write_sample_set(some_samples(), buf)
    raw = bytearray(buf.getvalue())
    raw[:4] = b"NOPE"
    with pytest.raises(FormatError, match="magic"):
        read_sample_set(io.BytesIO(bytes(raw)))
    raw = bytearray(buf.getvalue())
    raw[4] = 99
    with pytest.raises(FormatError, match="version"):
        read_sample_set(io.BytesIO(bytes(raw)))


def test_reader_reports_truncation_offset():
    buf = io.BytesIO()
    write_sample_set(some_samples(), buf)
    raw = buf.getvalue()
    with pytest.raises(FormatError) as exc:
        read_sample_set(io.BytesIO(raw[:40]))
    assert exc.value.offset is not None
    assert "offset" in str(exc.value)
    with pytest.raises(FormatError):
        read_sample_set(io.BytesIO(raw[:10]))


def test_frame_kind_mismatch_rejected():
    buf = io.BytesIO()
    write_path_matrix(some_path(), buf)
    with pytest.raises(FormatError, match="path frame"):
        read_sample_set(io.BytesIO(buf.getvalue()))
    buf2 = io.BytesIO()
    write_sample_set(some_samples(), buf2)
    with pytest.raises(FormatError, match="sample frame"):
        read_path_matrix(io.BytesIO(buf2.getvalue()))


@given(n=st.integers(1, 8), h=st.integers(1, 8), d=st.integers(1, 5),
       seed=st.integers(0, 500))
@settings(max_examples=50)
def test_binary_round_trip_property(n, h, d, seed):
    s = some_samples(seed=seed, shape=(n, h, d),
                     dt=float(np.random.default_rng(seed).uniform(1e-4, 2.0)))
    buf = io.BytesIO()
    write_sample_set(s, buf)
    back = read_sample_set(io.BytesIO(buf.getvalue()))
    assert np.array_equal(back.values, s.values)
    assert back.dt == s.dt


# ---------------------------------------------------------------------------
# ndjson


def test_sample_set_ndjson_round_trip():
    s = some_samples(seed=11, shape=(4, 3, 2), dt=0.2)
    text = sample_set_to_ndjson(s)
    lines = text.strip().split("\n")
    assert len(lines) == 1 + 4 * 3  # header plus one row per (sample, horizon)
    back = sample_set_from_ndjson(text)
    assert np.array_equal(back.values, s.values)
    assert back.dt == s.dt


def test_path_matrix_ndjson_round_trip_with_trace():
    p = some_path(seed=13, with_trace=True)
    back = path_matrix_from_ndjson(path_matrix_to_ndjson(p))
    assert np.array_equal(back.values, p.values)
    assert np.array_equal(back.regime_trace, p.regime_trace)


def test_ndjson_rejects_disorder_and_bad_shapes():
    s = some_samples(seed=17, shape=(2, 2, 1))
    lines = sample_set_to_ndjson(s).strip().split("\n")
    swapped = "\n".join([lines[0], lines[2], lines[1], lines[3], lines[4]]) + "\n"
    with pytest.raises(FormatError):
        sample_set_from_ndjson(swapped)
    with pytest.raises(FormatError):
        sample_set_from_ndjson(lines[0] + "\n")  # missing rows
    with pytest.raises(FormatError):
        sample_set_from_ndjson("not json\n")


# ---------------------------------------------------------------------------
# training record streams


def small_record(seed):
    rng = RngStream(root_seed=seed)
    spec = sample_system(2, 0, 3, rng.derive(0))
    hist = simulate_history(spec, 12, 12.0 / 252.0, rng.derive(1))
    branches = branch_futures(spec, hist.terminal_state, hist.terminal_regime,
                              12.0 / 252.0, 5, 4, 4.0 / 252.0, rng.derive(2))
    return TrainingRecord(system_spec=spec, history=hist,
                          future_branches=branches)


def test_training_stream_round_trip():
    records = [small_record(i) for i in range(4)]
    buf = io.BytesIO()
    assert write_training_records(records, buf) == 4
    back = list(read_training_records(io.BytesIO(buf.getvalue())))
    assert len(back) == 4
    for orig, got in zip(records, back):
        assert spec_to_json(got.system_spec) == spec_to_json(orig.system_spec)
        assert np.array_equal(got.history.values, orig.history.values)
        assert np.array_equal(got.future_branches.values,
                              orig.future_branches.values)
        assert got.future_branches.dt == orig.future_branches.dt


def test_training_stream_is_appendable(tmp_path):
    p = tmp_path / "stream.bin"
    with open(p, "wb") as f:
        write_training_records([small_record(0)], f)
        write_training_records([small_record(1)], f)
    assert len(list(read_training_records(str(p)))) == 2


def test_empty_training_stream():
    assert list(read_training_records(io.BytesIO(b""))) == []


def test_training_stream_detects_corruption():
    buf = io.BytesIO()
    write_training_records([small_record(2)], buf)
    raw = buf.getvalue()
    with pytest.raises(FormatError):
        list(read_training_records(io.BytesIO(raw[:-8])))
    # declared body length larger than what follows
    head = struct.pack("<Q", len(raw))
    with pytest.raises(FormatError):
        list(read_training_records(io.BytesIO(head + raw[8:])))


def test_training_record_validates_members():
    rec = small_record(3)
    with pytest.raises(InvalidParameter):
        TrainingRecord(system_spec=rec.system_spec, history=rec.history,
                       future_branches=np.zeros((2, 2, 3)))
    bad_hist = PathMatrix(values=np.zeros((4, 2)), dt=0.1)
    with pytest.raises(InvalidParameter):
        TrainingRecord(system_spec=rec.system_spec, history=bad_hist,
                       future_branches=rec.future_branches)


def test_write_rejects_non_records():
    with pytest.raises(InvalidParameter):
        write_training_records([object()], io.BytesIO())

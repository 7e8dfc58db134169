"""Serialization: framed binary containers, NDJSON, and record streams.

The binary frame is the normative interchange format. Layout:

    32-byte header: magic "SDEU" | version u32 | S u32 | H u32 | D u32
                    | flags u8 | 3 reserved u8 | dt f64   (little-endian)
    payload: S*H*D float64 values, row-major, little-endian
    trailer: H unsigned bytes of regime labels, present only when
             flags bit 0 is set (path frames only)

Flags bit 1 marks a path frame (single trajectory, S == 1, payload is
the H x D state matrix). Sample frames leave it clear. NDJSON mirrors
the same content one JSON object per line for eyeballing small cases;
both round-trip losslessly (floats survive via shortest-repr encoding).

Training records are length-prefixed concatenations of a canonical spec
JSON block, the history frame, and the branch frame, so a consumer can
skip records without parsing them.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidParameter
from .simulate import PathMatrix, SampleSet
from .systems import SdeSystemSpec, spec_from_json, spec_to_json

MAGIC = b"SDEU"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIB3xd")
_FLAG_REGIME_TRACE = 0x01
_FLAG_PATH_FRAME = 0x02
_RECORD_LEN = struct.Struct("<Q")
_JSON_LEN = struct.Struct("<I")


@dataclass(frozen=True, eq=False)
class TrainingRecord:
    """One procedural supervision example: a system, its observed history,
    and the branch ensemble a model should learn to reproduce."""

    system_spec: SdeSystemSpec
    history: PathMatrix
    future_branches: SampleSet

    def __post_init__(self):
        if not isinstance(self.system_spec, SdeSystemSpec):
            raise InvalidParameter("system_spec must be an SdeSystemSpec")
        if not isinstance(self.history, PathMatrix):
            raise InvalidParameter("history must be a PathMatrix")
        if not isinstance(self.future_branches, SampleSet):
            raise InvalidParameter("future_branches must be a SampleSet")
        if (self.history.dims != self.system_spec.dims
                or self.future_branches.dims != self.system_spec.dims):
            raise InvalidParameter("history/branches dimension does not match spec")


# ---------------------------------------------------------------------------
# byte-level helpers


class _Reader:
    """Tracks absolute offset so errors can point at the failing byte."""

    def __init__(self, raw, base_offset: int = 0):
        self._raw = raw
        self.offset = base_offset

    def read_exact(self, n: int, what: str) -> bytes:
        buf = self._raw.read(n)
        if len(buf) != n:
            raise FormatError(
                f"truncated while reading {what}: wanted {n} bytes, got {len(buf)}",
                offset=self.offset,
            )
        self.offset += n
        return buf


def _coerce_sink(f):
    if isinstance(f, (str, Path)):
        return open(f, "wb"), True
    return f, False


def _coerce_source(f):
    if isinstance(f, (str, Path)):
        return open(f, "rb"), True
    return f, False


def _pack_header(n_samples: int, horizon: int, dims: int, flags: int,
                 dt: float) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, n_samples, horizon, dims, flags, dt)


def _unpack_header(r: _Reader) -> tuple[int, int, int, int, float]:
    start = r.offset
    buf = r.read_exact(_HEADER.size, "frame header")
    magic, version, s, h, d, flags, dt = _HEADER.unpack(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=start)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", offset=start + 4)
    if min(s, h, d) < 1:
        raise FormatError(f"non-positive frame shape ({s}, {h}, {d})",
                          offset=start + 8)
    return s, h, d, flags, dt


# ---------------------------------------------------------------------------
# frames


def write_sample_set(samples: SampleSet, sink) -> int:
    """Write one sample frame; returns bytes written. sink is a path or a
    binary file object."""
    if not isinstance(samples, SampleSet):
        raise InvalidParameter("samples must be a SampleSet")
    f, owned = _coerce_sink(sink)
    try:
        header = _pack_header(samples.n_samples, samples.horizon, samples.dims,
                              0, samples.dt)
        payload = np.ascontiguousarray(samples.values, dtype="<f8").tobytes()
        f.write(header)
        f.write(payload)
        return len(header) + len(payload)
    finally:
        if owned:
            f.close()


def write_path_matrix(path: PathMatrix, sink) -> int:
    if not isinstance(path, PathMatrix):
        raise InvalidParameter("path must be a PathMatrix")
    f, owned = _coerce_sink(sink)
    try:
        flags = _FLAG_PATH_FRAME
        trailer = b""
        if path.regime_trace is not None:
            flags |= _FLAG_REGIME_TRACE
            trailer = np.ascontiguousarray(path.regime_trace,
                                           dtype=np.uint8).tobytes()
        header = _pack_header(1, path.n_steps, path.dims, flags, path.dt)
        payload = np.ascontiguousarray(path.values, dtype="<f8").tobytes()
        f.write(header)
        f.write(payload)
        f.write(trailer)
        return len(header) + len(payload) + len(trailer)
    finally:
        if owned:
            f.close()


def _read_frame(r: _Reader):
    s, h, d, flags, dt = _unpack_header(r)
    n_vals = s * h * d
    payload = r.read_exact(8 * n_vals, f"{n_vals} float64 payload values")
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    if flags & _FLAG_PATH_FRAME:
        if s != 1:
            raise FormatError(f"path frame with {s} samples", offset=r.offset)
        trace = None
        if flags & _FLAG_REGIME_TRACE:
            trace = np.frombuffer(r.read_exact(h, "regime trace"),
                                  dtype=np.uint8).astype(np.int64)
        return PathMatrix(values=values.reshape(h, d), dt=dt, regime_trace=trace)
    if flags & _FLAG_REGIME_TRACE:
        raise FormatError("regime trace flag on a sample frame", offset=r.offset)
    return SampleSet(values=values.reshape(s, h, d), dt=dt)


def read_sample_set(source) -> SampleSet:
    f, owned = _coerce_source(source)
    try:
        r = _Reader(f)
        out = _read_frame(r)
        if not isinstance(out, SampleSet):
            raise FormatError("expected a sample frame, found a path frame",
                              offset=0)
        return out
    finally:
        if owned:
            f.close()


def read_path_matrix(source) -> PathMatrix:
    f, owned = _coerce_source(source)
    try:
        r = _Reader(f)
        out = _read_frame(r)
        if not isinstance(out, PathMatrix):
            raise FormatError("expected a path frame, found a sample frame",
                              offset=0)
        return out
    finally:
        if owned:
            f.close()


# ---------------------------------------------------------------------------
# NDJSON


def _dump_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sample_set_to_ndjson(samples: SampleSet) -> str:
    if not isinstance(samples, SampleSet):
        raise InvalidParameter("samples must be a SampleSet")
    lines = [_dump_line({
        "magic": "SDEU", "version": FORMAT_VERSION, "kind": "sample_set",
        "n_samples": samples.n_samples, "horizon": samples.horizon,
        "dims": samples.dims, "dt": samples.dt,
    })]
    for i in range(samples.n_samples):
        for k in range(samples.horizon):
            lines.append(_dump_line(
                {"s": i, "h": k, "v": samples.values[i, k].tolist()}))
    return "\n".join(lines) + "\n"


def path_matrix_to_ndjson(path: PathMatrix) -> str:
    if not isinstance(path, PathMatrix):
        raise InvalidParameter("path must be a PathMatrix")
    lines = [_dump_line({
        "magic": "SDEU", "version": FORMAT_VERSION, "kind": "path_matrix",
        "n_steps": path.n_steps, "dims": path.dims, "dt": path.dt,
        "has_regime_trace": path.regime_trace is not None,
    })]
    for k in range(path.n_steps):
        row = {"h": k, "v": path.values[k].tolist()}
        if path.regime_trace is not None:
            row["r"] = int(path.regime_trace[k])
        lines.append(_dump_line(row))
    return "\n".join(lines) + "\n"


def _ndjson_lines(text: str) -> list[dict]:
    out = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad NDJSON line: {exc}") from exc
        if not isinstance(obj, dict):
            raise FormatError("NDJSON lines must be objects")
        out.append(obj)
    if not out:
        raise FormatError("empty NDJSON document")
    return out


def _check_ndjson_header(head: dict, kind: str) -> None:
    if head.get("magic") != "SDEU":
        raise FormatError(f"bad NDJSON magic {head.get('magic')!r}")
    if head.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported NDJSON version {head.get('version')!r}")
    if head.get("kind") != kind:
        raise FormatError(f"expected kind {kind!r}, got {head.get('kind')!r}")


def sample_set_from_ndjson(text: str) -> SampleSet:
    lines = _ndjson_lines(text)
    head, rows = lines[0], lines[1:]
    _check_ndjson_header(head, "sample_set")
    try:
        s, h, d = int(head["n_samples"]), int(head["horizon"]), int(head["dims"])
        dt = float(head["dt"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad NDJSON header: {exc}") from exc
    if len(rows) != s * h:
        raise FormatError(f"expected {s * h} rows, found {len(rows)}")
    values = np.empty((s, h, d))
    for n, row in enumerate(rows):
        i, k = n // h, n % h
        if row.get("s") != i or row.get("h") != k:
            raise FormatError(f"row {n} out of order: {row.get('s')}/{row.get('h')}")
        v = row.get("v")
        if not isinstance(v, list) or len(v) != d:
            raise FormatError(f"row {n} has bad value vector")
        values[i, k] = v
    return SampleSet(values=values, dt=dt)


def path_matrix_from_ndjson(text: str) -> PathMatrix:
    lines = _ndjson_lines(text)
    head, rows = lines[0], lines[1:]
    _check_ndjson_header(head, "path_matrix")
    try:
        t, d = int(head["n_steps"]), int(head["dims"])
        dt = float(head["dt"])
        has_trace = bool(head["has_regime_trace"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad NDJSON header: {exc}") from exc
    if len(rows) != t:
        raise FormatError(f"expected {t} rows, found {len(rows)}")
    values = np.empty((t, d))
    trace = np.empty(t, dtype=np.int64) if has_trace else None
    for k, row in enumerate(rows):
        if row.get("h") != k:
            raise FormatError(f"row {k} out of order: {row.get('h')}")
        v = row.get("v")
        if not isinstance(v, list) or len(v) != d:
            raise FormatError(f"row {k} has bad value vector")
        values[k] = v
        if has_trace:
            if "r" not in row:
                raise FormatError(f"row {k} missing regime label")
            trace[k] = int(row["r"])
    return PathMatrix(values=values, dt=dt, regime_trace=trace)


# ---------------------------------------------------------------------------
# training-record streams


def _encode_record(record: TrainingRecord) -> bytes:
    spec_json = spec_to_json(record.system_spec).encode("utf-8")
    hist_buf = io.BytesIO()
    write_path_matrix(record.history, hist_buf)
    branch_buf = io.BytesIO()
    write_sample_set(record.future_branches, branch_buf)
    body = (_JSON_LEN.pack(len(spec_json)) + spec_json
            + hist_buf.getvalue() + branch_buf.getvalue())
    return _RECORD_LEN.pack(len(body)) + body


def write_training_records(records, sink) -> int:
    """Append each record to sink; returns the number written."""
    f, owned = _coerce_sink(sink)
    try:
        count = 0
        for record in records:
            if not isinstance(record, TrainingRecord):
                raise InvalidParameter("records must be TrainingRecord instances")
            f.write(_encode_record(record))
            count += 1
        return count
    finally:
        if owned:
            f.close()


def read_training_records(source):
    """Yield TrainingRecords until the stream is exhausted."""
    f, owned = _coerce_source(source)
    try:
        offset = 0
        while True:
            head = f.read(_RECORD_LEN.size)
            if not head:
                return
            if len(head) != _RECORD_LEN.size:
                raise FormatError("truncated record length prefix", offset=offset)
            (body_len,) = _RECORD_LEN.unpack(head)
            offset += _RECORD_LEN.size
            r = _Reader(f, base_offset=offset)
            body_start = offset
            jlen_buf = r.read_exact(_JSON_LEN.size, "spec JSON length")
            (json_len,) = _JSON_LEN.unpack(jlen_buf)
            if _JSON_LEN.size + json_len > body_len:
                raise FormatError(
                    f"spec JSON length {json_len} exceeds record body {body_len}",
                    offset=body_start,
                )
            spec_raw = r.read_exact(json_len, "spec JSON block")
            try:
                spec = spec_from_json(spec_raw.decode("utf-8"))
            except Exception as exc:
                raise FormatError(f"bad spec JSON: {exc}",
                                  offset=body_start + _JSON_LEN.size) from exc
            history = _read_frame(r)
            if not isinstance(history, PathMatrix):
                raise FormatError("expected a path frame for the history",
                                  offset=r.offset)
            branches = _read_frame(r)
            if not isinstance(branches, SampleSet):
                raise FormatError("expected a sample frame for the branches",
                                  offset=r.offset)
            if r.offset - body_start != body_len:
                raise FormatError(
                    f"record body length mismatch: declared {body_len}, "
                    f"consumed {r.offset - body_start}",
                    offset=r.offset,
                )
            offset = r.offset
            yield TrainingRecord(system_spec=spec, history=history,
                                 future_branches=branches)
    finally:
        if owned:
            f.close()

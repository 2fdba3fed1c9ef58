"""Trace and CSV persistence.

IQTF layout (little-endian): b"IQTF", u16 version, f64 carrier_hz,
f64 sample_rate_hz, f64 norm_mw, u64 sample_count, then interleaved
f32 I/Q pairs.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .channel import IRSnapshot
from .errors import TraceFormatError
from .link import IQTrace

MAGIC = b"IQTF"
VERSION = 1
_HEADER = struct.Struct("<4sHdddQ")


def _g(x) -> str:
    return format(float(x), ".9g")


def write_trace(path, trace: IQTrace) -> Path:
    path = Path(path)
    iq = np.empty(2 * len(trace), dtype="<f4")
    iq[0::2] = trace.samples.real
    iq[1::2] = trace.samples.imag
    header = _HEADER.pack(MAGIC, VERSION, trace.carrier_hz, trace.sample_rate_hz,
                          trace.norm_mw, len(trace))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(iq.tobytes())
    except OSError as e:
        raise OSError(f"{path}: cannot write trace: {e.strerror or e}") from e
    return path


def read_trace(path) -> IQTrace:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise OSError(f"{path}: cannot read trace: {e.strerror or e}") from e
    if len(data) < _HEADER.size:
        raise TraceFormatError(f"{path}: file too short for an IQTF header ({len(data)} bytes)")
    magic, version, fc, fs, norm, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TraceFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise TraceFormatError(f"{path}: unsupported IQTF version {version}")
    need = _HEADER.size + 8 * count
    if len(data) != need:
        raise TraceFormatError(
            f"{path}: header declares {count} samples ({need} bytes) but file has {len(data)} bytes")
    iq = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    samples = (iq[0::2] + 1j * iq[1::2]).astype(np.complex64)
    try:
        return IQTrace(fc, fs, norm, samples)
    except ValueError as e:
        raise TraceFormatError(f"{path}: {e}") from e


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as e:
        raise OSError(f"{path}: cannot write CSV: {e.strerror or e}") from e
    return path


def write_truth_csv(path, truth) -> Path:
    """Per-frame instantaneous channel parameters (s_inst, sigma_inst)."""
    rows = ((k, _g(t), _g(s), _g(sg)) for k, (t, s, sg) in
            enumerate(zip(truth.frame_times, truth.s_inst, truth.sigma_inst)))
    return _write_rows(path, ("frame_index", "time_s", "s_inst", "sigma_inst"), rows)


def write_envelope_track_csv(path, tr) -> Path:
    rows = ((k, _g(t), _g(f.s), _g(f.sigma), _g(f.residue), _g(f.log_likelihood))
            for k, (t, f) in enumerate(zip(tr.frame_times, tr.fits)))
    return _write_rows(path, ("frame_index", "time_s", "s", "sigma", "residue", "loglik"), rows)


def write_ir_csv(path, snapshots) -> Path:
    """Long-format snapshot export; every grid bin is written, empty ones as -inf."""
    def rows():
        for snap in snapshots:
            t = _g(snap.t)
            for d, p in zip(snap.delays_ns, snap.power_db):
                yield t, _g(d), _g(p)
    return _write_rows(path, ("time_s", "delay_ns", "power_db"), rows())


def read_ir_csv(path) -> list:
    """Snapshots from a long-format (time_s, delay_ns, power_db) CSV.

    Rows are grouped by time in file order; within a snapshot rows are
    sorted by delay.
    """
    path = Path(path)
    groups = {}
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise OSError(f"{path}: cannot read CSV: {e.strerror or e}") from e
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time_s", "delay_ns", "power_db"]:
            raise TraceFormatError(f"{path}:1: expected header time_s,delay_ns,power_db")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise TraceFormatError(f"{path}:{line}: expected 3 fields, got {len(row)}")
            try:
                t, d, p = (float(c) for c in row)
            except ValueError:
                raise TraceFormatError(f"{path}:{line}: non-numeric field in {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(d)) or d < 0 or math.isnan(p):
                raise TraceFormatError(f"{path}:{line}: invalid time/delay/power {row!r}")
            groups.setdefault(t, []).append((d, p))
    if not groups:
        raise TraceFormatError(f"{path}: no data rows")
    snaps = []
    for t, rows in groups.items():
        rows.sort()
        d = np.array([r[0] for r in rows]) * 1e-9
        p = np.array([r[1] for r in rows])
        snaps.append(IRSnapshot(t, d, p, 10.0 ** (p / 20.0) + 0j))
    return snaps


def write_path_tracks_csv(path, tracks) -> Path:
    def rows():
        for tr in tracks:
            for t, d, p in zip(tr.times, tr.delays_ns, tr.powers_db):
                yield tr.track_id, _g(t), _g(d), _g(p), tr.label.value
    return _write_rows(path, ("track_id", "time_s", "delay_ns", "power_db", "label"), rows())


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise OSError(f"{path}: cannot write summary: {e.strerror or e}") from e
    return path

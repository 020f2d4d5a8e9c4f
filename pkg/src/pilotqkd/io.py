"""Deterministic JSON and CSV writers for reports and plot data."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    """Convert numpy values, dataclasses and tuples to plain JSON types.

    Non-finite floats become ``None`` so the output stays strict JSON.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict) or hasattr(obj, "items"):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj):
    """UTF-8 JSON text with a trailing newline; key order is insertion order."""
    return json.dumps(to_jsonable(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def write_csv(path, header, columns):
    """Write equal-length columns under a header row.

    Floats use ``repr`` so values round-trip exactly; booleans are written
    as 0 / 1.
    """
    columns = [np.asarray(c).ravel() for c in columns]
    if len(header) != len(columns):
        raise ValueError("header and columns differ in length")
    if len({c.size for c in columns}) > 1:
        raise ValueError("columns differ in length")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*(c.tolist() for c in columns)):
            writer.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def read_csv(path):
    """Header and float columns of a file written by :func:`write_csv`."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return header, [data[:, k] for k in range(len(header))]


def write_spectrum(path, freqs, values):
    return write_csv(path, ["time_or_freq", "value"], [freqs, values])


def write_eye(path, eye_time, traces):
    """Eye traces in long format: one row per (trace, time) sample."""
    traces = np.asarray(traces)
    n, m = traces.shape
    return write_csv(
        path, ["time_or_freq", "value", "trace"],
        [np.tile(eye_time, n), traces.ravel(), np.repeat(np.arange(n), m)],
    )


def write_symbols(path, symbols, start=0):
    """Columnar symbol file: index, I, Q."""
    z = np.asarray(symbols, dtype=np.complex128)
    return write_csv(path, ["index", "i", "q"], [np.arange(start, start + z.size), z.real, z.imag])


def write_constellation(path, received, sent):
    r = np.asarray(received)
    s = np.asarray(sent)
    return write_csv(path, ["i", "q", "tx_i", "tx_q"], [r.real, r.imag, s.real, s.imag])

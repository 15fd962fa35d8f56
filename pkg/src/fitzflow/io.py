"""Deterministic, atomic CSV / plot-data / manifest writers."""

import csv
import hashlib
import io
import json
import math
import os
import tempfile

import numpy as np

from .exceptions import FitzflowError

__all__ = [
    "OutputError",
    "config_hash",
    "format_value",
    "read_csv",
    "write_csv",
    "write_json",
    "write_plot_data",
]


class OutputError(FitzflowError, OSError):
    """Writing an artifact failed."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def config_hash(cfg):
    """First 16 hex digits of the SHA-256 of the canonical JSON of ``cfg``."""
    text = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def format_value(x):
    """Round-trip text for a cell; infinities as ``+inf`` / ``-inf``."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(folder, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _comment(meta):
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"


def write_csv(path, header, rows, meta):
    """Write ``rows`` under ``header``; the first line is ``# key=value ...`` from ``meta``."""
    buf = io.StringIO()
    buf.write(_comment(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return _atomic_write(path, buf.getvalue())


def write_plot_data(path, pairs, meta):
    """Two whitespace-separated columns ``n distance`` with a comment line."""
    lines = [_comment(meta)]
    lines += [f"{format_value(a)} {format_value(b)}\n" for a, b in pairs]
    return _atomic_write(path, "".join(lines))


def write_json(path, obj):
    return _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_csv(path):
    """``(meta, header, rows)``; numeric cells become floats."""

    def parse(cell):
        try:
            return float(cell)
        except ValueError:
            return cell

    with open(path, newline="") as fh:
        first = fh.readline()
        meta = {}
        if first.startswith("#"):
            for item in first[1:].split():
                k, _, v = item.partition("=")
                meta[k] = v
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[parse(c) for c in r] for r in reader]
    return meta, header, rows

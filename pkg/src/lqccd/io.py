"""Reading and writing problems, ground truth, solution vectors and reports.

A problem lives in a directory::

    A.csv  or  A.bin     measurement matrix
    y.csv                observation vector
    x_true.csv           planted signal (optional)
    meta.txt             key=value lines: seed, snr_db, ... (optional)

CSV files hold one matrix row per line with ``%.17g`` floats, which round-trips
doubles exactly. ``A.bin`` is a 24-byte header (8-byte magic, little-endian
uint64 rows and cols) followed by row-major little-endian float64 data.
Reports are JSON.
"""

from __future__ import annotations

import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .problem import GroundTruth, Problem
from .validation import DimensionMismatchError

__all__ = [
    "ProblemFileError",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_matrix_bin",
    "read_matrix_bin",
    "save_problem",
    "load_problem",
    "load_truth",
    "read_vector",
    "write_vector",
    "save_report",
    "load_report",
    "read_key_values",
]

MAGIC = b"LQMATRX1"
_HEADER = struct.Struct("<8sQQ")


class ProblemFileError(ValueError):
    """A problem, vector or report file could not be parsed."""


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    np.savetxt(path, M, fmt="%.17g", delimiter=",")


def read_matrix_csv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ProblemFileError(f"malformed CSV matrix {path}: {exc}") from exc
    return M


def write_matrix_bin(path, M):
    M = np.ascontiguousarray(np.atleast_2d(M), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, M.shape[0], M.shape[1]))
        fh.write(M.tobytes())


def read_matrix_bin(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ProblemFileError(f"{path}: truncated header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ProblemFileError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size :]
    if len(body) != 8 * rows * cols:
        raise ProblemFileError(
            f"{path}: header says {rows}x{cols} but payload has {len(body)} bytes"
        )
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def read_vector(path):
    """Read a vector from CSV (one value per line or a single row) or a JSON report."""
    path = Path(path)
    if path.suffix == ".json":
        return np.asarray(load_report(path)["x_final"], dtype=np.float64)
    M = read_matrix_csv(path)
    if 1 not in M.shape:
        raise ProblemFileError(f"{path}: expected a vector, got shape {M.shape}")
    return M.ravel()


def write_vector(path, v):
    np.savetxt(path, np.asarray(v, dtype=np.float64).reshape(-1, 1), fmt="%.17g")


def read_key_values(path):
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ProblemFileError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def save_problem(directory, problem, truth=None, fmt="csv", meta=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for stale in ("A.csv", "A.bin"):
        if (directory / stale).exists():
            os.remove(directory / stale)
    if fmt == "csv":
        write_matrix_csv(directory / "A.csv", problem.A)
    elif fmt == "bin":
        write_matrix_bin(directory / "A.bin", problem.A)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    write_vector(directory / "y.csv", problem.y)
    meta = dict(meta or {})
    if truth is not None:
        write_vector(directory / "x_true.csv", truth.x_star)
        meta.setdefault("snr_db", repr(truth.snr_db))
    if meta:
        with open(directory / "meta.txt", "w") as fh:
            for key, value in meta.items():
                fh.write(f"{key}={value}\n")
    return directory


def load_problem(path, reg=None, q=None):
    """Load a problem directory written by :func:`save_problem`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such problem directory: {path}")
    if (path / "A.bin").exists():
        A = read_matrix_bin(path / "A.bin")
    else:
        A = read_matrix_csv(path / "A.csv")
    y = read_vector(path / "y.csv")
    if y.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            f"{path}: y has length {y.shape[0]} but A has {A.shape[0]} rows"
        )
    return Problem(A, y, reg, q)


def load_truth(path):
    """Ground truth stored next to a problem, or ``None`` when absent."""
    path = Path(path)
    if not (path / "x_true.csv").exists():
        return None
    x = read_vector(path / "x_true.csv")
    snr = math.nan
    if (path / "meta.txt").exists():
        snr = float(read_key_values(path / "meta.txt").get("snr_db", "nan"))
    return GroundTruth(x, np.flatnonzero(x), snr)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def save_report(path, report):
    """Serialize a report (any object with ``to_dict``, or a dict) as JSON."""
    data = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=1)
    return Path(path)


def load_report(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such report: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"malformed report {path}: {exc}") from exc

"""CSV and windowing helpers shared by the command-line front end.

Conventions: comma separator, decimal point, row = time sample, column =
channel; an optional header row is auto-detected.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = [
    "read_signal_csv",
    "write_matrix_csv",
    "segment_offsets",
]


def _is_header(line: str) -> bool:
    for token in line.split(","):
        try:
            float(token.strip())
        except ValueError:
            return True
    return False


def read_signal_csv(path) -> np.ndarray:
    """Load an n x K signal matrix, skipping a header row when present."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty input")
        skip = 1 if _is_header(first) else 0
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed CSV ({exc})") from None
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite values")
    return data


def write_matrix_csv(path, arr) -> None:
    """Write a matrix as plain CSV (no header), full double precision."""
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")


def segment_offsets(n: int, window: int, stride: int) -> list[int]:
    """Start offsets of floor((n - window)/stride) + 1 windows."""
    if window > n:
        raise ValueError(f"window length {window} exceeds signal length {n}")
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    count = (n - window) // stride + 1
    return [i * stride for i in range(count)]

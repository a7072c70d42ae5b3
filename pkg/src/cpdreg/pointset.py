"""Point-set loading, validation, normalization and persistence.

Point sets are plain ``(M, D)`` float64 numpy arrays. Files are UTF-8 text
with one point per line, whitespace- or comma-separated columns and ``#``
comment lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    EmptyInputError,
    ParameterError,
    ParseError,
    PointFileError,
    WriteError,
)

_SPLIT = re.compile(r"[,\s]+")


def as_points(points, name="points") -> np.ndarray:
    """Validate ``points`` and return it as a 2-D float64 array.

    A 1-D input is read as ``M`` points of dimension 1.
    """
    arr = np.array(points, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be an (M, D) matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"{name} must hold at least one point of dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or Inf entries")
    return np.ascontiguousarray(arr)


def load_points(path, expected_dim: int | None = None) -> np.ndarray:
    """Read a point file into an ``(M, D)`` array, rows in file order."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise PointFileError(f"cannot read point file: {exc.strerror or exc}", path=path) from exc

    rows = []
    dim = expected_dim
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        tokens = [t for t in _SPLIT.split(text) if t]
        try:
            values = [float(t) for t in tokens]
        except ValueError as exc:
            raise ParseError(f"malformed number ({exc})", path=path, line=lineno) from None
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise DimensionError(
                f"expected {dim} columns, found {len(values)}", path=path, line=lineno
            )
        rows.append(values)

    if not rows:
        raise EmptyInputError("no points in file", path=path)
    arr = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite coordinate", path=path)
    return arr


def write_points(points, path) -> None:
    """Write points one per line using round-trip (``repr``) precision."""
    arr = as_points(points)
    text = "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in arr)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc.strerror or exc}") from exc


@dataclass(frozen=True)
class NormalizationRecord:
    """Shared affine map ``normalized = (x - center) / scale``."""

    center: np.ndarray
    scale: float
    degenerate: bool = False

    def apply(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) / self.scale

    def invert(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.center


def normalize_pair(X, Y):
    """Map ``X`` and ``Y`` into ``[-1, 1]^D`` with one shared transform.

    The union of both sets is centred on its centroid and divided by the
    largest absolute coordinate after centring. Using a single map keeps
    any translation or scale difference between the two sets intact.

    Returns ``(X_normalized, Y_normalized, record)``.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ParameterError(f"dimension mismatch: X has D={X.shape[1]}, Y has D={Y.shape[1]}")
    union = np.vstack([X, Y])
    center = union.mean(axis=0)
    extent = float(np.max(np.abs(union - center)))
    # a spread at roundoff level (identical points whose mean is inexact) is no spread
    degenerate = not extent > 16.0 * np.finfo(np.float64).eps * float(np.max(np.abs(union)))
    scale = 1.0 if degenerate else extent
    record = NormalizationRecord(center=center, scale=scale, degenerate=degenerate)
    return record.apply(X), record.apply(Y), record


def denormalize(points, record: NormalizationRecord) -> np.ndarray:
    return record.invert(points)


def write_report(entries: dict, path) -> None:
    """Write a flat ``key = value`` run report.

    Sequences are written comma-separated; floats keep full precision.
    """
    lines = []
    for key, value in entries.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            text = ",".join(_fmt(v) for v in value)
        else:
            text = _fmt(value)
        lines.append(f"{key} = {text}\n")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_report(path) -> dict:
    """Parse a report written by :func:`write_report` into strings."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            if " = " not in text and not text.endswith(" ="):
                raise ParseError("expected 'key = value'", path=path, line=lineno)
            key, _, value = text.partition(" =")
            entries[key.strip()] = value.strip()
    return entries


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)

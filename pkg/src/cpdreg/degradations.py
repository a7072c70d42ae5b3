"""Synthetic degradations with ground-truth bookkeeping.

Every generator is a pure function of ``(input, parameters, seed)``; the
input array is never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ParameterError, PointFileError, WriteError
from .pointset import as_points


@dataclass(frozen=True)
class GroundTruth:
    """Ground-truth scene positions for a subset of model indices."""

    indices: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        if self.indices.shape[0] != self.positions.shape[0]:
            raise ParameterError("truth indices and positions differ in length")

    def __len__(self):
        return int(self.indices.shape[0])

    @classmethod
    def identity(cls, positions) -> "GroundTruth":
        positions = np.asarray(positions, dtype=np.float64)
        return cls(np.arange(positions.shape[0]), positions.copy())

    @classmethod
    def from_mapping(cls, mapping: dict) -> "GroundTruth":
        keys = sorted(mapping)
        if not keys:
            return cls(np.zeros(0, dtype=int), np.zeros((0, 0)))
        return cls(np.asarray(keys, dtype=int), np.asarray([mapping[k] for k in keys], dtype=np.float64))

    def as_mapping(self) -> dict:
        return {int(i): self.positions[k].copy() for k, i in enumerate(self.indices)}

    def restrict(self, kept) -> "GroundTruth":
        """Truth after keeping model rows ``kept`` (in order); indices are renumbered."""
        kept = np.asarray(kept, dtype=int)
        lookup = {int(i): k for k, i in enumerate(self.indices)}
        new_idx, rows = [], []
        for new, old in enumerate(kept):
            k = lookup.get(int(old))
            if k is not None:
                new_idx.append(new)
                rows.append(k)
        return GroundTruth(np.asarray(new_idx, dtype=int), self.positions[rows].reshape(len(rows), -1))


@dataclass(frozen=True)
class DegradedPair:
    model: np.ndarray
    scene: np.ndarray
    truth: GroundTruth


def _rng(seed, stream: int):
    # a distinct stream per generator keeps e.g. noise and cloud sampling
    # uncorrelated when callers reuse one seed
    return np.random.default_rng([stream, int(seed)])


def add_noise(ps, stddev: float, seed=0) -> np.ndarray:
    """Independent zero-mean Gaussian perturbation of every coordinate."""
    if not stddev >= 0:
        raise ParameterError(f"stddev must be non-negative, got {stddev}")
    ps = as_points(ps)
    if stddev == 0:
        return ps
    return ps + _rng(seed, 1).normal(0.0, stddev, size=ps.shape)


def add_outliers(ps, ratio: float, seed=0) -> np.ndarray:
    """Append ``floor(ratio * M)`` points uniform over the bounding box grown by 10%."""
    if not ratio >= 0:
        raise ParameterError(f"ratio must be non-negative, got {ratio}")
    ps = as_points(ps)
    count = int(math.floor(ratio * ps.shape[0]))
    if count == 0:
        return ps
    lo, hi = ps.min(axis=0), ps.max(axis=0)
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0 * 1.1
    extra = _rng(seed, 2).uniform(mid - half, mid + half, size=(count, ps.shape[1]))
    return np.vstack([ps, extra])


def occlude(ps, count: int, seed=0):
    """Remove a spatially contiguous patch of ``count`` points.

    The patch is the ``count`` nearest neighbours of a randomly chosen seed
    point (the seed included). Returns ``(kept_points, kept_indices)`` with
    surviving rows in their original order.
    """
    ps = as_points(ps)
    M = ps.shape[0]
    if int(count) != count or count < 0:
        raise ParameterError(f"count must be a non-negative integer, got {count}")
    if count >= M:
        raise ParameterError(f"cannot remove {count} of {M} points; count must be < M")
    if count == 0:
        return ps, np.arange(M)
    centre = int(_rng(seed, 3).integers(M))
    dist = cdist(ps[centre : centre + 1], ps)[0]
    order = np.argsort(dist, kind="stable")
    kept = np.sort(order[count:])
    return ps[kept], kept


def synth_deform(ps, amplitude: float, warp_beta: float = 2.0, seed=0) -> DegradedPair:
    """Warp ``ps`` by a Gaussian-RBF displacement field on random control points.

    ``ceil(M/50)`` control points carry coefficients drawn with standard
    deviation ``amplitude``; the field bandwidth is ``warp_beta``.
    """
    if not amplitude >= 0:
        raise ParameterError(f"amplitude must be non-negative, got {amplitude}")
    if not warp_beta > 0:
        raise ParameterError(f"warp_beta must be positive, got {warp_beta}")
    ps = as_points(ps)
    M, D = ps.shape
    if amplitude == 0:
        return DegradedPair(ps, ps.copy(), GroundTruth.identity(ps))
    rng = _rng(seed, 4)
    n_ctrl = math.ceil(M / 50)
    ctrl = ps[rng.choice(M, size=n_ctrl, replace=False)]
    coeffs = rng.normal(0.0, amplitude, size=(n_ctrl, D))
    field = np.exp(cdist(ps, ctrl, "sqeuclidean") / (-2.0 * warp_beta**2)) @ coeffs
    warped = ps + field
    return DegradedPair(ps, warped, GroundTruth.identity(warped))


def occlude_model(pair: DegradedPair, count: int, seed=0) -> DegradedPair:
    model, kept = occlude(pair.model, count, seed)
    return DegradedPair(model, pair.scene, pair.truth.restrict(kept))


def synthetic_cloud(n: int, dim: int = 3, seed=0) -> np.ndarray:
    """Points on an asymmetric closed surface (``dim=3``) or curve (``dim=2``) in ``[-1, 1]^dim``.

    Stand-in for scanned shapes; the lobes break rotational symmetry so
    index-based ground truth stays meaningful.
    """
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    rng = _rng(seed, 5)
    if dim == 2:
        t = rng.uniform(0.0, 2.0 * math.pi, n)
        r = 1.0 + 0.3 * np.cos(3 * t) + 0.15 * np.sin(5 * t + 0.4)
        pts = np.column_stack([1.2 * r * np.cos(t), 0.8 * r * np.sin(t)])
    elif dim == 3:
        u = rng.normal(size=(n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
        phi = np.arctan2(u[:, 1], u[:, 0])
        r = (
            1.0
            + 0.25 * np.sin(2 * theta) * np.cos(3 * phi)
            + 0.15 * np.cos(3 * theta + 0.5)
            + 0.35 * np.exp(-8.0 * np.sum((u - np.array([0.6, 0.0, 0.8])) ** 2, axis=1))
        )
        pts = u * r[:, None] * np.array([1.2, 0.8, 0.6])
    else:
        raise ParameterError(f"synthetic clouds exist for dim 2 or 3, got {dim}")
    pts -= pts.mean(axis=0)
    return pts / np.max(np.abs(pts))


def write_truth(truth: GroundTruth, path) -> None:
    """One line per covered model index: ``index x y ...``."""
    lines = [
        f"{int(i)} " + " ".join(repr(float(v)) for v in row) + "\n"
        for i, row in zip(truth.indices, truth.positions)
    ]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# model_index coordinates\n")
            fh.writelines(lines)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_truth(path) -> GroundTruth:
    idx, rows = [], []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise PointFileError(f"cannot read truth file: {exc.strerror or exc}", path=path) from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.replace(",", " ").split()
            try:
                idx.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:]])
            except (ValueError, IndexError):
                raise PointFileError("malformed truth line", path=path, line=lineno) from None
    if not idx:
        return GroundTruth(np.zeros(0, dtype=int), np.zeros((0, 0)))
    return GroundTruth(np.asarray(idx, dtype=int), np.asarray(rows, dtype=np.float64))

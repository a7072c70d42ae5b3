"""Registration error and the multi-size runtime benchmark."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .degradations import GroundTruth
from .errors import CPDRegError, ParameterError
from .registration import RegistrationConfig, register
from .solvers import SolverVariant
from .timing import TimingBreakdown

log = logging.getLogger(__name__)

CSV_HEADER = ["M", "N", "variant", "t_c", "t_eig", "t_iter", "t_f", "t_o", "t_total", "rmse", "iterations"]


def rmse(transformed, truth) -> float:
    """Root-mean-square distance over the model points that have a truth entry."""
    if isinstance(truth, dict):
        truth = GroundTruth.from_mapping(truth)
    if len(truth) == 0:
        raise ParameterError("ground truth is empty")
    transformed = np.asarray(transformed, dtype=np.float64)
    diff = transformed[truth.indices] - truth.positions
    return math.sqrt(float(np.sum(diff * diff)) / len(truth))


@dataclass(frozen=True)
class BenchRecord:
    M: int
    N: int
    variant: SolverVariant
    timing: TimingBreakdown
    rmse: float
    iterations: int
    failed: bool = False
    error: str = field(default="", compare=False)

    def row(self) -> list:
        t = self.timing.as_strings()
        score = "nan" if self.failed else repr(float(self.rmse))
        return [self.M, self.N, self.variant.value, *(t[k] for k in CSV_HEADER[3:9]), score, self.iterations]


def random_affine(points, seed=0, max_angle_deg=10.0, scale_range=(0.9, 1.1), max_shift=0.1):
    """Mild random affine map: rotation, anisotropic scale, translation."""
    points = np.asarray(points, dtype=np.float64)
    D = points.shape[1]
    rng = np.random.default_rng(seed)
    if D >= 2:
        # rotation about a random axis (D=3) or in the plane (D=2)
        angle = math.radians(rng.uniform(-max_angle_deg, max_angle_deg))
        if D == 2:
            R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        else:
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
            R3 = np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * kx @ kx
            R = np.eye(D)
            R[:3, :3] = R3
    else:
        R = np.eye(D)
    S = np.diag(rng.uniform(*scale_range, size=D))
    t = rng.uniform(-max_shift, max_shift, size=D)
    center = points.mean(axis=0)
    return (points - center) @ (R @ S).T + center + t


def resample(points, size: int, seed=0) -> np.ndarray:
    """Uniform random subsample of exactly ``size`` rows, without replacement."""
    points = np.asarray(points)
    if not 1 <= size <= points.shape[0]:
        raise ParameterError(f"cannot draw {size} points from a cloud of {points.shape[0]}")
    idx = np.sort(np.random.default_rng(seed).choice(points.shape[0], size=size, replace=False))
    return points[idx]


def run_benchmark(sizes, variants, cfg: RegistrationConfig, seed=0, source=None, warmup=True,
                  generator=None):
    """Sweep registration over cloud sizes and solver variants, one cell at a time.

    At each size the scene is a subsample of ``source`` (or a fresh cloud
    from ``generator(size, seed)``) and the model a random affine copy of
    it; ground truth is the identity pairing. Cells run strictly
    sequentially. A failing cell is recorded with ``failed=True``.
    """
    if source is None and generator is None:
        raise ParameterError("either a source cloud or a generator is required")
    variants = [SolverVariant.parse(v) for v in variants]
    records = []
    for size in sizes:
        if size < 1:
            raise ParameterError(f"sizes must be positive, got {size}")
        scene = generator(size, seed) if source is None else resample(source, size, seed)
        model = random_affine(scene, seed=seed + 1)
        truth = GroundTruth.identity(scene)
        for variant in variants:
            cell_cfg = replace(cfg, variant=variant)
            try:
                if warmup:
                    register(model, scene, cell_cfg)
                result = register(model, scene, cell_cfg)
                score = rmse(result.transformed, truth)
                records.append(BenchRecord(size, scene.shape[0], variant, result.timing, score,
                                           result.iterations))
            except (CPDRegError, np.linalg.LinAlgError, MemoryError) as exc:
                log.warning("cell M=%d variant=%s failed: %s", size, variant.value, exc)
                records.append(BenchRecord(size, scene.shape[0], variant, TimingBreakdown(), math.nan,
                                           0, failed=True, error=str(exc)))
            log.info("M=%d %s done", size, variant.value)
    return records


def write_bench_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow(rec.row())


def read_bench_csv(path) -> list:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ParameterError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            score = float(row["rmse"])
            records.append(
                BenchRecord(
                    M=int(row["M"]),
                    N=int(row["N"]),
                    variant=SolverVariant.parse(row["variant"]),
                    timing=TimingBreakdown.from_strings(row),
                    rmse=score,
                    iterations=int(row["iterations"]),
                    failed=math.isnan(score),
                )
            )
    return records

"""E-step: GMM posterior probabilities and the row-sum constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ParameterError

SIGMA2_FLOOR = 1e-10
# rows whose total mass is below this fall back to the uniform row
DEGENERATE_ROW = 1e-300


@dataclass(frozen=True)
class GmmParams:
    omega: float
    sigma2: float

    def __post_init__(self):
        if not 0.0 <= self.omega < 1.0:
            raise ParameterError(f"omega must lie in [0, 1), got {self.omega}")
        if not self.sigma2 >= 0:
            raise ParameterError(f"sigma2 must be non-negative, got {self.sigma2}")


@dataclass
class Correspondence:
    """Soft assignment matrix between ``M`` model and ``N`` scene points.

    ``log_p`` is kept when the posterior was produced with ``keep_log=True``;
    the row constraint then normalizes in the log domain, which cannot
    underflow a whole row.
    """

    p: np.ndarray
    row_constrained: bool = False
    log_p: np.ndarray | None = None
    sigma2_clamped: bool = False
    degenerate_rows: list = field(default_factory=list)

    @property
    def shape(self):
        return self.p.shape


def outlier_constant(sigma2: float, omega: float, D: int, M: int, N: int) -> float:
    """``c = (2 pi sigma2)^(D/2) * omega/(1-omega) * M/N``."""
    return (2.0 * math.pi * sigma2) ** (D / 2.0) * omega / (1.0 - omega) * M / N


def posterior(X_t, Y, params: GmmParams, keep_log: bool = False) -> Correspondence:
    """Posterior probability that scene point ``n`` was generated by model point ``m``.

    Exponents are shifted by their per-column maximum before exponentiation,
    so small ``sigma2`` values do not underflow every entry of a column.
    """
    X_t = np.asarray(X_t, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X_t.ndim != 2 or Y.ndim != 2 or X_t.shape[1] != Y.shape[1]:
        raise ParameterError(f"shape mismatch: X_t {X_t.shape}, Y {Y.shape}")
    M, D = X_t.shape
    N = Y.shape[0]
    sigma2 = params.sigma2
    clamped = sigma2 < SIGMA2_FLOOR
    if clamped:
        sigma2 = SIGMA2_FLOOR

    expo = cdist(X_t, Y, "sqeuclidean")
    expo *= -1.0 / (2.0 * sigma2)
    shift = expo.max(axis=0)
    expo -= shift
    if keep_log:
        kernel = np.exp(expo)
    else:
        kernel = np.exp(expo, out=expo)

    c = outlier_constant(sigma2, params.omega, D, M, N)
    if c > 0:
        with np.errstate(over="ignore"):
            c_shifted = np.exp(math.log(c) - shift)
    else:
        c_shifted = np.zeros(N)
    denom = kernel.sum(axis=0) + c_shifted

    if keep_log:
        log_p = expo - np.log(denom)
        kernel /= denom
        return Correspondence(p=kernel, log_p=log_p, sigma2_clamped=clamped)
    kernel /= denom
    return Correspondence(p=kernel, sigma2_clamped=clamped)


def posterior_unshifted(X_t, Y, params: GmmParams) -> np.ndarray:
    """Direct evaluation without the max-shift; reference for small, well-scaled inputs."""
    X_t = np.asarray(X_t, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    M, D = X_t.shape
    N = Y.shape[0]
    g = np.exp(-cdist(X_t, Y, "sqeuclidean") / (2.0 * params.sigma2))
    c = outlier_constant(params.sigma2, params.omega, D, M, N)
    return g / (g.sum(axis=0) + c)


def enforce_row_constraint(p_raw) -> Correspondence:
    """Rescale every row to sum to one.

    Rows with (near) zero total mass are replaced by the uniform row and
    their indices recorded in ``degenerate_rows``.
    """
    if not isinstance(p_raw, Correspondence):
        p_raw = Correspondence(p=np.asarray(p_raw, dtype=np.float64))
    N = p_raw.p.shape[1]

    if p_raw.log_p is not None:
        log_p = p_raw.log_p
        row_max = log_p.max(axis=1, keepdims=True)
        bad = ~np.isfinite(row_max[:, 0])
        row_max[bad] = 0.0
        p = np.exp(log_p - row_max)
        sums = p.sum(axis=1)
        bad |= ~(sums > 0)
    else:
        p = np.array(p_raw.p, dtype=np.float64, copy=True)
        sums = p.sum(axis=1)
        bad = ~(sums >= DEGENERATE_ROW)

    sums[bad] = 1.0
    p /= sums[:, None]
    if np.any(bad):
        p[bad] = 1.0 / N
    degenerate = sorted(set(p_raw.degenerate_rows) | set(np.flatnonzero(bad).tolist()))
    return Correspondence(
        p=p,
        row_constrained=True,
        sigma2_clamped=p_raw.sigma2_clamped,
        degenerate_rows=degenerate,
    )


def estimated_targets(corr, Y) -> np.ndarray:
    """Per-model-point target positions ``P @ Y``."""
    p = corr.p if isinstance(corr, Correspondence) else np.asarray(corr)
    Y = np.asarray(Y, dtype=np.float64)
    if p.shape[1] != Y.shape[0]:
        raise ParameterError(f"P has {p.shape[1]} columns but Y has {Y.shape[0]} rows")
    return p @ Y

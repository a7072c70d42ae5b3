"""EM driver: alternate correspondence estimation and the M-step solve."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernel as kern
from .correspondence import (
    SIGMA2_FLOOR,
    Correspondence,
    GmmParams,
    enforce_row_constraint,
    estimated_targets,
    posterior,
)
from .errors import CPDRegError, ParameterError
from .pointset import NormalizationRecord, as_points, normalize_pair
from .solvers import (
    SolverVariant,
    apply_transform,
    apply_transform_lowrank,
    solve_cpd_lowrank_system,
    solve_cpd_system,
    solve_fast,
    solve_fast_lowrank,
    update_sigma2,
    update_sigma2_cpd,
)
from .timing import PhaseClock, TimingBreakdown

log = logging.getLogger(__name__)


@dataclass
class RegistrationConfig:
    omega: float = 0.7
    beta: float = 2.0
    lambda_reg: float = 10.0
    iterations: int = 100
    variant: SolverVariant = SolverVariant.FAST
    rank_fraction: float = 0.1
    seed: int = 0
    normalize: bool = True
    # stop once |delta sigma2| falls below this; None runs every iteration
    tol: float | None = None
    # directory for the on-disk eigendecomposition cache; None disables it
    cache_dir: str | None = None

    def __post_init__(self):
        self.variant = SolverVariant.parse(self.variant)
        if not 0.0 <= self.omega < 1.0:
            raise ParameterError(f"omega must lie in [0, 1), got {self.omega}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not self.lambda_reg > 0:
            raise ParameterError(f"lambda must be positive, got {self.lambda_reg}")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ParameterError(f"iterations must be a non-negative integer, got {self.iterations}")
        self.iterations = int(self.iterations)
        if not 0 < self.rank_fraction <= 1:
            raise ParameterError(f"rank_fraction must lie in (0, 1], got {self.rank_fraction}")
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d


@dataclass
class RegistrationResult:
    transformed: np.ndarray
    coefficients: np.ndarray
    correspondence: Correspondence | None
    sigma2_trace: list
    timing: TimingBreakdown
    normalization: NormalizationRecord | None = None
    sigma2_initial: float = 0.0
    rank: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.sigma2_trace)


def init_sigma2(X, Y) -> float:
    """Mean squared distance over all model/scene pairs, divided by ``D``.

    Not floored; callers clamp to ``SIGMA2_FLOOR``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    M, D = X.shape
    N = Y.shape[0]
    # centring keeps the expanded form free of cancellation for offset data
    center = (X.sum(axis=0) + Y.sum(axis=0)) / (M + N)
    Xc = X - center
    Yc = Y - center
    total = N * np.sum(Xc * Xc) + M * np.sum(Yc * Yc) - 2.0 * float(Xc.sum(axis=0) @ Yc.sum(axis=0))
    return max(float(total) / (D * M * N), 0.0)


def register(X, Y, cfg: RegistrationConfig | None = None) -> RegistrationResult:
    """Deform model ``X`` (M x D) onto scene ``Y`` (N x D).

    The returned ``transformed`` set is in the input units; coefficients and
    the correspondence refer to the normalized frame when ``cfg.normalize``.
    """
    cfg = cfg or RegistrationConfig()
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ParameterError(f"dimension mismatch: X has D={X.shape[1]}, Y has D={Y.shape[1]}")
    variant = cfg.variant
    M, D = X.shape

    clock = PhaseClock()
    clock.start()

    record = None
    if cfg.normalize:
        Xn, Yn, record = normalize_pair(X, Y)
    else:
        Xn, Yn = X, Y

    gram = kern.build_gram(Xn, cfg.beta)
    K = kern.rank_for(M, cfg.rank_fraction) if variant.lowrank else M
    basis = None
    if variant is not SolverVariant.CPD:
        with clock.phase("eig"):
            if cfg.cache_dir:
                basis = kern.cached_eigendecompose(gram, Xn, K, cfg.cache_dir)
            else:
                basis = kern.eigendecompose(gram, K)

    sigma2_initial = init_sigma2(Xn, Yn)
    sigma2 = max(sigma2_initial, SIGMA2_FLOOR)
    X_t = Xn.copy()
    W = np.zeros_like(Xn)
    corr = None
    trace = []
    degenerate_rows = 0
    clamp_events = 0

    for it in range(cfg.iterations):
        try:
            with clock.phase("c"):
                corr = posterior(X_t, Yn, GmmParams(cfg.omega, sigma2), keep_log=variant.constrained)
                if variant.constrained:
                    corr = enforce_row_constraint(corr)
                    Y_hat = estimated_targets(corr, Yn)
                else:
                    p1 = corr.p.sum(axis=1)
                    py = corr.p @ Yn

            with clock.phase("iter"):
                if variant is SolverVariant.FAST:
                    W = solve_fast(basis, cfg.lambda_reg, sigma2, Y_hat - Xn)
                elif variant is SolverVariant.FAST_LOWRANK:
                    W = solve_fast_lowrank(basis, cfg.lambda_reg, sigma2, Y_hat - Xn)
                elif variant is SolverVariant.CPD:
                    W = solve_cpd_system(gram, p1, py, Xn, cfg.lambda_reg, sigma2)
                else:
                    W, Z = solve_cpd_lowrank_system(basis, p1, py, Xn, cfg.lambda_reg, sigma2)

            if variant is SolverVariant.CPD:
                X_t = apply_transform(Xn, gram, W)
            elif variant is SolverVariant.CPD_LOWRANK:
                X_t = Xn + basis.U @ Z
            else:
                X_t = apply_transform_lowrank(Xn, basis, W)

            previous = sigma2
            if variant.constrained:
                sigma2 = update_sigma2(Yn, corr, X_t)
            else:
                sigma2 = update_sigma2_cpd(Yn, corr, X_t)
        except CPDRegError as exc:
            exc.iteration = it
            if exc.args:
                exc.args = (f"iteration {it}: {exc.args[0]}",) + exc.args[1:]
            raise

        trace.append(sigma2)
        degenerate_rows += len(corr.degenerate_rows)
        clamp_events += int(corr.sigma2_clamped) + int(sigma2 <= SIGMA2_FLOOR)
        if cfg.tol is not None and abs(previous - sigma2) < cfg.tol:
            log.debug("sigma2 converged after %d iterations", it + 1)
            break

    transformed = record.invert(X_t) if record is not None else X_t
    clock.stop()

    diagnostics = {
        "degenerate_rows": degenerate_rows,
        "sigma2_clamp_events": clamp_events,
        "row_constraint": variant.constrained,
        "m_step": _M_STEP_METHOD[variant],
        "sigma2_update": "row-constrained trace form" if variant.constrained else "cpd weighted",
    }
    return RegistrationResult(
        transformed=transformed,
        coefficients=W,
        correspondence=corr,
        sigma2_trace=trace,
        timing=clock.breakdown(),
        normalization=record,
        sigma2_initial=sigma2_initial,
        rank=K,
        diagnostics=diagnostics,
    )


_M_STEP_METHOD = {
    SolverVariant.FAST: "eigenbasis diagonal update",
    SolverVariant.FAST_LOWRANK: "truncated eigenbasis diagonal update",
    SolverVariant.CPD: "dense LU solve",
    SolverVariant.CPD_LOWRANK: "truncated kernel, K x K LU solve",
}

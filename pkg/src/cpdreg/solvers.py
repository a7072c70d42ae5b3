"""M-step solvers for the displacement coefficients ``W`` and the variance update.

Four strategies share one contract, ``(Phi + lambda*sigma2*I) W = Y_hat - X``
or its CPD generalisation with per-row weights:

* ``fast``          eigenbasis solve, diagonal update only
* ``fast_lowrank``  same with the ``K`` leading eigenpairs
* ``cpd``           dense LU solve of the row-weighted CPD system
* ``cpd_lowrank``   CPD system on the truncated kernel, ``K x K`` solve
"""

from __future__ import annotations

import enum
import warnings

import numpy as np
import scipy.linalg

from .correspondence import SIGMA2_FLOOR, Correspondence
from .errors import NumericError, ParameterError
from .kernel import GramKernel, SpectralBasis

SIGMA2_NEG_SLACK = 1e-8


class SolverVariant(str, enum.Enum):
    CPD = "cpd"
    CPD_LOWRANK = "cpd_lowrank"
    FAST = "fast"
    FAST_LOWRANK = "fast_lowrank"

    @classmethod
    def parse(cls, name) -> "SolverVariant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ParameterError(f"unknown solver variant {name!r} (choose from {choices})") from None

    @property
    def lowrank(self) -> bool:
        return self in (SolverVariant.CPD_LOWRANK, SolverVariant.FAST_LOWRANK)

    @property
    def constrained(self) -> bool:
        """Whether the E-step enforces unit row sums for this variant."""
        return self in (SolverVariant.FAST, SolverVariant.FAST_LOWRANK)


def _check_residual(residual, M):
    residual = np.asarray(residual, dtype=np.float64)
    if residual.ndim == 1:
        residual = residual[:, None]
    if residual.shape[0] != M:
        raise ParameterError(f"residual has {residual.shape[0]} rows, basis has M={M}")
    return residual


def _eigen_solve(basis: SpectralBasis, lambda_reg: float, sigma2: float, residual) -> np.ndarray:
    shift = lambda_reg * sigma2
    diag = basis.lam + shift
    if not np.all(diag > 0):
        raise NumericError(
            "Lambda + lambda*sigma2*I is not positive",
            min_eigenvalue=float(basis.lam.min()),
            shift=shift,
        )
    residual = _check_residual(residual, basis.M)
    return _project(basis.U, residual, 1.0 / diag)


def _project(U, R, scale) -> np.ndarray:
    """``U d(scale) U^T R`` with both products streaming ``U`` row by row."""
    # row-vector x matrix form is markedly faster than U.T @ R once U spills the cache
    coeffs = R.T @ U
    coeffs *= scale
    return (coeffs @ U.T).T


def solve_fast(basis: SpectralBasis, lambda_reg: float, sigma2: float, residual) -> np.ndarray:
    """Solve ``(Phi + lambda*sigma2*I) W = residual`` through ``Phi = U Lambda U^T``.

    Only the diagonal ``Lambda + lambda*sigma2*I`` is inverted; the rest is
    two products with ``U``, ``O(2 D M^2)`` per call. ``basis`` must be the
    full decomposition (``K == M``).
    """
    if basis.K != basis.M:
        raise ParameterError(f"solve_fast needs the full basis (K=M={basis.M}), got K={basis.K}")
    return _eigen_solve(basis, lambda_reg, sigma2, residual)


def solve_fast_lowrank(basis: SpectralBasis, lambda_reg: float, sigma2: float, residual) -> np.ndarray:
    """Truncated-basis version of :func:`solve_fast`, ``O(2 D K M)`` per call."""
    return _eigen_solve(basis, lambda_reg, sigma2, residual)


def solve_cpd_system(phi, p1, py, X, lambda_reg: float, sigma2: float) -> np.ndarray:
    """Dense CPD solve given the row masses ``p1 = P 1`` and ``py = P Y``.

    Solves ``(d(P1) Phi + lambda*sigma2*I) W = P Y - d(P1) X``, which is the
    CPD system premultiplied by ``d(P1)``. Rows with zero mass get ``w_m = 0``
    instead of an undefined ``1/0``.
    """
    phi = phi.phi if isinstance(phi, GramKernel) else np.asarray(phi)
    M = phi.shape[0]
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != M or py.shape != X.shape or p1.shape != (M,):
        raise ParameterError(f"shape mismatch: Phi {phi.shape}, X {X.shape}, PY {py.shape}")
    A = p1[:, None] * phi
    A.flat[:: M + 1] += lambda_reg * sigma2
    rhs = py - p1[:, None] * X
    try:
        with warnings.catch_warnings():
            # ill-conditioning is expected once sigma2 is small; only exact singularity is fatal
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(A, rhs, overwrite_a=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        A = p1[:, None] * phi
        A.flat[:: M + 1] += lambda_reg * sigma2
        raise NumericError(
            "CPD linear system is singular", condition=float(np.linalg.cond(A)), detail=str(exc)
        ) from exc


def solve_cpd_baseline(phi, p, lambda_reg: float, sigma2: float, Y, X) -> np.ndarray:
    """``W = (Phi + lambda*sigma2*d(P1)^-1)^-1 (d(P1)^-1 P Y - X)`` by dense factorisation."""
    p = p.p if isinstance(p, Correspondence) else np.asarray(p, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    p1 = p.sum(axis=1)
    if not np.all(p1 > 0):
        raise ParameterError("every row of P must have positive mass for the CPD solve")
    return solve_cpd_system(phi, p1, p @ Y, X, lambda_reg, sigma2)


def solve_cpd_lowrank_system(basis: SpectralBasis, p1, py, X, lambda_reg: float, sigma2: float):
    """CPD system with ``Phi`` replaced by ``U Lambda U^T``, solved through a ``K x K`` system.

    With ``Z = Lambda U^T W`` the system ``d(P1) U Z + lambda*sigma2*W = F``
    gives ``(lambda*sigma2*I + Lambda U^T d(P1) U) Z = Lambda U^T F``.
    Returns ``(W, Z)``; the displacement is ``U @ Z``.
    """
    s = lambda_reg * sigma2
    if not s > 0:
        raise NumericError("lambda*sigma2 must be positive for the low-rank CPD solve", shift=s)
    U, lam = basis.U, basis.lam
    F = py - p1[:, None] * np.asarray(X, dtype=np.float64)
    G = U.T @ (p1[:, None] * U)
    A = lam[:, None] * G
    A.flat[:: basis.K + 1] += s
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            Z = scipy.linalg.solve(A, lam[:, None] * (U.T @ F), check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError("low-rank CPD system is singular", K=basis.K, detail=str(exc)) from exc
    W = (F - p1[:, None] * (U @ Z)) / s
    return W, Z


def apply_transform(X, phi, w) -> np.ndarray:
    """``X + Phi W``."""
    phi = phi.phi if isinstance(phi, GramKernel) else np.asarray(phi)
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if phi.shape[1] != w.shape[0] or X.shape != (phi.shape[0], w.shape[1]):
        raise ParameterError(f"shape mismatch: X {X.shape}, Phi {phi.shape}, W {w.shape}")
    return X + phi @ w


def apply_transform_lowrank(X, basis: SpectralBasis, w) -> np.ndarray:
    """``X + U Lambda U^T W`` without forming the ``M x M`` product."""
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != basis.M or X.shape != w.shape:
        raise ParameterError(f"shape mismatch: X {X.shape}, basis M={basis.M}, W {w.shape}")
    return X + _project(basis.U, w, basis.lam)


def update_sigma2(Y, p, X_t) -> float:
    """Variance for a row-constrained correspondence.

    ``(tr(Y^T d(P^T 1) Y) - 2 tr(Y_hat^T X_t) + tr(X_t^T X_t)) / (D M)`` with
    ``Y_hat = P Y``. Floored at ``SIGMA2_FLOOR``.
    """
    p = p.p if isinstance(p, Correspondence) else np.asarray(p, dtype=np.float64)
    return _sigma2_trace(np.asarray(Y, dtype=np.float64), p, np.asarray(X_t, dtype=np.float64),
                         p.sum(axis=0), p @ Y, None)


def update_sigma2_cpd(Y, p, X_t) -> float:
    """Standard CPD variance: the weighted residual divided by ``D * sum(P)``."""
    p = p.p if isinstance(p, Correspondence) else np.asarray(p, dtype=np.float64)
    return _sigma2_trace(np.asarray(Y, dtype=np.float64), p, np.asarray(X_t, dtype=np.float64),
                         p.sum(axis=0), p @ Y, p.sum(axis=1))


def _sigma2_trace(Y, p, X_t, pt1, py, p1) -> float:
    M, D = X_t.shape
    term_y = float(pt1 @ np.einsum("nd,nd->n", Y, Y))
    term_cross = float(np.einsum("md,md->", py, X_t))
    xx = np.einsum("md,md->m", X_t, X_t)
    if p1 is None:
        term_x = float(xx.sum())
        denom = D * M
    else:
        term_x = float(p1 @ xx)
        denom = D * float(p1.sum())
    if not denom > 0:
        return SIGMA2_FLOOR
    value = (term_y - 2.0 * term_cross + term_x) / denom
    scale = (term_y + term_x) / denom
    if value < -SIGMA2_NEG_SLACK * max(1.0, scale):
        raise NumericError("variance update is negative", value=value)
    return max(value, SIGMA2_FLOOR)

"""Gaussian Gram matrix and its (optionally truncated) eigendecomposition."""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .errors import NumericError, ParameterError
from .pointset import as_points

# eigenvalues below this fraction of the largest one are set to zero
EIG_CLAMP = 1e-12

CACHE_MAGIC = b"CPDSPEC\x00"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIQQd")


@dataclass(frozen=True)
class GramKernel:
    phi: np.ndarray
    beta: float

    @property
    def M(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class SpectralBasis:
    """Leading ``K`` eigenpairs of a Gram matrix, eigenvalues descending."""

    U: np.ndarray
    lam: np.ndarray

    @property
    def K(self) -> int:
        return self.lam.shape[0]

    @property
    def M(self) -> int:
        return self.U.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.lam) @ self.U.T


def gaussian_affinity(A, B, beta: float) -> np.ndarray:
    """``exp(-|a - b|^2 / (2 beta^2))`` for every pair of rows."""
    d2 = cdist(A, B, "sqeuclidean")
    return np.exp(d2 / (-2.0 * beta * beta))


def build_gram(X, beta: float) -> GramKernel:
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    X = as_points(X, "X")
    phi = gaussian_affinity(X, X, beta)
    # cdist is symmetric up to roundoff; copy the upper triangle to make it exact
    iu = np.triu_indices_from(phi, k=1)
    phi[(iu[1], iu[0])] = phi[iu]
    np.fill_diagonal(phi, 1.0)
    return GramKernel(phi=phi, beta=float(beta))


def eigendecompose(gram: GramKernel, K: int | None = None) -> SpectralBasis:
    """Return the ``K`` largest eigenpairs of the symmetric Gram matrix.

    ``K=None`` means the full decomposition. Only the requested part of the
    spectrum is computed when ``K < M``.
    """
    phi = gram.phi if isinstance(gram, GramKernel) else np.asarray(gram, dtype=np.float64)
    M = phi.shape[0]
    if K is None:
        K = M
    if not 1 <= K <= M:
        raise ParameterError(f"rank K must satisfy 1 <= K <= M={M}, got {K}")
    try:
        if K == M:
            lam, U = np.linalg.eigh(phi)
        else:
            lam, U = scipy.linalg.eigh(phi, subset_by_index=[M - K, M - 1], check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericError("symmetric eigensolver did not converge", M=M, K=K, detail=str(exc)) from exc

    lam = lam[::-1].copy()
    U = np.ascontiguousarray(U[:, ::-1])
    top = lam[0] if lam[0] > 0 else 1.0
    lam[lam < EIG_CLAMP * top] = 0.0
    return SpectralBasis(U=U, lam=lam)


def lowrank_reconstruction_error(basis: SpectralBasis, gram: GramKernel) -> float:
    """Frobenius norm of ``phi - U diag(lam) U^T``."""
    phi = gram.phi if isinstance(gram, GramKernel) else np.asarray(gram)
    if basis.U.shape[0] != phi.shape[0] or phi.shape[0] != phi.shape[1]:
        raise ParameterError(
            f"basis has M={basis.U.shape[0]} rows but Gram matrix is {phi.shape}"
        )
    return float(np.linalg.norm(phi - basis.reconstruct()))


def rank_for(M: int, rank_fraction: float) -> int:
    """Retained rank ``max(1, round(rank_fraction * M))``, capped at ``M``."""
    if not 0 < rank_fraction <= 1:
        raise ParameterError(f"rank_fraction must lie in (0, 1], got {rank_fraction}")
    return min(M, max(1, int(round(rank_fraction * M))))


# -- spectral cache ----------------------------------------------------------


def cache_key(X, beta: float, K: int) -> str:
    X = np.ascontiguousarray(X, dtype="<f8")
    h = hashlib.sha256()
    h.update(struct.pack("<QQdQ", X.shape[0], X.shape[1], float(beta), K))
    h.update(X.tobytes())
    return h.hexdigest()[:32]


def save_spectral_cache(basis: SpectralBasis, beta: float, path) -> None:
    """Binary dump: header (magic, version, M, K, beta) then U and lam as little-endian f64."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, basis.M, basis.K, float(beta)))
        fh.write(np.ascontiguousarray(basis.U, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.lam, dtype="<f8").tobytes())


def load_spectral_cache(path):
    """Read a cache file; returns ``(basis, beta)``."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise NumericError("truncated spectral cache header", path=path)
        magic, version, M, K, beta = _HEADER.unpack(head)
        if magic != CACHE_MAGIC or version != CACHE_VERSION:
            raise NumericError("not a spectral cache file", path=path)
        body = fh.read()
    expected = 8 * (M * K + K)
    if len(body) != expected:
        raise NumericError("spectral cache size mismatch", path=path, expected=expected, got=len(body))
    data = np.frombuffer(body, dtype="<f8").astype(np.float64)
    U = data[: M * K].reshape(M, K)
    lam = data[M * K :].copy()
    return SpectralBasis(U=U, lam=lam), beta


def cached_eigendecompose(gram: GramKernel, X, K: int, cache_dir) -> SpectralBasis:
    """:func:`eigendecompose` backed by an on-disk cache keyed on ``(X, beta, K)``."""
    path = os.path.join(cache_dir, f"spectral-{cache_key(X, gram.beta, K)}.bin")
    if os.path.exists(path):
        basis, _ = load_spectral_cache(path)
        if basis.M == gram.M and basis.K == K:
            return basis
    basis = eigendecompose(gram, K)
    os.makedirs(cache_dir, exist_ok=True)
    save_spectral_cache(basis, gram.beta, path)
    return basis

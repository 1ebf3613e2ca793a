"""Dense real linear-algebra kernels and spectral summaries.

Every routine takes and returns plain ``numpy`` arrays in double precision.
Decompositions use a fixed sign convention (the largest-magnitude entry of
each left singular vector / eigenvector is nonnegative) so that repeated
runs give identical factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, NotPSDError, NumericFailure, SingularMatrixError

EPS = np.finfo(np.float64).eps


class SvdResult(NamedTuple):
    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray  # columns are right singular vectors (V, not V')


class SymmetricEigen(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class RankPolicy:
    """Numerical-rank rule for pseudo-inversion.

    Singular values ``<= relative_cutoff * sigma_1`` count as zero. ``None``
    means ``eps * max(rows, cols)``.
    """

    relative_cutoff: float | None = None

    def __post_init__(self):
        if self.relative_cutoff is not None and not self.relative_cutoff > 0:
            raise ContractViolation("relative_cutoff must be positive")

    def cutoff_for(self, shape: tuple[int, int]) -> float:
        if self.relative_cutoff is not None:
            return float(self.relative_cutoff)
        return EPS * max(shape)


DEFAULT_POLICY = RankPolicy()


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array or raise."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ContractViolation(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return a


def _fix_signs(vectors: np.ndarray, partner: np.ndarray | None = None):
    # flip each column so its largest-magnitude entry is >= 0
    if vectors.size == 0:
        return vectors, partner
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs
    if partner is not None:
        partner = partner * signs
    return vectors, partner


def svd(m) -> SvdResult:
    """Thin singular value decomposition ``m = U diag(s) V'``."""
    a = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("SVD did not converge", a.shape) from exc
    u, v = _fix_signs(u, vt.T)
    return SvdResult(u, s, v)


def pseudoinverse(m, policy: RankPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff."""
    a = as_matrix(m)
    u, s, v = svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    keep = s > policy.cutoff_for(a.shape) * s[0]
    return (v[:, keep] / s[keep]) @ u[:, keep].T


def numerical_rank(m, policy: RankPolicy = DEFAULT_POLICY) -> int:
    a = as_matrix(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > policy.cutoff_for(a.shape) * s[0]))


def _check_symmetric(a: np.ndarray, rtol: float = 1e-12) -> None:
    if a.shape[0] != a.shape[1]:
        raise ContractViolation(f"matrix must be square, got {a.shape}")
    scale = max(np.max(np.abs(a)), np.finfo(np.float64).tiny)
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise ContractViolation("matrix is not symmetric")


def symmetric_eigen(s) -> SymmetricEigen:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = as_matrix(s)
    _check_symmetric(a)
    a = 0.5 * (a + a.T)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("symmetric eigensolver did not converge", a.shape) from exc
    w = w[::-1].copy()
    v, _ = _fix_signs(v[:, ::-1])
    return SymmetricEigen(w, v)


def symmetric_eigenvalues(s) -> np.ndarray:
    a = as_matrix(s)
    _check_symmetric(a)
    return np.linalg.eigvalsh(0.5 * (a + a.T))[::-1].copy()


def psd_sqrt(s) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clamped."""
    w, v = symmetric_eigen(s)
    norm = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if w.size and w[-1] < -1e-10 * norm:
        raise NotPSDError(f"matrix has eigenvalue {w[-1]:.3e} < 0")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (root + root.T)


def trace(s) -> float:
    a = as_matrix(s)
    if a.shape[0] != a.shape[1]:
        raise ContractViolation(f"trace needs a square matrix, got {a.shape}")
    return float(np.trace(a))


def operator_norm(m) -> float:
    a = as_matrix(m)
    return float(np.linalg.svd(a, compute_uv=False)[0])


def effective_rank(s, *, with_flag: bool = False):
    """``tr(s) / ||s||`` for a symmetric PSD matrix.

    The zero matrix has effective rank 1 by convention; with ``with_flag``
    the return value is ``(rank, degenerate)``.
    """
    w = symmetric_eigenvalues(s)
    top = float(w[0])
    if top <= 0.0:
        return (1.0, True) if with_flag else 1.0
    value = float(np.sum(w)) / top
    return (value, False) if with_flag else value


def condition_number(s) -> float:
    w = symmetric_eigenvalues(s)
    if w[0] <= 0.0 or w[-1] <= EPS * w.size * w[0]:
        raise SingularMatrixError("condition number of a singular matrix")
    return float(w[0] / w[-1])


def min_singular(m) -> float:
    a = as_matrix(m)
    return float(np.linalg.svd(a, compute_uv=False)[-1])

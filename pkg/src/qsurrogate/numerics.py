"""Dense linear algebra helpers.

``eigh`` and ``svd`` wrap LAPACK (through numpy) behind the conventions the
rest of the package relies on: eigenvalues descending, and the SVD returned
as ``F = X @ diag(D) @ Y``. ``gram_schmidt`` projects twice per vector
(classical Gram-Schmidt with one re-orthogonalization pass) and keeps track
of dependent inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
DEFAULT_GS_TOL = 1e-8


class NumericsError(ValueError):
    pass


def hermitize(a: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(A + A^dagger)/2`` after checking ``A`` is Hermitian within ``tol``.

    The check is relative to ``max(1, ||A||_F)``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError("matrix has non-finite entries")
    skew = np.linalg.norm(a - a.conj().T)
    if skew > tol * max(1.0, np.linalg.norm(a)):
        raise NumericsError(f"matrix is not Hermitian (||A - A^dagger||_F = {skew:.3e})")
    return (a + a.conj().T) / 2


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvector columns of a Hermitian matrix."""
    h = hermitize(a)
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


@dataclass
class SVDResult:
    X: np.ndarray
    D: np.ndarray
    Y: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.X * self.D) @ self.Y


def svd(f: np.ndarray) -> SVDResult:
    """Singular value decomposition ``F = X diag(D) Y`` with ``D`` descending."""
    f = np.asarray(f, dtype=complex)
    if not np.all(np.isfinite(f)):
        raise NumericsError("matrix has non-finite entries")
    x, d, y = np.linalg.svd(f)
    return SVDResult(x, d, y)


def nuclear_norm(f: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(f, dtype=complex), compute_uv=False)))


@dataclass
class GramSchmidtResult:
    """Orthonormal basis of the span of the inputs.

    ``basis`` has shape ``(rank, dim)``. ``coeffs`` has shape ``(rank, M)``
    with ``coeffs[i, m] = <e_i|v_m>``; it is upper triangular over the kept
    columns, and dependent inputs still get their full expansion column.
    """

    basis: np.ndarray
    coeffs: np.ndarray
    rank: int
    kept_indices: list[int]


def gram_schmidt(vectors: Sequence[np.ndarray] | np.ndarray, tol: float = DEFAULT_GS_TOL) -> GramSchmidtResult:
    vecs = np.asarray(vectors, dtype=complex)
    if vecs.ndim != 2 or vecs.shape[0] == 0:
        raise NumericsError("gram_schmidt needs a non-empty list of equal-length vectors")
    if tol <= 0:
        raise NumericsError("tol must be positive")
    M, dim = vecs.shape
    basis = np.zeros((min(M, dim), dim), dtype=complex)
    coeffs = np.zeros((min(M, dim), M), dtype=complex)
    kept: list[int] = []
    r = 0
    for m in range(M):
        v = vecs[m].copy()
        c = np.zeros(r, dtype=complex)
        for _ in range(2):
            if r:
                proj = basis[:r].conj() @ v
                v -= proj @ basis[:r]
                c += proj
        norm = np.linalg.norm(v)
        if norm > tol and r < dim:
            basis[r] = v / norm
            coeffs[:r, m] = c
            coeffs[r, m] = norm
            kept.append(m)
            r += 1
        else:
            coeffs[:r, m] = c
    return GramSchmidtResult(basis[:r].copy(), coeffs[:r].copy(), r, kept)

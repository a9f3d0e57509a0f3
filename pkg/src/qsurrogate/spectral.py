"""Diagonalisation of the implicit model's observable inside the data span.

For training states ``psi_m`` and signed duals ``alpha`` the observable is
``O = sum_m alpha_m |psi_m><psi_m|``. It maps ``S = span{psi_m}`` into
itself, so its non-zero spectrum is found from the ``dim(S) x dim(S)``
matrix ``<e_i|O|e_j>`` over an orthonormal basis of ``S``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .kernel import GramMatrix, KernelModel, argmax_label
from .numerics import GramSchmidtResult, eigh, gram_schmidt, hermitize
from .simulator import SimulatorError


class SpectralError(ValueError):
    pass


def build_observable_matrix(
    gram_matrix: GramMatrix, gs: GramSchmidtResult, alpha: np.ndarray, check_tol: float = 1e-6
) -> np.ndarray:
    """``[O]_ij = sum_m alpha_m <e_i|psi_m><psi_m|e_j>`` from expansion data only."""
    R = gs.coeffs
    alpha = np.asarray(alpha, dtype=float)
    if R.shape[1] != len(alpha) or gram_matrix.dim != len(alpha):
        raise SpectralError(
            f"sizes disagree: {R.shape[1]} expansion columns, {gram_matrix.dim} Gram rows, {len(alpha)} duals"
        )
    recon = R.conj().T @ R
    err = np.max(np.abs(recon - gram_matrix.overlaps)) if len(alpha) else 0.0
    if err > check_tol:
        raise SpectralError(f"Gram-Schmidt expansion inconsistent with overlaps (max error {err:.2e})")
    return hermitize((R * alpha) @ R.conj().T)


@dataclass
class SpectralObservable:
    """Eigenpairs sorted by ``lambda**2`` descending (ties: original index)."""

    eigenvalues: np.ndarray
    basis_coeffs: np.ndarray  # (K, dim(S)): eigenvector k = sum_i c[k, i] e_i
    eigenvectors: np.ndarray  # (K, 2**n)
    subspace_dim: int
    label: int | None = None
    total_sq_mass: float = 0.0  # sum of lambda**2 over the full spectrum

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)


def diagonalize_observable(
    matrix: np.ndarray, basis: np.ndarray, label: int | None = None
) -> SpectralObservable:
    w, v = eigh(matrix)  # descending by value
    order = np.lexsort((np.arange(len(w)), -(w**2)))
    w, v = w[order], v[:, order]
    coeffs = v.T.copy()
    vecs = coeffs @ basis
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    vecs = vecs / np.where(norms > 0, norms, 1.0)
    return SpectralObservable(w, coeffs, vecs, len(w), label, float(np.sum(w**2)))


def truncate(obs: SpectralObservable, K: int) -> SpectralObservable:
    if not 1 <= K <= obs.rank:
        raise SpectralError(f"K must lie in [1, {obs.rank}], got {K}")
    return replace(
        obs,
        eigenvalues=obs.eigenvalues[:K].copy(),
        basis_coeffs=obs.basis_coeffs[:K].copy(),
        eigenvectors=obs.eigenvectors[:K].copy(),
    )


def cumulative_contribution(obs: SpectralObservable, K: int) -> float:
    """Share of ``sum lambda**2`` carried by the leading ``K`` eigenvalues."""
    if not 1 <= K <= obs.rank:
        raise SpectralError(f"K must lie in [1, {obs.rank}], got {K}")
    total = obs.total_sq_mass
    if total == 0:
        return 1.0
    return float(min(1.0, np.sum(obs.eigenvalues[:K] ** 2) / total))


@dataclass
class LowRankModel:
    observables: list[SpectralObservable]
    biases: np.ndarray

    def decisions(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        cols = []
        for obs, b in zip(self.observables, self.biases):
            if states.shape[1] != obs.eigenvectors.shape[1]:
                raise SimulatorError("qubit count of inputs does not match the model")
            amp = np.abs(states.conj() @ obs.eigenvectors.T) ** 2
            cols.append(amp @ obs.eigenvalues + b)
        return np.stack(cols, axis=1)


def predict_low_rank(model: LowRankModel, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = model.decisions(states)
    return argmax_label(d), d


@dataclass
class SpectralDecomposition:
    """Full-rank eigenpairs for every label plus the shared basis of S."""

    gs: GramSchmidtResult
    observables: list[SpectralObservable]
    biases: np.ndarray
    gs_tol: float

    @property
    def subspace_dim(self) -> int:
        return self.gs.rank

    def low_rank(self, K: int | list[int]) -> LowRankModel:
        Ks = [K] * len(self.observables) if isinstance(K, int) else list(K)
        return LowRankModel(
            [truncate(o, min(k, o.rank)) for o, k in zip(self.observables, Ks)], self.biases.copy()
        )

    def to_dict(self) -> dict:
        return {
            "gs_tol": self.gs_tol,
            "subspace_dim": self.subspace_dim,
            "kept_indices": list(self.gs.kept_indices),
            "labels": [
                {
                    "label": l,
                    "bias": float(self.biases[l]),
                    "eigenvalues": [float(x) for x in obs.eigenvalues],
                    "coeffs_re": obs.basis_coeffs.real.tolist(),
                    "coeffs_im": obs.basis_coeffs.imag.tolist(),
                }
                for l, obs in enumerate(self.observables)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, train_states: np.ndarray) -> "SpectralDecomposition":
        """Rebuild eigenvectors by re-running Gram-Schmidt on the training states."""
        gs = gram_schmidt(train_states, data["gs_tol"])
        if gs.kept_indices != list(data["kept_indices"]):
            raise SpectralError("training states do not reproduce the stored Gram-Schmidt basis")
        observables = []
        for entry in sorted(data["labels"], key=lambda e: e["label"]):
            w = np.array(entry["eigenvalues"], dtype=float)
            c = np.array(entry["coeffs_re"]) + 1j * np.array(entry["coeffs_im"])
            c = c.reshape(len(w), gs.rank)
            vecs = c @ gs.basis
            vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
            observables.append(
                SpectralObservable(w, c, vecs, gs.rank, entry["label"], float(np.sum(w**2)))
            )
        biases = np.array([e["bias"] for e in sorted(data["labels"], key=lambda e: e["label"])])
        return cls(gs, observables, biases, float(data["gs_tol"]))

    def spectrum_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "k", "lambda", "cumulative_ratio"])
        for l, obs in enumerate(self.observables):
            for k in range(obs.rank):
                w.writerow([l, k, repr(float(obs.eigenvalues[k])), repr(cumulative_contribution(obs, k + 1))])
        return buf.getvalue()


def decompose(
    train_states: np.ndarray,
    gram_matrix: GramMatrix,
    model: KernelModel,
    gs_tol: float = 1e-8,
) -> SpectralDecomposition:
    gs = gram_schmidt(train_states, gs_tol)
    observables = []
    for l in range(model.label_count):
        mat = build_observable_matrix(gram_matrix, gs, model.alphas[l])
        observables.append(diagonalize_observable(mat, gs.basis, label=l))
    return SpectralDecomposition(gs, observables, model.biases.copy(), gs_tol)

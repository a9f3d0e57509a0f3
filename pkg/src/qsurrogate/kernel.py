"""Fidelity quantum kernel and a one-vs-rest soft-margin SVM trained by SMO."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .simulator import SimulatorError

PSD_TOL = 1e-8
_TAU = 1e-12


class KernelError(ValueError):
    pass


def quantum_kernel(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|^2`` for pure states."""
    if a.shape != b.shape:
        raise SimulatorError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass
class GramMatrix:
    """Kernel matrix plus the complex overlaps it was built from.

    ``overlaps[m, m'] = <psi_m|psi_m'>`` (row bra, column ket).
    """

    overlaps: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.abs(self.overlaps) ** 2

    @property
    def dim(self) -> int:
        return self.overlaps.shape[0]


def gram(states: np.ndarray) -> GramMatrix:
    states = np.atleast_2d(states)
    if states.shape[0] < 1:
        raise KernelError("need at least one state")
    ov = states.conj() @ states.T
    ov = (ov + ov.conj().T) / 2
    np.fill_diagonal(ov, np.real(np.diag(ov)))
    return GramMatrix(ov)


def cross_kernel(train_states: np.ndarray, states: np.ndarray) -> np.ndarray:
    """``K[i, m] = |<psi_m|x_i>|^2`` with rows over ``states``."""
    return np.abs(np.atleast_2d(states).conj() @ np.atleast_2d(train_states).T) ** 2


@dataclass
class BinarySVM:
    alpha: np.ndarray  # signed duals: lambda_m * y_m
    bias: float
    objective_trace: list[float] = field(default_factory=list, repr=False)
    iterations: int = 0


def dual_objective(lam: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ly = lam * y
    return float(lam.sum() - 0.5 * ly @ K @ ly)


def train_svm_binary(
    K: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    record_objective: bool = False,
) -> BinarySVM:
    """SMO with maximal-violating-pair working set selection.

    Solves ``max sum(lam) - 1/2 sum lam_i lam_j y_i y_j K_ij`` subject to
    ``0 <= lam <= C`` and ``sum(lam * y) = 0``; stops when the KKT gap
    ``max_{I_up} -y g - min_{I_low} -y g`` drops to ``tol``.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    M = len(y)
    if K.shape != (M, M):
        raise KernelError(f"kernel shape {K.shape} does not match {M} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise KernelError("labels must be +1/-1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise KernelError("both classes must be present")
    if C <= 0:
        raise KernelError("C must be positive")
    if np.linalg.eigvalsh((K + K.T) / 2).min() < -PSD_TOL * max(1.0, M):
        raise KernelError("kernel matrix is not positive semidefinite")

    Q = K * np.outer(y, y)
    lam = np.zeros(M)
    grad = -np.ones(M)  # gradient of the minimisation form 1/2 lam^T Q lam - sum(lam)
    trace = [0.0] if record_objective else []
    it = 0
    while it < max_iter:
        score = -y * grad
        up = ((y > 0) & (lam < C)) | ((y < 0) & (lam > 0))
        low = ((y > 0) & (lam > 0)) | ((y < 0) & (lam < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        if score[i] - score[j] <= tol:
            break
        it += 1
        a = K[i, i] + K[j, j] - 2 * K[i, j]
        a = max(a, _TAU)
        # step t along lam_i += y_i t, lam_j -= y_j t increases the dual
        t = (score[i] - score[j]) / a
        t = min(t, C - lam[i] if y[i] > 0 else lam[i])
        t = min(t, lam[j] if y[j] > 0 else C - lam[j])
        di, dj = y[i] * t, -y[j] * t
        lam[i] = min(max(lam[i] + di, 0.0), C)
        lam[j] = min(max(lam[j] + dj, 0.0), C)
        grad += Q[:, i] * di + Q[:, j] * dj
        if record_objective:
            trace.append(dual_objective(lam, y, K))

    score = -y * grad
    free = (lam > 0) & (lam < C)
    if free.any():
        b = float(score[free].mean())
    else:
        up = ((y > 0) & (lam < C)) | ((y < 0) & (lam > 0))
        low = ((y > 0) & (lam > 0)) | ((y < 0) & (lam < C))
        hi = score[up].max() if up.any() else score[low].min()
        lo = score[low].min() if low.any() else score[up].max()
        b = float((hi + lo) / 2)
    return BinarySVM(lam * y, b, trace, it)


@dataclass
class KernelModel:
    """One binary SVM per label, predicting with ``argmax_l f^(l)``."""

    alphas: np.ndarray  # (L, M)
    biases: np.ndarray  # (L,)
    C: float
    train_ids: list[str] = field(default_factory=list)
    dataset_hash: str = ""
    tol: float = 1e-3

    @property
    def label_count(self) -> int:
        return len(self.biases)

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "tol": self.tol,
            "dataset_hash": self.dataset_hash,
            "train_ids": list(self.train_ids),
            "labels": [
                {"label": l, "alpha": [float(a) for a in self.alphas[l]], "bias": float(self.biases[l])}
                for l in range(self.label_count)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelModel":
        labels = sorted(data["labels"], key=lambda e: e["label"])
        return cls(
            np.array([e["alpha"] for e in labels], dtype=float),
            np.array([e["bias"] for e in labels], dtype=float),
            float(data["C"]),
            list(data.get("train_ids", [])),
            data.get("dataset_hash", ""),
            float(data.get("tol", 1e-3)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def train_one_vs_rest(
    gram_matrix: GramMatrix, labels: np.ndarray, C: float = 1.0, tol: float = 1e-3, label_count: int | None = None
) -> KernelModel:
    labels = np.asarray(labels, dtype=int)
    L = label_count if label_count is not None else int(labels.max()) + 1
    if len(np.unique(labels)) < 2:
        raise KernelError("one-vs-rest needs at least two distinct labels")
    K = gram_matrix.values
    alphas, biases = [], []
    for l in range(L):
        y = np.where(labels == l, 1.0, -1.0)
        if not np.any(y > 0):
            raise KernelError(f"label {l} has no training points")
        svm = train_svm_binary(K, y, C, tol)
        alphas.append(svm.alpha)
        biases.append(svm.bias)
    return KernelModel(np.array(alphas), np.array(biases), C, tol=tol)


def argmax_label(decisions: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ``np.argmax`` already breaks ties by lowest index."""
    return np.argmax(np.atleast_2d(decisions), axis=1)


def predict_implicit(
    model: KernelModel, train_states: np.ndarray, states: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Labels and decision values ``(N, L)`` for a batch of feature states."""
    states = np.atleast_2d(states)
    train_states = np.atleast_2d(train_states)
    if states.shape[1] != train_states.shape[1]:
        raise SimulatorError("qubit count of inputs does not match the training states")
    decisions = cross_kernel(train_states, states) @ model.alphas.T + model.biases
    return argmax_label(decisions), decisions

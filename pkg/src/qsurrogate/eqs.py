"""The explicit surrogate: ``f(x) = sum_k lambda_k |<k|C^dagger|psi(x)>|^2 + b``.

Also holds the 15-parameter gate parameterisation, the class-weighted
cross-entropy loss with its exact gradient, the EQS-vs-random gradient
comparison and an Adam fine-tuning loop. Eigenvalues and biases are frozen;
only gate parameters are trained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernel import argmax_label
from .simulator import (
    GENERATORS,
    GateCircuit,
    TwoQubitGate,
    apply_matrix,
    environment_tensor,
    generator_matrix,
)

P_CLAMP = 1e-12


class EQSError(ValueError):
    pass


@dataclass
class EQSModel:
    circuits: list[GateCircuit]
    eigenvalues: list[np.ndarray]
    biases: np.ndarray
    converged: list[bool] = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        return self.circuits[0].n_qubits

    def ranks(self) -> list[int]:
        return [len(w) for w in self.eigenvalues]

    def to_dict(self) -> dict:
        return {
            "labels": [
                {
                    "label": l,
                    "bias": float(self.biases[l]),
                    "eigenvalues": [float(x) for x in self.eigenvalues[l]],
                    "rank": len(self.eigenvalues[l]),
                    "converged": bool(self.converged[l]) if self.converged else None,
                    "circuit": self.circuits[l].to_dict(),
                }
                for l in range(len(self.circuits))
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EQSModel":
        labels = sorted(data["labels"], key=lambda e: e["label"])
        return cls(
            [GateCircuit.from_dict(e["circuit"]) for e in labels],
            [np.array(e["eigenvalues"], dtype=float) for e in labels],
            np.array([e["bias"] for e in labels], dtype=float),
            [bool(e.get("converged")) for e in labels],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _adjoint_states(circuit: GateCircuit, states: np.ndarray) -> np.ndarray:
    out = states
    for g in circuit.gates:
        out = apply_matrix(out, g.matrix.conj().T, g.pair)
    return out


def eqs_decisions(
    circuit: GateCircuit, eigenvalues: np.ndarray, bias: float, states: np.ndarray
) -> np.ndarray:
    states = np.atleast_2d(states)
    if states.shape[1] != 2**circuit.n_qubits:
        raise EQSError("qubit count of inputs does not match the circuit")
    K = len(eigenvalues)
    chi = _adjoint_states(circuit, states)
    return np.abs(chi[:, :K]) ** 2 @ np.asarray(eigenvalues) + bias


def predict_eqs(model: EQSModel, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = np.stack(
        [eqs_decisions(c, w, b, states) for c, w, b in zip(model.circuits, model.eigenvalues, model.biases)],
        axis=1,
    )
    return argmax_label(d), d


# -- parameterisation ----------------------------------------------------


def recover_params(matrix: np.ndarray) -> np.ndarray:
    """Generator coefficients of a 4x4 unitary, up to global phase.

    Returns ``theta`` with ``exp(i sum_j theta_j G_j) ~ U``. ``det(U)`` is
    first normalised to 1; the Hermitian log comes from the complex Schur
    form, which is diagonal for a normal matrix. The traceless projection
    discards only a multiple of the identity, i.e. a global phase, so the
    -1 eigenvalue branch ambiguity is harmless.
    """
    U = np.asarray(matrix, dtype=complex)
    det = np.linalg.det(U)
    U = U * np.exp(-1j * np.angle(det) / 4)
    T, Z = scipy.linalg.schur(U, output="complex")
    w = np.angle(np.diag(T))
    H = (Z * w) @ Z.conj().T
    return np.real(np.einsum("jab,ba->j", GENERATORS, H)) / 4


def circuit_params(circuit: GateCircuit) -> np.ndarray:
    """``(J, 15)`` parameters for every gate of a circuit."""
    if not circuit.gates:
        return np.zeros((0, 15))
    return np.array(
        [g.params if g.params is not None else recover_params(g.matrix) for g in circuit.gates]
    )


@dataclass
class ParameterizedEQS:
    """One label's surrogate with trainable gate parameters."""

    n_qubits: int
    pairs: list[tuple[int, int]]
    params: np.ndarray  # (J, 15)
    eigenvalues: np.ndarray
    bias: float

    @classmethod
    def from_circuit(
        cls, circuit: GateCircuit, eigenvalues: np.ndarray, bias: float
    ) -> "ParameterizedEQS":
        return cls(
            circuit.n_qubits,
            [g.pair for g in circuit.gates],
            circuit_params(circuit),
            np.asarray(eigenvalues, dtype=float),
            float(bias),
        )

    def with_params(self, params: np.ndarray) -> "ParameterizedEQS":
        params = np.asarray(params, dtype=float).reshape(self.params.shape)
        return ParameterizedEQS(self.n_qubits, list(self.pairs), params, self.eigenvalues, self.bias)

    def circuit(self) -> GateCircuit:
        return GateCircuit(
            self.n_qubits, [TwoQubitGate.from_params(p, th) for p, th in zip(self.pairs, self.params)]
        )

    def decisions(self, states: np.ndarray) -> np.ndarray:
        return eqs_decisions(self.circuit(), self.eigenvalues, self.bias, states)


# -- loss and gradient -----------------------------------------------------


def _sigmoid(f: np.ndarray) -> np.ndarray:
    return 0.5 * (1 + np.tanh(0.5 * f))


def _class_weights(y: np.ndarray) -> tuple[float, float, int]:
    M = len(y)
    if M == 0:
        raise EQSError("empty batch")
    M_l = int(np.sum(y))
    return (M - M_l) / M, M_l / M, M


def loss_from_decisions(f: np.ndarray, y: np.ndarray) -> float:
    """Class-weighted binary cross entropy; ``y`` is 1 for the target label."""
    y = np.asarray(y, dtype=float)
    w_pos, w_neg, M = _class_weights(y)
    p = np.clip(_sigmoid(np.asarray(f, dtype=float)), P_CLAMP, 1 - P_CLAMP)
    return float(-np.sum(w_pos * y * np.log(p) + w_neg * (1 - y) * np.log(1 - p)) / M)


def _loss_weights(f: np.ndarray, y: np.ndarray) -> np.ndarray:
    """dL/df per item (zero where the probability clamp is active)."""
    w_pos, w_neg, M = _class_weights(y)
    p_raw = _sigmoid(f)
    active = (p_raw > P_CLAMP) & (p_raw < 1 - P_CLAMP)
    return np.where(active, -(w_pos * y * (1 - p_raw) - w_neg * (1 - y) * p_raw) / M, 0.0)


def loss(model: ParameterizedEQS, states: np.ndarray, y: np.ndarray) -> float:
    return loss_from_decisions(model.decisions(states), y)


def _expm_frechet_generators(params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``U = exp(iH)`` and ``dU/dtheta_a`` for all 15 generators, shape (15, 4, 4)."""
    H = generator_matrix(params)
    w, V = np.linalg.eigh(H)
    e = np.exp(1j * w)
    diff = w[:, None] - w[None, :]
    close = np.abs(diff) < 1e-10
    # divided differences of exp(i w); the degenerate limit is i * exp(i w)
    safe = np.where(close, 1.0, diff)
    gamma = np.where(close, 1j * e[:, None], (e[:, None] - e[None, :]) / safe)
    Gt = V.conj().T[None] @ GENERATORS @ V[None]
    dU = V[None] @ (Gt * gamma[None]) @ V.conj().T[None]
    return (V * e) @ V.conj().T, dU


def loss_and_gradient(
    model: ParameterizedEQS, states: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient with respect to ``model.params``."""
    states = np.atleast_2d(states)
    y = np.asarray(y, dtype=float)
    J = len(model.pairs)
    mats, dmats = [], []
    for th in model.params:
        U, dU = _expm_frechet_generators(th)
        mats.append(U)
        dmats.append(dU)

    chi = states
    for U, p in zip(mats, model.pairs):
        chi = apply_matrix(chi, U.conj().T, p)
    K = len(model.eigenvalues)
    f = np.abs(chi[:, :K]) ** 2 @ model.eigenvalues + model.bias
    value = loss_from_decisions(f, y)
    wts = _loss_weights(f, y)

    grad = np.zeros((J, 15))
    eta = np.zeros_like(chi)
    eta[:, :K] = chi[:, :K] * model.eigenvalues * wts[:, None]
    s = chi
    for j in range(J - 1, -1, -1):
        U, p = mats[j], model.pairs[j]
        s = apply_matrix(s, U, p)  # state before U_j^dagger was applied
        E = environment_tensor(eta, s, p).sum(axis=0)
        # d f = 2 Re <eta|dU^dagger|s> = 2 Re Tr[E dU^dagger]
        grad[j] = 2 * np.real(np.einsum("ab,jab->j", E, dmats[j].conj()))
        eta = apply_matrix(eta, U, p)
    return value, grad


def loss_gradient(model: ParameterizedEQS, states: np.ndarray, y: np.ndarray) -> np.ndarray:
    return loss_and_gradient(model, states, y)[1]


# -- experiments -----------------------------------------------------------


@dataclass
class GradientReport:
    label: int
    n_params: int
    sum_sq_eqs: float
    sum_sq_random: list[float]

    @property
    def random_mean(self) -> float:
        return float(np.mean(self.sum_sq_random))

    @property
    def random_std(self) -> float:
        return float(np.std(self.sum_sq_random))

    @property
    def ratio_mean(self) -> float:
        """Mean over random draws of ``sum_sq_eqs / sum_sq_random``."""
        r = np.asarray(self.sum_sq_random)
        if np.any(r == 0):
            return float("inf")
        return float(np.mean(self.sum_sq_eqs / r))

    @property
    def ratio_of_means(self) -> float:
        m = self.random_mean
        return float("inf") if m == 0 else self.sum_sq_eqs / m

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_params": self.n_params,
            "sum_sq_eqs": self.sum_sq_eqs,
            "sum_sq_random": list(self.sum_sq_random),
            "sum_sq_random_mean": self.random_mean,
            "sum_sq_random_std": self.random_std,
            "ratio_mean": self.ratio_mean,
            "ratio_of_means": self.ratio_of_means,
        }


def gradient_experiment(
    model: EQSModel,
    states: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    n_random: int = 10,
    random_params: list[np.ndarray] | None = None,
) -> list[GradientReport]:
    """Sum of squared loss gradients at the EQS point and at random points.

    ``states`` must not have been used to build the surrogate. Random
    parameters are drawn uniformly from ``[0, 2pi)`` on the same circuit
    layout; passing ``random_params`` overrides the draw (one entry per
    repetition, reused for every label).
    """
    states = np.atleast_2d(states)
    labels = np.asarray(labels, dtype=int)
    if len(states) == 0:
        raise EQSError("empty evaluation set")
    reports = []
    for l, (circ, w, b) in enumerate(zip(model.circuits, model.eigenvalues, model.biases)):
        y = (labels == l).astype(float)
        pm = ParameterizedEQS.from_circuit(circ, w, b)
        g_eqs = loss_gradient(pm, states, y)
        randoms = []
        for r in range(n_random):
            if random_params is not None:
                theta = np.asarray(random_params[r]).reshape(pm.params.shape)
            else:
                rng = np.random.default_rng([seed, l, r])
                theta = rng.uniform(0, 2 * np.pi, size=pm.params.shape)
            g = loss_gradient(pm.with_params(theta), states, y)
            randoms.append(float(np.sum(g**2)))
        reports.append(GradientReport(l, pm.params.size, float(np.sum(g_eqs**2)), randoms))
    return reports


class Adam:
    def __init__(self, lr: float = 0.009, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    model: ParameterizedEQS
    loss_trace: list[float]
    initial_loss: float
    final_loss: float

    def trace_csv(self) -> str:
        rows = ["step,loss"] + [f"{i},{v!r}" for i, v in enumerate(self.loss_trace)]
        return "\n".join(rows) + "\n"


def adam_train(
    model: ParameterizedEQS,
    states: np.ndarray,
    y: np.ndarray,
    steps: int,
    lr: float = 0.009,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    batch_size: int = 1000,
    seed: int = 0,
) -> TrainResult:
    """Fine-tune gate parameters; the trace holds the batch loss before each step."""
    if steps < 1:
        raise EQSError("steps must be >= 1")
    states = np.atleast_2d(states)
    y = np.asarray(y, dtype=float)
    N = len(y)
    bs = min(batch_size, N)
    rng = np.random.default_rng(seed)
    opt = Adam(lr, beta1, beta2, eps)
    params = model.params.copy()
    trace = []
    order, pos = rng.permutation(N), 0
    initial = loss(model, states, y)
    for _ in range(steps):
        if pos + bs > N:
            order, pos = rng.permutation(N), 0
        idx = order[pos : pos + bs]
        pos += bs
        value, grad = loss_and_gradient(model.with_params(params), states[idx], y[idx])
        trace.append(value)
        params = opt.step(params, grad)
    trained = model.with_params(params)
    return TrainResult(trained, trace, initial, loss(trained, states, y))

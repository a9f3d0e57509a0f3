"""Dense statevector simulation of two-qubit gate circuits.

States are plain complex128 numpy arrays of length ``2**n``. Qubit 0 is the
least significant bit of the basis index. A two-qubit gate on ``pair=(i, j)``
uses the local ordering of ``np.kron(A, B)``: ``A`` acts on qubit ``i`` and
``B`` on qubit ``j``.

A circuit stores gates ``U_1 ... U_J`` and represents ``C = U_1 U_2 ... U_J``,
so running it on a state applies ``U_J`` first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

#: Labels of the 15 traceless two-qubit Pauli strings, lexicographic order.
GENERATOR_LABELS: tuple[str, ...] = tuple(
    a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II"
)

#: Generator basis, shape (15, 4, 4). First letter acts on ``pair[0]``.
GENERATORS: np.ndarray = np.array(
    [np.kron(_PAULI[lab[0]], _PAULI[lab[1]]) for lab in GENERATOR_LABELS]
)


class SimulatorError(ValueError):
    pass


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise SimulatorError(f"state length {dim} is not a power of two")
    return n


def zero_state(n_qubits: int) -> np.ndarray:
    return basis_state(n_qubits, 0)


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    if not 0 <= index < 2**n_qubits:
        raise SimulatorError(f"basis index {index} out of range for {n_qubits} qubits")
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def random_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return psi / np.linalg.norm(psi)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def expm_hermitian(h: np.ndarray) -> np.ndarray:
    """``exp(i h)`` for Hermitian ``h`` through its eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def generator_matrix(params: Sequence[float]) -> np.ndarray:
    """Hermitian ``sum_j params_j G_j``."""
    params = np.asarray(params, dtype=float)
    if params.shape != (15,):
        raise SimulatorError(f"expected 15 generator coefficients, got shape {params.shape}")
    return np.tensordot(params, GENERATORS, axes=1)


def params_to_unitary(params: Sequence[float]) -> np.ndarray:
    return expm_hermitian(generator_matrix(params))


@dataclass
class TwoQubitGate:
    pair: tuple[int, int]
    matrix: np.ndarray
    params: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.pair = (int(self.pair[0]), int(self.pair[1]))
        if self.pair[0] == self.pair[1]:
            raise SimulatorError(f"gate pair {self.pair} acts twice on one qubit")
        if min(self.pair) < 0:
            raise SimulatorError(f"negative qubit index in {self.pair}")
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (4, 4):
            raise SimulatorError(f"gate matrix must be 4x4, got {self.matrix.shape}")
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=float)

    @classmethod
    def from_params(cls, pair: tuple[int, int], params: Sequence[float]) -> "TwoQubitGate":
        params = np.asarray(params, dtype=float)
        return cls(pair, params_to_unitary(params), params.copy())

    @classmethod
    def identity(cls, pair: tuple[int, int]) -> "TwoQubitGate":
        return cls(pair, np.eye(4, dtype=complex))

    def dagger(self) -> "TwoQubitGate":
        return TwoQubitGate(self.pair, self.matrix.conj().T)


@dataclass
class GateCircuit:
    n_qubits: int
    gates: list[TwoQubitGate] = field(default_factory=list)

    def __post_init__(self) -> None:
        for g in self.gates:
            self._check(g)

    def _check(self, gate: TwoQubitGate) -> None:
        if max(gate.pair) >= self.n_qubits:
            raise SimulatorError(
                f"gate pair {gate.pair} out of range for {self.n_qubits} qubits"
            )

    def append(self, gate: TwoQubitGate) -> None:
        self._check(gate)
        self.gates.append(gate)

    def __len__(self) -> int:
        return len(self.gates)

    def copy(self) -> "GateCircuit":
        return GateCircuit(
            self.n_qubits,
            [
                TwoQubitGate(g.pair, g.matrix.copy(), None if g.params is None else g.params.copy())
                for g in self.gates
            ],
        )

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "gates": [
                {
                    "pair": list(g.pair),
                    "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in g.matrix],
                    "params": None if g.params is None else [float(t) for t in g.params],
                }
                for g in self.gates
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GateCircuit":
        gates = []
        for g in data["gates"]:
            m = np.array(g["matrix"], dtype=float)
            gates.append(TwoQubitGate(tuple(g["pair"]), m[..., 0] + 1j * m[..., 1], g.get("params")))
        return cls(int(data["n_qubits"]), gates)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GateCircuit":
        return cls.from_dict(json.loads(text))

    def dense(self) -> np.ndarray:
        """Full ``2**n x 2**n`` matrix of the circuit; small n only."""
        dim = 2**self.n_qubits
        cols = np.eye(dim, dtype=complex)
        return run_circuit(self, cols.T).T


def _axis(n: int, qubit: int) -> int:
    # reshape(2,...,2) puts the most significant bit first
    return n - 1 - qubit


def _check_pair(n: int, pair: tuple[int, int]) -> None:
    i, j = pair
    if i == j:
        raise SimulatorError(f"gate pair {pair} acts twice on one qubit")
    if not (0 <= i < n and 0 <= j < n):
        raise SimulatorError(f"qubit pair {pair} out of range for {n} qubits")


def apply_matrix(state: np.ndarray, matrix: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    """Apply a 4x4 matrix to ``pair``; ``state`` may carry leading batch axes."""
    n = n_qubits_of(state)
    _check_pair(n, pair)
    batch = state.shape[:-1]
    nb = len(batch)
    psi = state.reshape(batch + (2,) * n)
    ai, aj = nb + _axis(n, pair[0]), nb + _axis(n, pair[1])
    psi = np.moveaxis(psi, (ai, aj), (-2, -1))
    shape = psi.shape
    out = psi.reshape(-1, 4) @ np.asarray(matrix).T
    out = np.moveaxis(out.reshape(shape), (-2, -1), (ai, aj))
    return out.reshape(state.shape)


def apply_single(state: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a 2x2 matrix to one qubit; ``state`` may carry leading batch axes."""
    n = n_qubits_of(state)
    if not 0 <= qubit < n:
        raise SimulatorError(f"qubit {qubit} out of range for {n} qubits")
    batch = state.shape[:-1]
    nb = len(batch)
    psi = state.reshape(batch + (2,) * n)
    ax = nb + _axis(n, qubit)
    psi = np.moveaxis(psi, ax, -1)
    shape = psi.shape
    out = psi.reshape(-1, 2) @ np.asarray(matrix).T
    return np.moveaxis(out.reshape(shape), -1, ax).reshape(state.shape)


def apply_gate(state: np.ndarray, gate: TwoQubitGate) -> np.ndarray:
    return apply_matrix(state, gate.matrix, gate.pair)


def run_circuit(circuit: GateCircuit, state: np.ndarray) -> np.ndarray:
    """Return ``C|state>``: gate J is applied first, gate 1 last."""
    if n_qubits_of(state) != circuit.n_qubits:
        raise SimulatorError(
            f"circuit has {circuit.n_qubits} qubits, state has {n_qubits_of(state)}"
        )
    out = state
    for gate in reversed(circuit.gates):
        out = apply_gate(out, gate)
    return out


def run_circuit_dagger(circuit: GateCircuit, state: np.ndarray) -> np.ndarray:
    """Return ``C^dagger|state>``: ``U_1^dagger`` is applied first."""
    if n_qubits_of(state) != circuit.n_qubits:
        raise SimulatorError(
            f"circuit has {circuit.n_qubits} qubits, state has {n_qubits_of(state)}"
        )
    out = state
    for gate in circuit.gates:
        out = apply_matrix(out, gate.matrix.conj().T, gate.pair)
    return out


def inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """``<a|b>``."""
    if a.shape != b.shape:
        raise SimulatorError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def environment_tensor(
    bras: np.ndarray, kets: np.ndarray, pair: tuple[int, int]
) -> np.ndarray:
    """Partial traces ``Tr_rest |ket><bra|`` onto ``pair``.

    ``bras`` and ``kets`` have shape ``(K, 2**n)`` (or ``(2**n,)`` for a single
    entry). Returns ``(K, 4, 4)`` (or ``(4, 4)``) with entry ``[a, b]`` equal to
    ``sum_r ket[a, r] * conj(bra[b, r])``. Hence ``Tr[F] == <bra|ket>`` and
    ``Tr[F @ M] == <bra|M|ket>`` for any 4x4 ``M`` acting on ``pair``.
    Cost is O(K * 2**n); the full outer product is never formed.
    """
    single = kets.ndim == 1
    bras = np.atleast_2d(bras)
    kets = np.atleast_2d(kets)
    if bras.shape != kets.shape:
        raise SimulatorError(f"bra/ket shape mismatch: {bras.shape} vs {kets.shape}")
    n = n_qubits_of(kets)
    _check_pair(n, pair)
    K = kets.shape[0]
    src = (1 + _axis(n, pair[0]), 1 + _axis(n, pair[1]))
    kt = np.moveaxis(kets.reshape((K,) + (2,) * n), src, (1, 2)).reshape(K, 4, -1)
    bt = np.moveaxis(bras.reshape((K,) + (2,) * n), src, (1, 2)).reshape(K, 4, -1)
    env = kt @ bt.conj().transpose(0, 2, 1)
    return env[0] if single else env


def frobenius_distance_from_identity(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix - np.eye(matrix.shape[0])))


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)

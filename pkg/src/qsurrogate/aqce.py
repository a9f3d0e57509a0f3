"""Circuit synthesis for isometries by sweeping SVD-optimal two-qubit gates.

Given orthonormal targets ``|Psi_k>``, find ``C = U_1 ... U_J`` with
``C|k> ~ |Psi_k>`` (up to a phase per k). For gate ``m`` the per-target
fidelity is ``<Phi_k|U_m^dagger|Psi'_k>`` where

    |Psi'_k> = U_{m-1}^dagger ... U_1^dagger |Psi_k>
    |Phi_k>  = U_{m+1} ... U_J |k>

so it equals ``Tr[F_k U_m^dagger]`` with ``F_k`` the partial trace of
``|Psi'_k><Phi_k|`` onto the gate's pair. Phases are aligned per target,
the aligned tensors are summed, and the maximiser of ``|Tr[F U^dagger]|``
over unitaries is ``X @ Y`` from ``F = X diag(D) Y``.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import svd
from .simulator import (
    GateCircuit,
    TwoQubitGate,
    apply_matrix,
    environment_tensor,
    frobenius_distance_from_identity,
    n_qubits_of,
)

log = logging.getLogger(__name__)

#: Gate budget used when no J_max is given.
SAFETY_GATE_CAP = 600

_ZERO_TRACE = 1e-15
_TIE = 1e-12
_NULL_REL = 1e-10


class AqceError(ValueError):
    pass


@dataclass
class AqceConfig:
    J0: int = 12
    delta_J: int = 6
    sweeps: int = 4
    J_max: int | None = None
    F_target: float | list[float] = 0.6
    pairs: list[tuple[int, int]] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.J0 < 1 or self.delta_J < 1 or self.sweeps < 1:
            raise AqceError("J0, delta_J and sweeps must all be >= 1")
        targets = np.atleast_1d(np.asarray(self.F_target, dtype=float))
        if np.any(targets <= 0) or np.any(targets > 1):
            raise AqceError("target fidelities must lie in (0, 1]")
        if self.J_max is not None and self.J_max < self.J0:
            raise AqceError("J_max must be at least J0")

    @property
    def budget(self) -> int:
        return SAFETY_GATE_CAP if self.J_max is None else self.J_max

    def targets_for(self, K: int) -> np.ndarray:
        t = np.atleast_1d(np.asarray(self.F_target, dtype=float))
        if t.size == 1:
            return np.full(K, float(t[0]))
        if t.size != K:
            raise AqceError(f"{t.size} target fidelities given for {K} states")
        return t

    def to_dict(self) -> dict:
        return {
            "J0": self.J0,
            "delta_J": self.delta_J,
            "sweeps": self.sweeps,
            "J_max": self.J_max,
            "F_target": self.F_target,
            "pairs": None if self.pairs is None else [list(p) for p in self.pairs],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AqceConfig":
        data = dict(data)
        if data.get("pairs") is not None:
            data["pairs"] = [tuple(p) for p in data["pairs"]]
        return cls(**data)


@dataclass
class UpdateRecord:
    sweep: int
    m: int  # 1-based gate position
    pair: tuple[int, int]
    fidelities: np.ndarray
    total: float


@dataclass
class AqceTrace:
    records: list[UpdateRecord] = field(default_factory=list)

    def totals(self) -> np.ndarray:
        return np.array([r.total for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        K = len(self.records[0].fidelities) if self.records else 0
        w.writerow(["update_index", "sweep", "m", "pair", "F_total"] + [f"F_{k}" for k in range(K)])
        for idx, r in enumerate(self.records):
            w.writerow(
                [idx, r.sweep, r.m, f"{r.pair[0]}-{r.pair[1]}", repr(r.total)]
                + [repr(float(f)) for f in r.fidelities]
            )
        return buf.getvalue()


@dataclass
class AqceResult:
    circuit: GateCircuit
    trace: AqceTrace
    fidelities: np.ndarray
    converged: bool


def phase_align(F: np.ndarray, U: np.ndarray) -> float:
    """``theta = -arg Tr[F U^dagger]``, or 0 when the trace vanishes."""
    t = np.sum(F * U.conj())
    if abs(t) <= _ZERO_TRACE:
        return 0.0
    return float(-np.angle(t))


def optimal_gate(F: np.ndarray, reference: np.ndarray | None = None) -> np.ndarray:
    """Unitary maximising ``Re Tr[F U^dagger]``; the maximum is the nuclear norm.

    ``X @ Y`` from the SVD is unique on the range of ``F`` only. When ``F`` is
    rank deficient the remaining block is taken as the unitary closest to
    ``reference`` (default identity), which keeps the choice independent of
    rounding noise and leaves idle gates at the identity.
    """
    r = svd(F)
    null = r.D <= _NULL_REL * max(r.D[0], _ZERO_TRACE)
    if not null.any():
        return r.X @ r.Y
    ref = np.eye(F.shape[0], dtype=complex) if reference is None else reference
    keep = ~null
    X0, Y0 = r.X[:, null], r.Y[null]
    W = svd(X0.conj().T @ ref @ Y0.conj().T)
    return r.X[:, keep] @ r.Y[keep] + X0 @ (W.X @ W.Y) @ Y0


def default_pairs(n_qubits: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n_qubits), 2))


def _schedule_pair(index: int, n_qubits: int) -> tuple[int, int]:
    q = index % (n_qubits - 1)
    return (q, q + 1)


def _basis_block(K: int, n_qubits: int) -> np.ndarray:
    out = np.zeros((K, 2**n_qubits), dtype=complex)
    out[np.arange(K), np.arange(K)] = 1.0
    return out


def circuit_fidelities(circuit: GateCircuit, targets: np.ndarray) -> tuple[np.ndarray, float]:
    """``F_k = |<k|C^dagger|Psi_k>|`` and their sum."""
    targets = np.atleast_2d(targets)
    if targets.shape[1] != 2**circuit.n_qubits:
        raise AqceError("targets and circuit disagree on qubit count")
    K = targets.shape[0]
    psi = targets
    for g in circuit.gates:
        psi = apply_matrix(psi, g.matrix.conj().T, g.pair)
    f = np.abs(psi[np.arange(K), np.arange(K)])
    return f, float(f.sum())


def _check_targets(targets: np.ndarray) -> None:
    K, dim = targets.shape
    if K > dim:
        raise AqceError(f"cannot embed {K} states in dimension {dim}")
    g = targets.conj() @ targets.T
    err = np.max(np.abs(g - np.eye(K)))
    if err > 1e-6:
        raise AqceError(f"targets are not orthonormal (max Gram deviation {err:.2e})")


def synthesize_isometry(targets: np.ndarray, config: AqceConfig | None = None) -> AqceResult:
    """Grow and sweep a circuit until every ``F_k`` reaches its target.

    The initial ``J0`` identity gates are swept first; afterwards each round
    appends ``delta_J`` identity gates (as ``U_{J+1}, ...``) and runs
    ``config.sweeps`` sweeps. Convergence is checked after every sweep. If
    the gate budget runs out the best circuit is returned with
    ``converged=False``.
    """
    config = config or AqceConfig()
    targets = np.atleast_2d(np.asarray(targets, dtype=complex))
    n = n_qubits_of(targets)
    if n < 2:
        raise AqceError("need at least two qubits")
    _check_targets(targets)
    K = targets.shape[0]
    goal = config.targets_for(K)
    pairs = sorted(tuple(sorted(p)) for p in (config.pairs or default_pairs(n)))
    for p in pairs:
        if p[0] == p[1] or p[1] >= n or p[0] < 0:
            raise AqceError(f"invalid pair {p} for {n} qubits")

    circuit = GateCircuit(n, [TwoQubitGate.identity(_schedule_pair(i, n)) for i in range(config.J0)])
    trace = AqceTrace()
    basis = _basis_block(K, n)
    fids, _ = circuit_fidelities(circuit, targets)
    sweep_no = 0

    def reached(f: np.ndarray) -> bool:
        return bool(np.all(f >= goal))

    def run_sweeps() -> np.ndarray:
        nonlocal sweep_no
        f = fids
        for _ in range(config.sweeps):
            sweep_no += 1
            f = _sweep(circuit, targets, basis, pairs, trace, sweep_no)
            if reached(f):
                break
        return f

    if not reached(fids):
        fids = run_sweeps()
    while not reached(fids) and len(circuit) < config.budget:
        grow = min(config.delta_J, config.budget - len(circuit))
        start = len(circuit)
        for i in range(grow):
            circuit.append(TwoQubitGate.identity(_schedule_pair(start + i, n)))
        fids = run_sweeps()
        log.debug("J=%d fidelities=%s", len(circuit), np.round(fids, 4))
    converged = reached(fids)
    if not converged:
        log.warning("gate budget %d exhausted; fidelities %s", config.budget, np.round(fids, 4))
    return AqceResult(circuit, trace, fids, converged)


def _sweep(
    circuit: GateCircuit,
    targets: np.ndarray,
    basis: np.ndarray,
    pairs: list[tuple[int, int]],
    trace: AqceTrace,
    sweep_no: int,
) -> np.ndarray:
    J = len(circuit)
    # bras[m] = U_{m+1} ... U_J |k>, valid through the sweep because gate m
    # is only touched after every bra that depends on it has been used.
    bras = [None] * J
    b = basis
    for m in range(J - 1, -1, -1):
        bras[m] = b
        b = apply_matrix(b, circuit.gates[m].matrix, circuit.gates[m].pair)
    kets = targets
    fids = None
    for m in range(J):
        U = circuit.gates[m].matrix
        best = None
        for p in pairs:
            env = environment_tensor(bras[m], kets, p)  # (K, 4, 4)
            tr = np.einsum("kab,ab->k", env, U.conj())
            theta = np.where(np.abs(tr) <= _ZERO_TRACE, 0.0, -np.angle(tr))
            combined = np.einsum("k,kab->ab", np.exp(1j * theta), env)
            score = float(svd(combined).D.sum())
            if best is None or score > best[0] + _TIE:
                best = (score, p, combined, env)
        _, p, combined, env = best
        U_new = optimal_gate(combined, U if p == circuit.gates[m].pair else None)
        circuit.gates[m] = TwoQubitGate(p, U_new)
        fids = np.abs(np.einsum("kab,ab->k", env, U_new.conj()))
        trace.records.append(UpdateRecord(sweep_no, m + 1, p, fids, float(fids.sum())))
        kets = apply_matrix(kets, U_new.conj().T, p)
    return fids


def heatmap_rows(circuit: GateCircuit) -> list[dict]:
    """Gate position, pair and Frobenius distance from the identity."""
    return [
        {"m": m + 1, "q0": g.pair[0], "q1": g.pair[1], "distance": frobenius_distance_from_identity(g.matrix)}
        for m, g in enumerate(circuit.gates)
    ]


def heatmap_csv(circuit: GateCircuit) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "q0", "q1", "frobenius_distance"])
    for row in heatmap_rows(circuit):
        w.writerow([row["m"], row["q0"], row["q1"], repr(row["distance"])])
    return buf.getvalue()

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsurrogate.simulator import (
    GENERATOR_LABELS,
    GENERATORS,
    GateCircuit,
    SimulatorError,
    TwoQubitGate,
    apply_matrix,
    apply_single,
    basis_state,
    environment_tensor,
    expm_hermitian,
    inner_product,
    kron_all,
    params_to_unitary,
    random_state,
    random_unitary,
    run_circuit,
    run_circuit_dagger,
    zero_state,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def dense_two_qubit(n, matrix, pair):
    """Reference embedding by permuting basis indices (qubit 0 = least significant bit)."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    a, b = pair
    for col in range(dim):
        la = (col >> a) & 1
        lb = (col >> b) & 1
        local_in = 2 * la + lb
        for local_out in range(4):
            oa, ob = local_out >> 1, local_out & 1
            row = (col & ~(1 << a) & ~(1 << b)) | (oa << a) | (ob << b)
            out[row, col] += matrix[local_out, local_in]
    return out


class TestStates:
    def test_zero_and_basis(self):
        np.testing.assert_array_equal(zero_state(2), [1, 0, 0, 0])
        np.testing.assert_array_equal(basis_state(2, 3), [0, 0, 0, 1])
        with pytest.raises(SimulatorError):
            basis_state(2, 4)

    def test_random_state_normalised(self, rng):
        for _ in range(20):
            assert np.linalg.norm(random_state(4, rng)) == pytest.approx(1.0, abs=1e-12)

    def test_random_unitary(self, rng):
        U = random_unitary(8, rng)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(8), atol=1e-12)


class TestGateApplication:
    def test_cnot_control_is_first_qubit_of_pair(self):
        # |q1 q0> = |01> (index 1): control qubit 0 set, target qubit 1 flips -> index 3
        out = apply_matrix(basis_state(2, 1), CNOT, (0, 1))
        np.testing.assert_allclose(out, basis_state(2, 3))
        out = apply_matrix(basis_state(2, 1), CNOT, (1, 0))
        np.testing.assert_allclose(out, basis_state(2, 1))

    def test_bell_state(self):
        psi = apply_single(zero_state(2), H, 0)
        psi = apply_matrix(psi, CNOT, (0, 1))
        np.testing.assert_allclose(psi, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)

    def test_single_qubit_matches_kron(self, rng):
        psi = random_state(3, rng)
        # qubit 2 is the most significant factor
        np.testing.assert_allclose(apply_single(psi, X, 2), kron_all([X, I2, I2]) @ psi, atol=1e-14)
        np.testing.assert_allclose(apply_single(psi, X, 0), kron_all([I2, I2, X]) @ psi, atol=1e-14)

    def test_matches_permutation_oracle(self, rng):
        n = 4
        for pair in [(0, 1), (1, 0), (0, 3), (3, 1), (2, 3)]:
            U = random_unitary(4, rng)
            psi = random_state(n, rng)
            np.testing.assert_allclose(
                apply_matrix(psi, U, pair), dense_two_qubit(n, U, pair) @ psi, atol=1e-13
            )

    def test_adjacent_pair_matches_kron(self, rng):
        A, B = random_unitary(2, rng), random_unitary(2, rng)
        psi = random_state(2, rng)
        # pair (1, 0): A on qubit 1 (most significant), B on qubit 0
        np.testing.assert_allclose(apply_matrix(psi, np.kron(A, B), (1, 0)), np.kron(A, B) @ psi, atol=1e-14)

    def test_batched(self, rng):
        U = random_unitary(4, rng)
        batch = np.array([random_state(3, rng) for _ in range(5)])
        out = apply_matrix(batch, U, (2, 0))
        for row, psi in zip(out, batch):
            np.testing.assert_allclose(row, apply_matrix(psi, U, (2, 0)), atol=1e-14)

    def test_bad_pair(self):
        with pytest.raises(SimulatorError):
            apply_matrix(zero_state(2), np.eye(4), (0, 2))
        with pytest.raises(SimulatorError):
            TwoQubitGate((1, 1), np.eye(4))

    def test_norm_preserved_over_many_draws(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 6))
            pair = tuple(int(q) for q in rng.choice(n, 2, replace=False))
            psi = random_state(n, rng)
            out = apply_matrix(psi, random_unitary(4, rng), pair)
            assert abs(np.linalg.norm(out) - 1) < 1e-12


    def test_identity_is_bit_exact(self, rng):
        psi = random_state(3, rng)
        np.testing.assert_array_equal(apply_matrix(psi, np.eye(4), (2, 0)), psi)

    def test_hadamard_gate_on_pair(self):
        # H on the first qubit of pair (0, 1): kron(H, I) in local order
        c = GateCircuit(2, [TwoQubitGate((0, 1), np.kron(H, I2))])
        np.testing.assert_allclose(run_circuit(c, zero_state(2)), [2**-0.5, 2**-0.5, 0, 0], atol=1e-15)
        assert inner_product(zero_state(2), run_circuit(c, zero_state(2))) == pytest.approx(2**-0.5)


class TestGenerators:
    def test_fifteen_hermitian_orthogonal(self):
        assert len(GENERATOR_LABELS) == 15 and "II" not in GENERATOR_LABELS
        assert GENERATOR_LABELS[0] == "IX" and GENERATOR_LABELS[-1] == "ZZ"
        for G in GENERATORS:
            np.testing.assert_allclose(G, G.conj().T)
        gram = np.einsum("aij,bji->ab", GENERATORS, GENERATORS)
        np.testing.assert_allclose(gram, 4 * np.eye(15), atol=1e-14)

    def test_expm_against_series(self, rng):
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (A + A.conj().T) / 10
        series = np.eye(4, dtype=complex)
        term = np.eye(4, dtype=complex)
        for k in range(1, 40):
            term = term @ (1j * h) / k
            series += term
        np.testing.assert_allclose(expm_hermitian(h), series, atol=1e-13)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-7, 7), min_size=15, max_size=15))
    def test_params_give_unitary(self, params):
        U = params_to_unitary(params)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(4), atol=1e-12)

    def test_single_generator_closed_form(self):
        # exp(i t XX) = cos t I + i sin t XX
        t = 0.3
        p = np.zeros(15)
        p[GENERATOR_LABELS.index("XX")] = t
        XX = np.kron(X, X)
        np.testing.assert_allclose(params_to_unitary(p), np.cos(t) * np.eye(4) + 1j * np.sin(t) * XX, atol=1e-14)


class TestCircuits:
    def _random_circuit(self, rng, n, J):
        gates = []
        for _ in range(J):
            pair = tuple(int(q) for q in rng.choice(n, 2, replace=False))
            gates.append(TwoQubitGate(pair, random_unitary(4, rng)))
        return GateCircuit(n, gates)

    def test_run_applies_last_gate_first(self, rng):
        c = self._random_circuit(rng, 3, 4)
        dense = np.eye(8, dtype=complex)
        for g in c.gates:
            dense = dense @ dense_two_qubit(3, g.matrix, g.pair)
        np.testing.assert_allclose(c.dense(), dense, atol=1e-13)
        psi = random_state(3, rng)
        np.testing.assert_allclose(run_circuit(c, psi), dense @ psi, atol=1e-13)
        np.testing.assert_allclose(run_circuit_dagger(c, psi), dense.conj().T @ psi, atol=1e-13)

    def test_composition(self, rng):
        a, b = self._random_circuit(rng, 3, 3), self._random_circuit(rng, 3, 2)
        ab = GateCircuit(3, a.gates + b.gates)
        np.testing.assert_allclose(ab.dense(), a.dense() @ b.dense(), atol=1e-13)

    def test_dagger_inverts(self, rng):
        c = self._random_circuit(rng, 4, 6)
        psi = random_state(4, rng)
        np.testing.assert_allclose(run_circuit_dagger(c, run_circuit(c, psi)), psi, atol=1e-13)

    def test_json_round_trip(self, rng):
        c = self._random_circuit(rng, 4, 5)
        c.append(TwoQubitGate.from_params((0, 2), rng.normal(size=15)))
        back = GateCircuit.from_json(c.to_json())
        assert back.n_qubits == 4 and len(back) == 6
        for g, h in zip(c.gates, back.gates):
            assert g.pair == h.pair
            np.testing.assert_allclose(g.matrix, h.matrix, rtol=0, atol=1e-15)

    def test_append_validates(self):
        c = GateCircuit(2)
        with pytest.raises(SimulatorError):
            c.append(TwoQubitGate((0, 2), np.eye(4)))


class TestInnerProduct:
    def test_normalised(self, rng):
        psi = random_state(4, rng)
        assert inner_product(psi, psi) == pytest.approx(1.0 + 0j, abs=1e-14)

    def test_matches_exact_summation(self, rng):
        for _ in range(20):
            a, b = random_state(5, rng), random_state(5, rng)
            terms = a.conj() * b
            exact = complex(math.fsum(terms.real), math.fsum(terms.imag))
            assert abs(inner_product(a, b) - exact) <= 1e-12


class TestEnvironmentTensor:
    def test_product_state(self):
        F = environment_tensor(zero_state(2), zero_state(2), (0, 1))
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        np.testing.assert_array_equal(F, expected)

    def test_matches_dense_partial_trace(self, rng):
        n = 4
        for pair in [(0, 1), (2, 0), (1, 3)]:
            bra, ket = random_state(n, rng), random_state(n, rng)
            rho = np.outer(ket, bra.conj()).reshape((2,) * (2 * n))
            # tensor axis of qubit q is n - 1 - q (row) and 2n - 1 - q (column)
            rest = [q for q in range(n) if q not in pair]
            letters = "abcdefghijklmnop"
            row = [None] * n
            col = [None] * n
            for i, q in enumerate(pair):
                row[n - 1 - q] = "wx"[i]
                col[n - 1 - q] = "yz"[i]
            for i, q in enumerate(rest):
                row[n - 1 - q] = col[n - 1 - q] = letters[i]
            dense = np.einsum("".join(row + col) + "->wxyz", rho).reshape(4, 4)
            np.testing.assert_allclose(environment_tensor(bra, ket, pair), dense, atol=1e-13)

    def test_trace_is_overlap(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            pair = tuple(int(q) for q in rng.choice(n, 2, replace=False))
            a, b = random_state(n, rng), random_state(n, rng)
            F = environment_tensor(a, b, pair)
            assert np.trace(F) == pytest.approx(inner_product(a, b), abs=1e-12)

    def test_duality_with_gate(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            pair = tuple(int(q) for q in rng.choice(n, 2, replace=False))
            a, b = random_state(n, rng), random_state(n, rng)
            M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            F = environment_tensor(a, b, pair)
            assert np.trace(F @ M) == pytest.approx(inner_product(a, apply_matrix(b, M, pair)), abs=1e-12)

    def test_batched_shape(self, rng):
        a = np.array([random_state(3, rng) for _ in range(4)])
        b = np.array([random_state(3, rng) for _ in range(4)])
        F = environment_tensor(a, b, (0, 2))
        assert F.shape == (4, 4, 4)
        np.testing.assert_allclose(F[2], environment_tensor(a[2], b[2], (0, 2)))

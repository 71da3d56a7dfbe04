"""
Unit tests for the statevector kernels, post-selection and density matrices.
"""

import numpy as np
import pytest

from tests.fixtures import PAULI_MATRICES, kron_hamiltonian, random_pauli_sum, random_state
from vps.eigensolver import ground_energy
from vps.errors import CapacityError, DegenerateProjectionError, InvalidStateError
from vps.hamiltonian import PauliSum
from vps.statevec import (
    GATE_ARITY,
    GATE_KINDS,
    GATE_SLOTS,
    DensityMatrix,
    Gate,
    PostSelection,
    StateVector,
    apply_gate,
    apply_matrix,
    check_capacity,
    expectation,
    format_bitstrings,
    post_select,
    reduced_density_matrix,
    rotation_matrix,
    sample_bitstrings,
)

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


class TestGates:
    """Gate records and their matrices."""

    def test_wrong_arity_rejected(self) -> None:
        """Rzz needs two wires."""
        with pytest.raises(ValueError, match="acts on 2 wire"):
            Gate("Rzz", (0,), (0,))

    def test_missing_slot_rejected(self) -> None:
        """SU2 takes three slots."""
        with pytest.raises(ValueError, match="needs 3 parameter slot"):
            Gate("SU2", (0,), (0, 1))

    def test_unknown_kind_rejected(self) -> None:
        """Only the known gate set is accepted."""
        with pytest.raises(ValueError, match="unknown gate kind"):
            Gate("CNOT", (0, 1))

    def test_rotation_is_exponential_of_generator(self) -> None:
        """Rx(t) = cos(t) I + i sin(t) X."""
        t = 0.37
        expected = np.cos(t) * np.eye(2) + 1j * np.sin(t) * PAULI_MATRICES["X"]
        np.testing.assert_allclose(rotation_matrix("Rx", t), expected)

    @pytest.mark.parametrize("kind", ["Rx", "Ry", "Rz", "Rzz", "Rswap"])
    def test_rotations_are_unitary(self, kind: str) -> None:
        """Every parameterized gate is unitary."""
        u = rotation_matrix(kind, 1.234)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-14)

    def test_su2_expands_rz_first(self) -> None:
        """SU2(a, b, c) applies Rz(c), then Ry(b), then Rz(a)."""
        prims = Gate("SU2", (0,), (4, 5, 6)).primitives()
        assert [(p.kind, p.slot) for p in prims] == [("Rz", 6), ("Ry", 5), ("Rz", 4)]


class TestKernels:
    """Tensor contraction of gates into states."""

    def test_hadamard_makes_plus_state(self) -> None:
        """H|0> = |+>."""
        out = apply_gate(StateVector.zero(1), Gate("H", (0,)))
        np.testing.assert_allclose(out.amps, [2**-0.5, 2**-0.5])

    def test_x_on_last_wire_sets_lowest_bit(self) -> None:
        """Wire 0 is the most significant bit."""
        out = apply_gate(StateVector.zero(2), Gate("X", (1,)))
        np.testing.assert_allclose(out.amps, [0, 1, 0, 0])

    def test_two_qubit_matrix_matches_kronecker(self, rng) -> None:
        """A matrix on wires (0, 1) of three qubits equals kron(M, I)."""
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        psi = random_state(3, rng)
        out = apply_matrix(psi.tensor(), m, (0, 1)).reshape(-1)
        np.testing.assert_allclose(out, np.kron(m, np.eye(2)) @ psi.amps, atol=1e-12)

    def test_reversed_wire_order_swaps_the_matrix(self, rng) -> None:
        """Listing wires (2, 1) applies SWAP M SWAP on qubits (1, 2)."""
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        psi = random_state(3, rng)
        out = apply_matrix(psi.tensor(), m, (2, 1)).reshape(-1)
        full = np.kron(np.eye(2), SWAP @ m @ SWAP)
        np.testing.assert_allclose(out, full @ psi.amps, atol=1e-12)

    def test_apply_gate_checks_wires_and_slots(self) -> None:
        """Gates outside the register or without values are rejected."""
        with pytest.raises(ValueError, match="out of range"):
            apply_gate(StateVector.zero(1), Gate("X", (1,)))
        with pytest.raises(ValueError, match="missing"):
            apply_gate(StateVector.zero(1), Gate("Rx", (0,), (2,)), [0.1])

    def test_norm_survives_a_long_random_circuit(self, rng) -> None:
        """Fifty random gates in a row keep the state normalized."""
        state = random_state(4, rng)
        params = rng.uniform(-np.pi, np.pi, 3)
        for _ in range(50):
            kind = str(rng.choice(GATE_KINDS))
            wires = tuple(int(w) for w in rng.choice(4, size=GATE_ARITY[kind], replace=False))
            state = apply_gate(state, Gate(kind, wires, tuple(range(GATE_SLOTS[kind]))), params)
        assert state.norm() == pytest.approx(1.0, abs=1e-10)

    def test_capacity_limit(self) -> None:
        """More than 20 qubits exceeds the simulator."""
        with pytest.raises(CapacityError):
            check_capacity(21)


class TestExpectation:
    """Observables on all wires or a subset."""

    def test_matches_dense_product(self, rng) -> None:
        """<psi|H|psi> agrees with the Kronecker matrix."""
        h = random_pauli_sum(3, rng)
        psi = random_state(3, rng)
        expected = np.vdot(psi.amps, kron_hamiltonian(h) @ psi.amps).real
        assert expectation(psi, h) == pytest.approx(expected, abs=1e-12)

    def test_observable_on_chosen_wires(self) -> None:
        """A one-qubit Z placed on wire 2 reads that wire."""
        state = apply_gate(StateVector.zero(3), Gate("X", (2,)))
        z = PauliSum.from_labels({"Z0": 1.0}, 1)
        assert expectation(state, z, wires=[2]) == pytest.approx(-1.0)
        assert expectation(state, z, wires=[0]) == pytest.approx(1.0)

    def test_wide_observable_rejected(self) -> None:
        """The observable cannot be wider than the state."""
        with pytest.raises(ValueError, match="observable on 2 qubits"):
            expectation(StateVector.zero(1), PauliSum.from_labels({"Z0 Z1": 1.0}, 2))


class TestPostSelect:
    """Projection of ancilla wires."""

    def test_bell_state_selection(self) -> None:
        """Selecting 1 on one half of a Bell pair leaves |1> with probability 1/2."""
        bell = StateVector(np.array([1, 0, 0, 1]) / np.sqrt(2), 2)
        reduced, prob = post_select(bell, PostSelection.bitstring((1,), "1"))
        assert prob == pytest.approx(0.5)
        np.testing.assert_allclose(reduced.amps, [0, 1], atol=1e-15)

    def test_zero_probability_raises(self) -> None:
        """An unreachable outcome is a degenerate projection."""
        with pytest.raises(DegenerateProjectionError):
            post_select(StateVector.zero(2), PostSelection.bitstring((1,), "1"))

    def test_selecting_every_wire_rejected(self) -> None:
        """At least one wire must remain."""
        with pytest.raises(ValueError, match="at least one wire"):
            post_select(StateVector.zero(1), PostSelection.bitstring((0,), "0"))

    def test_decomposition_identity(self, rng) -> None:
        """Branch energies weighted by their probabilities give the full expectation."""
        h = random_pauli_sum(2, rng)
        for _ in range(10):
            state = random_state(4, rng)
            total_prob, total_energy = 0.0, 0.0
            for bits in ("00", "01", "10", "11"):
                branch, prob = post_select(state, PostSelection.bitstring((2, 3), bits))
                total_prob += prob
                total_energy += prob * expectation(branch, h)
            assert total_prob == pytest.approx(1.0, abs=1e-10)
            assert total_energy == pytest.approx(expectation(state, h), abs=1e-9)

    def test_branches_respect_the_variational_bound(self, rng) -> None:
        """No post-selected branch has energy below the ground energy."""
        for _ in range(10):
            h = random_pauli_sum(2, rng)
            floor = ground_energy(h)
            state = random_state(4, rng)
            for bits in ("00", "01", "10", "11"):
                branch, _ = post_select(state, PostSelection.bitstring((2, 3), bits))
                assert expectation(branch, h) >= floor - 1e-10
            singlet, _ = post_select(state, PostSelection.singlet((2, 3)))
            assert expectation(singlet, h) >= floor - 1e-10

    def test_bitstring_length_must_match(self) -> None:
        """One bit per selected wire."""
        with pytest.raises(ValueError, match="does not match"):
            PostSelection.bitstring((0, 1), "1")

    def test_target_must_be_normalized(self) -> None:
        """Arbitrary targets are unit vectors."""
        with pytest.raises(ValueError, match="normalized"):
            PostSelection((0,), np.array([1.0, 1.0]))


class TestDensityMatrix:
    """Reduced states and density-matrix invariants."""

    def test_partial_trace_of_product_state(self) -> None:
        """Tracing out a |1> wire leaves the other wire's pure state."""
        state = apply_gate(apply_gate(StateVector.zero(2), Gate("H", (0,))), Gate("X", (1,)))
        rho = reduced_density_matrix(state, [0])
        np.testing.assert_allclose(rho.mat, 0.5 * np.ones((2, 2)), atol=1e-15)
        assert rho.purity() == pytest.approx(1.0)

    def test_partial_trace_of_bell_state_is_mixed(self) -> None:
        """Half of a Bell pair is maximally mixed."""
        bell = StateVector(np.array([1, 0, 0, 1]) / np.sqrt(2), 2)
        assert reduced_density_matrix(bell, [1]).purity() == pytest.approx(0.5)

    def test_empty_keep_rejected(self) -> None:
        """The keep list must name at least one wire."""
        with pytest.raises(ValueError, match="must not be empty"):
            reduced_density_matrix(StateVector.zero(2), [])

    def test_invalid_matrices_rejected(self) -> None:
        """Non-Hermitian, wrong-trace and negative matrices fail the check."""
        with pytest.raises(InvalidStateError, match="Hermitian"):
            DensityMatrix(np.array([[1, 1], [0, 0]]), 1)
        with pytest.raises(InvalidStateError, match="trace"):
            DensityMatrix(np.eye(2), 1)
        with pytest.raises(InvalidStateError, match="eigenvalue"):
            DensityMatrix(np.diag([1.5, -0.5]), 1)

    def test_expectation_is_trace(self) -> None:
        """Tr(Z rho) on the maximally mixed state vanishes."""
        rho = DensityMatrix(np.eye(2) / 2, 1)
        assert rho.expectation(PauliSum.from_labels({"Z0": 1.0}, 1)) == pytest.approx(0.0)


class TestSampling:
    """Computational-basis sampling."""

    def test_shape_dtype_and_seed(self, rng) -> None:
        """Samples are uint8 rows and reproducible for a seed."""
        state = random_state(3, rng)
        a = sample_bitstrings(state, 50, seed=3)
        b = sample_bitstrings(state, 50, seed=3)
        assert a.shape == (50, 3)
        assert a.dtype == np.uint8
        np.testing.assert_array_equal(a, b)

    def test_basis_state_always_returns_itself(self) -> None:
        """|01> is measured as 01 every time."""
        state = apply_gate(StateVector.zero(2), Gate("X", (1,)))
        samples = sample_bitstrings(state, 20, seed=0)
        assert set(format_bitstrings(samples)) == {"01"}

    def test_plus_state_frequency(self) -> None:
        """|+> gives 0 on half of 10^5 shots, within 1%."""
        plus = apply_gate(StateVector.zero(1), Gate("H", (0,)))
        samples = sample_bitstrings(plus, 100_000, seed=5)
        assert 0.49 <= np.mean(samples[:, 0] == 0) <= 0.51

    def test_empirical_distribution_matches_amplitudes(self, rng) -> None:
        """10^6 shots of a random 3-qubit state are within 5e-3 total variation of |amps|^2."""
        state = random_state(3, rng)
        samples = sample_bitstrings(state, 1_000_000, seed=6)
        indices = samples.astype(np.int64) @ np.array([4, 2, 1])
        empirical = np.bincount(indices, minlength=8) / samples.shape[0]
        assert 0.5 * np.abs(empirical - state.probabilities()).sum() < 5e-3

    def test_shots_must_be_positive(self) -> None:
        """Zero shots is a precondition violation."""
        with pytest.raises(ValueError, match="shots"):
            sample_bitstrings(StateVector.zero(1), 0, seed=0)

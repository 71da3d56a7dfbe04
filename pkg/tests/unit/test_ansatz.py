"""
Unit tests for the ansatz builders and the circuit representation.
"""

import numpy as np
import pytest

from vps.ansatz import (
    BUILDERS,
    CircuitIR,
    build_hea,
    build_hea_postselect,
    build_su2_ansatz,
    build_su2_ladder,
    build_thermal_ansatz,
    build_u1_ansatz,
)
from vps.hamiltonian import build_number_operator, build_total_spin_squared
from vps.statevec import SINGLET, Gate, expectation, post_select


def _random_params(circuit: CircuitIR, rng) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, circuit.n_params)


class TestParameterCounts:
    """Slot allocation of every builder."""

    def test_hea(self) -> None:
        """Two slots per qubit per block, three with the extra Ry layer."""
        assert build_hea(4, 3).n_params == 24
        assert build_hea(4, 3, extra_ry=True).n_params == 36

    def test_hea_postselect_on_twelve_sites(self) -> None:
        """P (2n + 1) block slots plus three for V(phi)."""
        circuit = build_hea_postselect(12, 2)
        assert circuit.n_params == 53
        assert circuit.n_ancilla_params == 3
        assert circuit.post_selection.wires == (12,)

    def test_su2(self) -> None:
        """One Rswap per system wire plus one on the ancilla pair, per block."""
        circuit = build_su2_ansatz(4, 2)
        assert circuit.n_params == 10
        assert circuit.n_qubits == 6
        assert circuit.post_selection.describe() == "singlet"

    def test_su2_variants(self) -> None:
        """Symmetry-breaking selection and the unselected ancilla pair."""
        assert build_su2_ansatz(4, 1, symmetric_sel=False).post_selection.describe() == "11"
        assert build_su2_ansatz(4, 1, post_select=False).post_selection is None

    def test_su2_ladder(self) -> None:
        """A ring of Rswap per block; a single bond for two sites."""
        assert build_su2_ladder(4, 2).n_params == 8
        assert build_su2_ladder(2, 3).n_params == 3

    def test_u1(self) -> None:
        """Swap ladder, Rzz ladder and Rz layer, plus ancilla couplings."""
        assert build_u1_ansatz(4, 2, electrons=2).n_params == 2 * (3 + 3 + 4)
        with_anc = build_u1_ansatz(4, 2, electrons=2, with_ancilla=True)
        assert with_anc.n_params == 2 * (3 + 3 + 4 + 4) + 1
        assert with_anc.n_ancilla_params == 1

    def test_thermal_wire_roles(self) -> None:
        """System on even wires, ancillas on odd wires."""
        circuit = build_thermal_ansatz(4, 2)
        assert circuit.system_wires == (0, 2, 4, 6)
        assert circuit.ancilla_wires == (1, 3, 5, 7)
        assert circuit.post_selection is None
        assert circuit.n_params == 32

    def test_registry_names(self) -> None:
        """Config files refer to builders by these names."""
        assert set(BUILDERS) == {"hea", "hea_postselect", "su2", "su2_ladder", "u1", "thermal"}


class TestPreconditions:
    """Builder and circuit validation."""

    @pytest.mark.parametrize(
        "build, message",
        [
            (lambda: build_hea(1, 1), "n >= 2"),
            (lambda: build_hea(3, 0), "at least 1"),
            (lambda: build_su2_ansatz(3, 1), "even n_sys"),
            (lambda: build_u1_ansatz(4, 1, electrons=0), "electrons"),
            (lambda: build_thermal_ansatz(1, 1), "n_sys >= 2"),
        ],
    )
    def test_invalid_arguments(self, build, message: str) -> None:
        """Out-of-range sizes raise ValueError naming the argument."""
        with pytest.raises(ValueError, match=message):
            build()

    def test_unused_slot_rejected(self) -> None:
        """Every slot must be referenced by a gate."""
        with pytest.raises(ValueError, match="never used"):
            CircuitIR(n_qubits=1, gates=(Gate("Rx", (0,), (0,)),), n_params=2, system_wires=(0,))

    def test_post_selection_only_on_ancillas(self) -> None:
        """System wires cannot be post-selected."""
        from vps.statevec import PostSelection

        with pytest.raises(ValueError, match="ancilla wires only"):
            CircuitIR(
                n_qubits=2,
                gates=(Gate("H", (0,)),),
                n_params=0,
                system_wires=(0,),
                ancilla_wires=(1,),
                post_selection=PostSelection.bitstring((0,), "0"),
            )

    def test_wires_must_be_covered(self) -> None:
        """System and ancilla wires partition the register."""
        with pytest.raises(ValueError, match="cover every wire"):
            CircuitIR(n_qubits=2, gates=(), n_params=0, system_wires=(0,))


class TestSimulation:
    """Initial states and evolution."""

    def test_singlet_initial_state(self) -> None:
        """A two-site ladder with zero angles outputs the singlet."""
        circuit = build_su2_ladder(2, 1)
        np.testing.assert_allclose(circuit.initial_tensor().reshape(-1), SINGLET, atol=1e-15)

    def test_basis_batch_gives_a_unitary(self, rng) -> None:
        """Evolving every basis input yields the circuit unitary."""
        circuit = build_hea(3, 1, extra_ry=True)
        u = circuit.run(_random_params(circuit, rng), basis_batch=True).reshape(8, 8)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(8), atol=1e-12)

    def test_basis_batch_matches_single_runs(self, rng) -> None:
        """Column 0 of the batched run is the ordinary output state."""
        circuit = build_hea(3, 2)
        params = _random_params(circuit, rng)
        batched = circuit.run(params, basis_batch=True).reshape(8, 8)
        np.testing.assert_allclose(batched[:, 0], circuit.run(params).reshape(-1), atol=1e-12)

    def test_wrong_parameter_length_rejected(self) -> None:
        """The parameter vector must match the slot count."""
        with pytest.raises(ValueError, match="expected 8 circuit parameters"):
            build_hea(2, 2).run(np.zeros(3))

    def test_su2_state_is_a_total_singlet(self, rng) -> None:
        """Before selection J_tot^2 vanishes on system plus ancillas."""
        circuit = build_su2_ansatz(4, 2)
        j2 = build_total_spin_squared(circuit.n_qubits)
        for _ in range(5):
            state = circuit.simulate(_random_params(circuit, rng))
            assert abs(expectation(state, j2)) < 1e-8

    def test_su2_selected_state_keeps_zero_spin(self, rng) -> None:
        """Singlet selection leaves a singlet on the system."""
        circuit = build_su2_ansatz(4, 2)
        state, _ = post_select(circuit.simulate(_random_params(circuit, rng)), circuit.post_selection)
        assert abs(expectation(state, build_total_spin_squared(4))) < 1e-8

    def test_u1_conserves_particle_number(self, rng) -> None:
        """Sum of Z over every wire stays at its Hartree-Fock value."""
        circuit = build_u1_ansatz(4, 2, electrons=2, with_ancilla=True)
        number = build_number_operator(circuit.n_qubits)
        for _ in range(5):
            state = circuit.simulate(_random_params(circuit, rng))
            assert expectation(state, number) == pytest.approx(5 - 2 * 2, abs=1e-9)


class TestDescriptions:
    """Text form and gate statistics."""

    def test_describe_header_and_selection(self) -> None:
        """The text form lists wires, gates with slots and the selection."""
        text = build_hea_postselect(2, 1).describe()
        lines = text.splitlines()
        assert lines[:4] == ["circuit hea_postselect", "qubits 3 params 8", "system 0 1", "ancilla 2"]
        assert "Rzz 0 2 : 0" in lines
        assert "SU2 2 : 5 6 7" in lines
        assert lines[-1] == "postselect 2 -> 0"

    def test_describe_lists_singlet_pairs(self) -> None:
        """Singlet initial pairs appear before the gates."""
        assert "init singlet 0 1" in build_su2_ladder(2, 1).describe()

    def test_gate_counts_on_a_ring(self) -> None:
        """Nearest-neighbour rings need no routing."""
        counts = build_hea(4, 1).gate_counts()
        assert counts["H"] == 4
        assert counts["Rzz"] == 4
        assert counts["Rx"] == 4
        assert counts["two_qubit"] == 4
        assert counts["ring_routed_two_qubit"] == 4
        assert counts["ring_merged_two_qubit"] == 4

    def test_all_to_one_sweep_routing(self) -> None:
        """Distant couplings cost extra SWAPs unless merged into the sweep."""
        counts = build_hea_postselect(4, 1).gate_counts()
        assert counts["two_qubit"] == 4
        assert counts["ring_routed_two_qubit"] == 1 + 3 + 3 + 1
        assert counts["ring_merged_two_qubit"] == 4

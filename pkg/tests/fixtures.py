"""
Test fixtures and utilities for vps tests.

Seeded random states and density matrices plus brute-force dense oracles
(Kronecker products, matrix exponentials) that the package code is checked
against.
"""

from functools import reduce
from itertools import product
from typing import Optional

import numpy as np
import pytest
import scipy.linalg

from vps.hamiltonian import PauliString, PauliSum, build_tfim
from vps.optimize import OptimizerConfig
from vps.statevec import DensityMatrix, StateVector

PAULI_MATRICES = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    amps = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector(amps / np.linalg.norm(amps), n_qubits)


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    dim = 1 << n_qubits
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    mat = g @ g.conj().T
    return DensityMatrix(mat / np.trace(mat).real, n_qubits)


def random_pauli_sum(n_qubits: int, rng: np.random.Generator, n_terms: int = 8) -> PauliSum:
    terms = []
    for _ in range(n_terms):
        axes = rng.choice(["I", "X", "Y", "Z"], size=n_qubits)
        ops = tuple((q, str(a)) for q, a in enumerate(axes) if a != "I")
        terms.append((float(rng.normal()), PauliString(ops, n_qubits)))
    return PauliSum(terms, n_qubits)


def kron_pauli(string: PauliString) -> np.ndarray:
    """Dense matrix of a Pauli string, qubit 0 as the leftmost factor."""
    factors = [PAULI_MATRICES[string.axis_on(q) or "I"] for q in range(string.n_qubits)]
    return reduce(np.kron, factors)


def kron_hamiltonian(h: PauliSum) -> np.ndarray:
    return sum(coeff * kron_pauli(string) for coeff, string in h)


def pauli_sum_from_dense(mat: np.ndarray, n_qubits: int) -> PauliSum:
    """Expand a Hermitian matrix in the Pauli basis, c_P = Tr(P M) / 2^n."""
    terms = []
    for axes in product("IXYZ", repeat=n_qubits):
        string = PauliString(tuple((q, a) for q, a in enumerate(axes) if a != "I"), n_qubits)
        coeff = np.trace(kron_pauli(string) @ mat).real / (1 << n_qubits)
        if abs(coeff) > 1e-14:
            terms.append((float(coeff), string))
    return PauliSum(terms, n_qubits)


def brute_force_gibbs(h: PauliSum, beta: float) -> np.ndarray:
    rho = scipy.linalg.expm(-beta * kron_hamiltonian(h))
    return rho / np.trace(rho)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def tfim_chain() -> PauliSum:
    """Periodic 4-site transverse-field Ising chain."""
    return build_tfim(1, 4, periodic=True, one_dimensional=True)


@pytest.fixture
def quick_optimizer() -> OptimizerConfig:
    """Short schedule for tests that only need the plumbing to run."""
    return OptimizerConfig(max_steps=40, early_stop_steps=10, converge_count=5, trials=3, seed=11)

"""
Dense Hermitian eigendecomposition and exact-diagonalization oracles.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import scipy.linalg

from .errors import CapacityError
from .hamiltonian import PauliSum

logger = logging.getLogger(__name__)

MAX_DIM = 4096
MAX_DENSE_QUBITS = 12
HERMITIAN_TOL = 1e-8


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.apply_function(lambda x: x)

    def apply_function(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """V diag(fn(eigenvalues)) V^dagger."""
        v = self.eigenvectors
        return (v * fn(self.eigenvalues)) @ v.conj().T


def check_hermitian(mat: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    """
    Raises:
        ValueError: Not square or not Hermitian within ``tol`` (relative to max |entry|).
    """
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
    deviation = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    if deviation > tol * scale:
        raise ValueError(f"matrix is not Hermitian (max deviation {deviation:.3e})")


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made real and positive
    pivots = np.argmax(np.abs(vectors), axis=0)
    entries = vectors[pivots, np.arange(vectors.shape[1])]
    return vectors * (np.abs(entries) / entries)


def eigh(mat: np.ndarray) -> EigenDecomposition:
    """
    Full eigendecomposition of a Hermitian matrix.

    Real-valued input takes the real symmetric LAPACK path. Eigenvector phases
    are normalized so the output is deterministic.

    Raises:
        ValueError: Input is not Hermitian.
        CapacityError: Dimension above 4096.
    """
    mat = np.asarray(mat)
    check_hermitian(mat)
    if mat.shape[0] > MAX_DIM:
        raise CapacityError(f"dense eigensolve of dimension {mat.shape[0]} exceeds {MAX_DIM}")
    sym = 0.5 * (mat + mat.conj().T)
    if np.iscomplexobj(sym) and not np.any(sym.imag):
        sym = sym.real
    values, vectors = scipy.linalg.eigh(sym)
    vectors = _fix_phases(vectors.astype(np.complex128))
    return EigenDecomposition(values, vectors)


def dense_hamiltonian(h: PauliSum) -> np.ndarray:
    if h.n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(f"dense Hamiltonian on {h.n_qubits} qubits exceeds {MAX_DENSE_QUBITS}")
    return h.to_dense()


def spectrum(h: PauliSum) -> EigenDecomposition:
    return eigh(dense_hamiltonian(h))


def ground_energy(h: PauliSum) -> float:
    """Smallest eigenvalue of the dense Hamiltonian."""
    mat = dense_hamiltonian(h)
    check_hermitian(mat)
    if not np.any(mat.imag):
        mat = mat.real
    value = scipy.linalg.eigh(mat, eigvals_only=True, subset_by_index=[0, 0])[0]
    logger.debug(f"ground energy {value:.10f} on {h.n_qubits} qubits")
    return float(value)


def ground_state(h: PauliSum) -> Tuple[float, np.ndarray]:
    decomposition = spectrum(h)
    return float(decomposition.eigenvalues[0]), decomposition.eigenvectors[:, 0]

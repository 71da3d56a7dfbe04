"""
Thermal-state assembly, estimators, distances and exact oracles.

The circuit output is viewed as a matrix Psi with system wires on the rows
and ancilla wires on the columns; column m is the (unnormalized) system
state conditioned on ancilla outcome m. Reweighting builds
rho = Psi diag(f) Psi^dagger / Tr(...).
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .ansatz import CircuitIR
from .eigensolver import MAX_DENSE_QUBITS, EigenDecomposition, eigh, spectrum
from .errors import CapacityError, InvalidStateError
from .hamiltonian import PauliString, PauliSum
from .neural import Reweighter, classical_entropy
from .statevec import DensityMatrix, Gate, indices_from_bits

logger = logging.getLogger(__name__)

DEFAULT_CORRELATIONS = ("Z1 Z2", "X3", "Z0 Z7")
SCHEMES = ("bounded", "unbounded", "plain", "preprocessing")


@dataclass
class ThermalOracleResult:
    """
    Exact thermal state in the energy eigenbasis.

    Attributes:
        rho: The state.
        energies: Ascending eigenvalues of H.
        distribution: Weight of each eigenstate.
        free_energy: The minimized free energy.
        ebar: Renyi-2 cutoff parameter (Renyi oracle only).
    """

    rho: DensityMatrix
    energies: np.ndarray
    distribution: np.ndarray
    free_energy: float
    ebar: Optional[float] = None


# --- assembly -----------------------------------------------------------------


def _split_order(circuit: CircuitIR) -> List[int]:
    return list(circuit.system_wires) + list(circuit.ancilla_wires)


def system_ancilla_matrix(circuit: CircuitIR, tensor: np.ndarray) -> np.ndarray:
    """Psi with rows over system wires and columns over ancilla wires (both ascending)."""
    order = _split_order(circuit)
    moved = np.transpose(tensor, order)
    return moved.reshape(1 << circuit.n_system, 1 << circuit.n_ancilla)


def tensor_from_system_ancilla(circuit: CircuitIR, mat: np.ndarray) -> np.ndarray:
    order = _split_order(circuit)
    moved = mat.reshape((2,) * circuit.n_qubits)
    return np.transpose(moved, np.argsort(order))


def weighted_mixture(psi: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, float]:
    """Unnormalized Psi diag(w) Psi^dagger and its trace."""
    sigma = (psi * weights) @ psi.conj().T
    trace = float(np.real(np.trace(sigma)))
    return sigma, trace


def uniform_weights(n_ancilla: int) -> np.ndarray:
    return np.full(1 << n_ancilla, 1.0 / (1 << n_ancilla))


def _check_thermal(circuit: CircuitIR) -> None:
    if not circuit.ancilla_wires:
        raise ValueError(f"circuit {circuit.name!r} has no ancilla wires to reweight")
    if circuit.post_selection is not None:
        raise ValueError(f"circuit {circuit.name!r} post-selects; thermal assembly reweights instead")


def assemble_mixed_state(
    circuit: CircuitIR, params: np.ndarray, r: Optional[Reweighter] = None
) -> DensityMatrix:
    """
    Mixed state on the system wires from a reweighted circuit output.

    Args:
        circuit: Thermal ansatz (ancilla wires, no post-selection).
        params: Circuit slot values.
        r: Reweighting network over the ancilla wires; uniform weights when None.

    Returns:
        rho_ij proportional to sum_m psi_im f(m) psi*_jm, normalized to unit trace.
    """
    _check_thermal(circuit)
    psi = system_ancilla_matrix(circuit, circuit.run(params))
    if r is None:
        weights = uniform_weights(circuit.n_ancilla)
    else:
        if r.n_inputs != circuit.n_ancilla:
            raise ValueError(f"reweighter takes {r.n_inputs} bits, circuit has {circuit.n_ancilla} ancillas")
        weights = r.forward().probs
    sigma, trace = weighted_mixture(psi, weights)
    if trace <= 0:
        raise InvalidStateError("reweighted state has zero trace")
    return DensityMatrix(sigma / trace, circuit.n_system)


# --- shot-based estimation ----------------------------------------------------


def _measurement_axes(observable: PauliSum) -> Dict[int, str]:
    axes: Dict[int, str] = {}
    for _, string in observable:
        for qubit, axis in string.ops:
            if axes.setdefault(qubit, axis) != axis:
                raise ValueError(f"observable mixes bases on qubit {qubit}; measure its terms separately")
    return axes


def measurement_circuit(circuit: CircuitIR, observable: PauliSum) -> Tuple[CircuitIR, np.ndarray]:
    """
    Append the basis rotations that turn ``observable`` into a Z-basis readout.

    X qubits get a Hadamard, Y qubits get Rx(-pi/4) (Rx(t) = e^{itX}). Qubit k of
    the observable is the k-th system wire.

    Returns:
        (rotated circuit, values of the slots it appends)
    """
    if observable.n_qubits != circuit.n_system:
        raise ValueError(f"observable on {observable.n_qubits} qubits, circuit has {circuit.n_system}")
    gates = list(circuit.gates)
    extra = []
    slot = circuit.n_params
    for qubit, axis in sorted(_measurement_axes(observable).items()):
        wire = circuit.system_wires[qubit]
        if axis == "X":
            gates.append(Gate("H", (wire,)))
        elif axis == "Y":
            gates.append(Gate("Rx", (wire,), (slot,)))
            extra.append(-np.pi / 4)
            slot += 1
    rotated = CircuitIR(
        n_qubits=circuit.n_qubits,
        gates=tuple(gates),
        n_params=slot,
        system_wires=circuit.system_wires,
        ancilla_wires=circuit.ancilla_wires,
        post_selection=circuit.post_selection,
        init_pairs=circuit.init_pairs,
        n_ancilla_params=0,
        name=f"{circuit.name}+readout",
    )
    return rotated, np.array(extra, dtype=np.float64)


def diagonal_values(observable: PauliSum, bits: np.ndarray) -> np.ndarray:
    """C(s) for each row of system bits once every term is read out in Z."""
    signs = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
    total = np.zeros(bits.shape[0])
    for coeff, string in observable:
        term = np.full(bits.shape[0], coeff)
        for qubit in string.support:
            term *= signs[:, qubit]
        total += term
    return total


def reweighted_correlation(
    samples: np.ndarray,
    observable: PauliSum,
    system_wires: Sequence[int],
    ancilla_wires: Sequence[int],
    r: Optional[Reweighter] = None,
) -> float:
    """
    Reweighted estimator <f(a) C(s)> / <f(a)> over a sample set.

    Args:
        samples: uint8 array (shots, n_wires) drawn after the readout rotations.
        observable: Observable on the system qubits, evaluable in one basis.
        system_wires: Sample columns holding system qubits, in qubit order.
        ancilla_wires: Sample columns holding the reweighter input bits.
        r: Reweighting network; every sample weighs the same when None.

    Raises:
        InvalidStateError: Weights sum to zero.
    """
    samples = np.atleast_2d(samples)
    _measurement_axes(observable)
    values = diagonal_values(observable, samples[:, list(system_wires)])
    if r is None:
        weights = np.ones(samples.shape[0])
    else:
        f = r.forward().probs
        weights = f[indices_from_bits(samples[:, list(ancilla_wires)])]
    norm = weights.sum()
    if norm <= 0:
        raise InvalidStateError("reweighting weights sum to zero")
    return float(np.dot(weights, values) / norm)


def correlation_observables(n_sys: int, labels: Sequence[str] = DEFAULT_CORRELATIONS) -> Dict[str, PauliSum]:
    """Observables from ``labels`` whose qubits fit an n_sys register."""
    result = {}
    for label in labels:
        ops = {int(tok[1:]): tok[0] for tok in label.split()}
        if max(ops) < n_sys:
            result[label] = PauliSum([(1.0, PauliString.from_mapping(ops, n_sys))], n_sys)
    return result


# --- distances ----------------------------------------------------------------


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    return eigh(mat).apply_function(lambda x: np.sqrt(np.clip(x, 0.0, None)))


def _check_pair(rho: DensityMatrix, sigma: DensityMatrix) -> None:
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")


def fidelity(rho: DensityMatrix, rho0: DensityMatrix) -> float:
    """(Tr sqrt(sqrt(rho0) rho sqrt(rho0)))^2 with eigenvalues clamped at zero."""
    _check_pair(rho, rho0)
    root = _psd_sqrt(rho0.mat)
    inner = eigh(root @ rho.mat @ root).eigenvalues
    value = float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)
    return min(value, 1.0 + 1e-8)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    _check_pair(rho, sigma)
    return float(0.5 * np.sum(np.abs(eigh(rho.mat - sigma.mat).eigenvalues)))


# --- exact oracles ------------------------------------------------------------


def _diagonal_state(decomposition: EigenDecomposition, weights: np.ndarray, n_qubits: int) -> DensityMatrix:
    v = decomposition.eigenvectors
    mat = (v * weights) @ v.conj().T
    return DensityMatrix(0.5 * (mat + mat.conj().T), n_qubits)


def _check_oracle(h: PauliSum, beta: float) -> None:
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if h.n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(f"thermal oracle on {h.n_qubits} qubits exceeds {MAX_DENSE_QUBITS}")


def exact_gibbs(h: PauliSum, beta: float) -> DensityMatrix:
    return exact_gibbs_result(h, beta).rho


def exact_gibbs_result(h: PauliSum, beta: float) -> ThermalOracleResult:
    """e^{-beta H} / Z, shifted by the ground energy to avoid overflow."""
    _check_oracle(h, beta)
    decomposition = spectrum(h)
    energies = decomposition.eigenvalues
    boltzmann = np.exp(-beta * (energies - energies[0]))
    p = boltzmann / boltzmann.sum()
    free = float(np.dot(p, energies) + np.dot(p, np.log(np.clip(p, 1e-300, None))) / beta)
    return ThermalOracleResult(_diagonal_state(decomposition, p, h.n_qubits), energies, p, free)


def renyi2_distribution(energies: np.ndarray, beta: float, ebar: float) -> np.ndarray:
    """Normalized max(0, 1 - beta/2 (E_i - ebar)); zero vector if every weight vanishes."""
    w = np.clip(1.0 - 0.5 * beta * (energies - ebar), 0.0, None)
    total = w.sum()
    return w / total if total > 0 else w


def renyi2_value(energies: np.ndarray, p: np.ndarray, beta: float) -> float:
    purity = float(np.dot(p, p))
    if purity <= 0:
        return np.inf
    return float(np.dot(p, energies) + np.log(purity) / beta)


def exact_renyi2(h: PauliSum, beta: float) -> ThermalOracleResult:
    """
    Minimizer of Tr(H rho) + ln Tr(rho^2) / beta.

    The minimizer is diagonal in the eigenbasis with a linear profile cut at
    zero; ebar is found by scanning the kinks E_i - 2/beta (where a weight
    switches on) and refining on the segments next to the best kink.
    """
    _check_oracle(h, beta)
    decomposition = spectrum(h)
    energies = decomposition.eigenvalues

    def objective(ebar: float) -> float:
        return renyi2_value(energies, renyi2_distribution(energies, beta, ebar), beta)

    shift = 2.0 / beta
    lower = energies[0] - shift
    upper = energies[-1]
    # the first kink is the open end of the domain: no weight is on yet
    kinks = np.unique(energies - shift)[1:]
    candidates = np.unique(np.concatenate([kinks[kinks < upper], [upper]]))
    values = np.array([objective(c) for c in candidates])
    best = int(np.argmin(values))
    ebar, value = float(candidates[best]), float(values[best])

    eps = 1e-12 * max(1.0, abs(lower))
    left = candidates[best - 1] if best > 0 else lower + eps
    right = candidates[best + 1] if best + 1 < len(candidates) else candidates[best]
    for a, b in ((left, candidates[best]), (candidates[best], right)):
        if b - a <= 0:
            continue
        res = minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
        if res.fun < value:
            ebar, value = float(res.x), float(res.fun)

    p = renyi2_distribution(energies, beta, ebar)
    logger.debug(f"renyi2 oracle beta={beta}: ebar={ebar:.8f}, F2={value:.10f}")
    return ThermalOracleResult(_diagonal_state(decomposition, p, h.n_qubits), energies, p, value, ebar)


# --- pre-processing baseline --------------------------------------------------


def preprocessing_baseline(
    circuit: CircuitIR, params: np.ndarray, model: Reweighter, h: PauliSum, beta: float
) -> Tuple[DensityMatrix, float]:
    """
    rho = sum_s P(s) U|s><s|U^dagger and its Gibbs free energy.

    Every basis input is evolved through the same unitary, so the branches
    stay orthonormal and the von Neumann entropy equals the classical entropy
    of P.
    """
    if circuit.ancilla_wires:
        raise ValueError("pre-processing baseline takes a circuit without ancilla wires")
    if model.n_inputs != circuit.n_qubits:
        raise ValueError(f"model samples {model.n_inputs} bits, circuit has {circuit.n_qubits} wires")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    unitary = circuit.run(params, basis_batch=True).reshape(1 << circuit.n_qubits, -1)
    probs = model.forward().probs
    rho = DensityMatrix((unitary * probs) @ unitary.conj().T, circuit.n_qubits)
    free = rho.expectation(h) - classical_entropy(probs) / beta
    return rho, float(free)


# --- checkpoints --------------------------------------------------------------

_HEADER = struct.Struct("<Q")


def save_density_matrix(path: Union[str, Path], rho: DensityMatrix) -> Path:
    """Write a uint64 dimension header then row-major little-endian complex128 entries."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(rho.dim))
        fh.write(np.ascontiguousarray(rho.mat, dtype="<c16").tobytes())
    return path


def load_density_matrix(path: Union[str, Path]) -> DensityMatrix:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidStateError(f"{path}: truncated density-matrix header")
    (dim,) = _HEADER.unpack_from(data)
    n_qubits = int(dim).bit_length() - 1
    if dim < 2 or 1 << n_qubits != dim:
        raise InvalidStateError(f"{path}: dimension {dim} is not a power of two")
    body = data[_HEADER.size:]
    if len(body) != dim * dim * 16:
        raise InvalidStateError(f"{path}: expected {dim * dim * 16} bytes of entries, found {len(body)}")
    mat = np.frombuffer(body, dtype="<c16").reshape(dim, dim).astype(np.complex128)
    return DensityMatrix(mat, n_qubits)

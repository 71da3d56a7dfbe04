"""
Scalar losses and their differentiable circuit objectives.

The free functions evaluate a loss from already-computed quantities (an
energy and a success probability, or a density matrix). The objective
classes wrap a circuit and evaluate the same losses together with exact
gradients for the optimizer.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from .ansatz import CircuitIR
from .autodiff import Evaluation, SlotRange, backpropagate, circuit_layout
from .eigensolver import eigh
from .errors import DegenerateProjectionError, InvalidStateError
from .hamiltonian import PauliSum
from .neural import Reweighter, classical_entropy
from .statevec import DensityMatrix, expectation, post_select, project
from .thermal import (
    system_ancilla_matrix,
    tensor_from_system_ancilla,
    uniform_weights,
    weighted_mixture,
)

logger = logging.getLogger(__name__)

KINDS = ("energy", "obj1", "obj2", "renyi2", "truncated_gibbs", "gibbs_exact")
PENALTY_KINDS = ("obj1", "obj2")
THERMAL_KINDS = ("renyi2", "truncated_gibbs", "gibbs_exact")
DEFAULT_P0 = 0.78
GRADIENT_PROB_FLOOR = 1e-10
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class ObjectiveSpec:
    """
    Which loss to minimize and its hyperparameters.

    Attributes:
        kind: One of KINDS.
        h: Observable on the system qubits.
        beta: Inverse temperature (thermal kinds).
        lam: Penalty weight on the success probability (obj1, obj2).
        p0: Sigmoid offset (obj2).
    """

    kind: str
    h: PauliSum
    beta: Optional[float] = None
    lam: Optional[float] = None
    p0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}, expected one of {KINDS}")
        if self.kind in THERMAL_KINDS and (self.beta is None or self.beta <= 0):
            raise ValueError(f"{self.kind} needs beta > 0, got {self.beta}")
        if self.kind in PENALTY_KINDS and (self.lam is None or self.lam < 0):
            raise ValueError(f"{self.kind} needs lambda >= 0, got {self.lam}")
        if self.kind == "obj2" and (self.p0 is None or not 0 < self.p0 < 1):
            raise ValueError(f"obj2 needs p0 in (0, 1), got {self.p0}")

    @property
    def is_thermal(self) -> bool:
        return self.kind in THERMAL_KINDS


# --- loss formulas ------------------------------------------------------------


def obj1(value: float, success_prob: float, lam: float) -> float:
    """Energy minus a linear reward for the success probability."""
    return value - lam * success_prob


def obj2(value: float, success_prob: float, lam: float, p0: float = DEFAULT_P0) -> float:
    """Energy minus a sigmoid-filtered reward centred at p0."""
    return value - lam * float(expit(success_prob - p0))


def _moments(rho: DensityMatrix, h: PauliSum, beta: float) -> Tuple[float, float]:
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    trace = np.trace(rho.mat).real
    if abs(trace - 1.0) > 1e-8:
        raise InvalidStateError(f"density matrix trace is {trace}, expected 1")
    return rho.expectation(h), rho.purity()


def renyi2_entropy(rho: DensityMatrix) -> float:
    purity = rho.purity()
    if purity <= 0:
        raise InvalidStateError(f"Tr(rho^2) = {purity} is not positive")
    return float(-np.log(purity))


def truncated_entropy(rho: DensityMatrix) -> float:
    """(1 - Tr rho^2) + (1 - 2 Tr rho^2 + Tr rho^3) / 2."""
    p2 = rho.purity()
    p3 = float(np.real(np.trace(rho.mat @ rho.mat @ rho.mat)))
    return (1.0 - p2) + 0.5 * (1.0 - 2.0 * p2 + p3)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-Tr rho ln rho with 0 ln 0 = 0; eigenvalues below -1e-8 are rejected."""
    values = eigh(rho.mat).eigenvalues
    if values[0] < -1e-8:
        raise InvalidStateError(f"density matrix has eigenvalue {values[0]:.3e}")
    return classical_entropy(np.clip(values, 0.0, None))


def renyi2_free_energy(rho: DensityMatrix, h: PauliSum, beta: float) -> float:
    energy, purity = _moments(rho, h, beta)
    if purity <= 0:
        raise InvalidStateError(f"Tr(rho^2) = {purity} is not positive")
    return energy + np.log(purity) / beta


def truncated_gibbs_free_energy(rho: DensityMatrix, h: PauliSum, beta: float) -> float:
    energy, _ = _moments(rho, h, beta)
    return energy - truncated_entropy(rho) / beta


def gibbs_free_energy_exact(rho: DensityMatrix, h: PauliSum, beta: float) -> float:
    energy, _ = _moments(rho, h, beta)
    return energy - von_neumann_entropy(rho) / beta


FREE_ENERGIES = {
    "renyi2": renyi2_free_energy,
    "truncated_gibbs": truncated_gibbs_free_energy,
    "gibbs_exact": gibbs_free_energy_exact,
}


def free_energy(spec: ObjectiveSpec, rho: DensityMatrix) -> float:
    return FREE_ENERGIES[spec.kind](rho, spec.h, spec.beta)


def energy_post_selected(circuit: CircuitIR, params: np.ndarray, h: PauliSum) -> Tuple[float, float]:
    """
    Energy of the post-selected system state and the success probability.

    Circuits without a post-selection report the plain system energy with
    probability 1.

    Raises:
        DegenerateProjectionError: Success probability below 1e-12.
    """
    state = circuit.simulate(params)
    if circuit.post_selection is None:
        return expectation(state, h, circuit.system_wires), 1.0
    reduced, prob = post_select(state, circuit.post_selection)
    remaining = [w for w in range(circuit.n_qubits) if w not in circuit.post_selection.wires]
    wires = [remaining.index(w) for w in circuit.system_wires]
    return expectation(reduced, h, wires), prob


# --- differentiable objectives ------------------------------------------------


class CircuitObjective:
    """
    Base class: a loss over (circuit slots ++ optional network weights).

    Subclasses implement ``evaluate(values, with_grad=True) -> Evaluation``.
    Instances hold no mutable state and can be shared between threads.
    """

    def __init__(self, circuit: CircuitIR, spec: ObjectiveSpec, network: Optional[Reweighter] = None):
        if spec.h.n_qubits != circuit.n_system:
            raise ValueError(
                f"observable on {spec.h.n_qubits} qubits, circuit {circuit.name!r} has {circuit.n_system} system wires"
            )
        self.circuit = circuit
        self.spec = spec
        self.network = network
        self.layout: Tuple[SlotRange, ...] = circuit_layout(circuit, network.n_weights if network else 0)

    @property
    def n_values(self) -> int:
        return self.layout[-1].stop if self.layout else 0

    def split(self, values: np.ndarray) -> Tuple[np.ndarray, Optional[Reweighter]]:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_values,):
            raise ValueError(f"expected {self.n_values} values, got {values.shape}")
        theta = values[: self.circuit.n_params]
        if self.network is None:
            return theta, None
        return theta, self.network.with_flat(values[self.circuit.n_params:])

    def initial_values(self, rng: np.random.Generator, circuit_sigma: float, neural_sigma: float) -> np.ndarray:
        parts = [rng.normal(0.0, circuit_sigma, self.circuit.n_params)]
        if self.network is not None:
            parts.append(rng.normal(0.0, neural_sigma, self.network.n_weights))
        return np.concatenate(parts)

    def __call__(self, values: np.ndarray) -> float:
        return self.evaluate(values, with_grad=False).value

    def evaluate(self, values: np.ndarray, with_grad: bool = True) -> Evaluation:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.circuit.name}, {self.spec.kind})"


class PostSelectedEnergy(CircuitObjective):
    """
    energy / obj1 / obj2 on the post-selected system state.

    With phi the projected (unnormalized) state and omega = <phi|phi>, the
    energy is E = <phi|H|phi> / omega and the loss is L(E, omega).
    """

    def __init__(self, circuit: CircuitIR, spec: ObjectiveSpec):
        if spec.is_thermal:
            raise ValueError(f"{spec.kind} is a mixed-state objective")
        super().__init__(circuit, spec)
        sel = circuit.post_selection
        selected = sel.wires if sel is not None else ()
        self._remaining = [w for w in range(circuit.n_qubits) if w not in selected]
        positions = [self._remaining.index(w) for w in circuit.system_wires]
        self._h = spec.h.embed(positions, len(self._remaining))

    def _loss_terms(self, energy: float, prob: float) -> Tuple[float, float]:
        """Loss value and dL/domega (dL/dE is 1 for every kind)."""
        spec = self.spec
        if spec.kind == "obj1":
            return obj1(energy, prob, spec.lam), -spec.lam
        if spec.kind == "obj2":
            s = float(expit(prob - spec.p0))
            return energy - spec.lam * s, -spec.lam * s * (1.0 - s)
        return energy, 0.0

    def evaluate(self, values: np.ndarray, with_grad: bool = True) -> Evaluation:
        theta, _ = self.split(values)
        tensor = self.circuit.run(theta)
        sel = self.circuit.post_selection
        if sel is None:
            phi, target = tensor.reshape(-1), None
        else:
            phi_tensor, _ = project(tensor, sel)
            phi, target = phi_tensor.reshape(-1), sel.target
        prob = float(np.real(np.vdot(phi, phi)))
        if prob < GRADIENT_PROB_FLOOR:
            raise DegenerateProjectionError(prob, GRADIENT_PROB_FLOOR)
        h_phi = self._h.apply(phi)
        energy = float(np.real(np.vdot(phi, h_phi))) / prob
        value, dl_dprob = self._loss_terms(energy, prob)
        result = Evaluation(value, energy=energy, success_prob=prob)
        if not with_grad:
            return result

        lam_phi = (h_phi - energy * phi) / prob + dl_dprob * phi
        if target is None:
            lam = lam_phi.reshape(tensor.shape)
        else:
            k = len(sel.wires)
            # phi = M conj(t) with M the tensor reshaped to (remaining, selected)
            lam_moved = np.outer(lam_phi, target).reshape((2,) * (tensor.ndim - k) + (2,) * k)
            order = self._remaining + list(sel.wires)
            lam = np.transpose(lam_moved, np.argsort(order))
        result.grad = backpropagate(self.circuit, theta, tensor, lam)
        return result


class MixedStateFreeEnergy(CircuitObjective):
    """
    Renyi-2, truncated-Gibbs or exact-Gibbs free energy of the reweighted state.

    rho = sigma / Tr(sigma) with sigma = Psi diag(f) Psi^dagger. For a loss
    with dL = Tr(G drho), the cotangent of Psi is G' Psi diag(f) and
    dL/df_m = (Psi^dagger G' Psi)_mm, where G' = (G - Tr(G rho)) / Tr(sigma).

    Without a network the weights are uniform (f constant), which reduces the
    state to the partial trace over the ancillas.
    """

    def __init__(self, circuit: CircuitIR, spec: ObjectiveSpec, network: Optional[Reweighter] = None):
        if not spec.is_thermal:
            raise ValueError(f"{spec.kind} is not a mixed-state objective")
        if not circuit.ancilla_wires or circuit.post_selection is not None:
            raise ValueError(f"circuit {circuit.name!r} must carry unselected ancilla wires")
        if network is not None and network.n_inputs != circuit.n_ancilla:
            raise ValueError(f"network takes {network.n_inputs} bits, circuit has {circuit.n_ancilla} ancillas")
        super().__init__(circuit, spec, network)

    def _weights(self, network: Optional[Reweighter]):
        if network is None:
            return uniform_weights(self.circuit.n_ancilla), None
        cache = network.forward()
        return cache.probs, cache

    def density_matrix(self, values: np.ndarray) -> DensityMatrix:
        theta, network = self.split(values)
        psi = system_ancilla_matrix(self.circuit, self.circuit.run(theta))
        weights, _ = self._weights(network)
        sigma, trace = weighted_mixture(psi, weights)
        return DensityMatrix(sigma / trace, self.circuit.n_system)

    def _functional(self, rho: np.ndarray) -> Tuple[float, np.ndarray]:
        """Entropy part of the loss and its matrix derivative (the H part is added by the caller)."""
        beta = self.spec.beta
        kind = self.spec.kind
        if kind == "renyi2":
            purity = float(np.real(np.vdot(rho, rho)))
            return np.log(purity) / beta, (2.0 / beta) * rho / purity
        if kind == "truncated_gibbs":
            rho2 = rho @ rho
            p2 = float(np.real(np.trace(rho2)))
            p3 = float(np.real(np.vdot(rho, rho2)))
            s2 = 1.5 - 2.0 * p2 + 0.5 * p3
            return -s2 / beta, (4.0 * rho - 1.5 * rho2) / beta
        decomposition = eigh(rho)
        values = np.clip(decomposition.eigenvalues, LOG_FLOOR, None)
        entropy = classical_entropy(np.clip(decomposition.eigenvalues, 0.0, None))
        return -entropy / beta, decomposition.apply_function(lambda _: np.log(values) + 1.0) / beta

    def evaluate(self, values: np.ndarray, with_grad: bool = True) -> Evaluation:
        theta, network = self.split(values)
        tensor = self.circuit.run(theta)
        psi = system_ancilla_matrix(self.circuit, tensor)
        weights, cache = self._weights(network)
        sigma, trace = weighted_mixture(psi, weights)
        if trace <= 0:
            raise InvalidStateError("reweighted state has zero trace")
        rho = sigma / trace
        h_rho = self.spec.h.apply(rho)
        energy = float(np.real(np.trace(h_rho)))
        entropy_part, g_entropy = self._functional(rho)
        result = Evaluation(energy + entropy_part, energy=energy, extras={"purity": float(np.real(np.vdot(rho, rho)))})
        if not with_grad:
            return result

        g_mean = energy + float(np.real(np.vdot(g_entropy, rho)))
        g_psi = (self.spec.h.apply(psi) + g_entropy @ psi - g_mean * psi) / trace
        lam = tensor_from_system_ancilla(self.circuit, g_psi * weights)
        grads = [backpropagate(self.circuit, theta, tensor, lam)]
        if network is not None:
            dweights = np.real(np.sum(psi.conj() * g_psi, axis=0))
            grads.append(network.backward(cache, dweights))
        result.grad = np.concatenate(grads)
        return result


class PreprocessingFreeEnergy(CircuitObjective):
    """
    Gibbs free energy of sum_s P(s) U|s><s|U^dagger with a trainable model P.

    The entropy is the classical entropy of P. With Psi = U (columns U|s>),
    dL/dP_s = <psi_s|H|psi_s> + (ln P_s + 1) / beta and the circuit cotangent
    is H Psi diag(P).
    """

    def __init__(self, circuit: CircuitIR, spec: ObjectiveSpec, network: Reweighter):
        if spec.kind != "gibbs_exact":
            raise ValueError("the pre-processing baseline minimizes the exact Gibbs free energy")
        if circuit.ancilla_wires or circuit.init_pairs:
            raise ValueError("the pre-processing baseline needs a plain circuit without ancillas")
        if network.n_inputs != circuit.n_qubits:
            raise ValueError(f"model samples {network.n_inputs} bits, circuit has {circuit.n_qubits} wires")
        super().__init__(circuit, spec, network)

    def density_matrix(self, values: np.ndarray) -> DensityMatrix:
        theta, network = self.split(values)
        unitary = self.circuit.run(theta, basis_batch=True).reshape(1 << self.circuit.n_qubits, -1)
        probs = network.forward().probs
        return DensityMatrix((unitary * probs) @ unitary.conj().T, self.circuit.n_qubits)

    def evaluate(self, values: np.ndarray, with_grad: bool = True) -> Evaluation:
        theta, network = self.split(values)
        tensor = self.circuit.run(theta, basis_batch=True)
        dim = 1 << self.circuit.n_qubits
        unitary = tensor.reshape(dim, dim)
        cache = network.forward()
        probs = cache.probs
        h_u = self.spec.h.apply(unitary)
        branch_energies = np.real(np.sum(unitary.conj() * h_u, axis=0))
        energy = float(np.dot(probs, branch_energies))
        entropy = classical_entropy(probs)
        beta = self.spec.beta
        result = Evaluation(energy - entropy / beta, energy=energy, extras={"entropy": entropy})
        if not with_grad:
            return result

        lam = (h_u * probs).reshape(tensor.shape)
        dprobs = branch_energies + (np.log(np.clip(probs, LOG_FLOOR, None)) + 1.0) / beta
        result.grad = np.concatenate(
            [backpropagate(self.circuit, theta, tensor, lam), network.backward(cache, dprobs)]
        )
        return result


def build_objective(
    circuit: CircuitIR, spec: ObjectiveSpec, network: Optional[Reweighter] = None, preprocessing: bool = False
) -> CircuitObjective:
    """
    Pick the differentiable objective for a circuit and loss.

    Args:
        circuit: Ansatz to train.
        spec: Loss and hyperparameters.
        network: Reweighting network (thermal) or classical model (pre-processing).
        preprocessing: Use the pre-processing baseline; requires ``network``.
    """
    if preprocessing:
        if network is None:
            raise ValueError("the pre-processing baseline needs a classical model")
        return PreprocessingFreeEnergy(circuit, spec, network)
    if spec.is_thermal:
        return MixedStateFreeEnergy(circuit, spec, network)
    if network is not None:
        raise ValueError(f"{spec.kind} takes no network")
    return PostSelectedEnergy(circuit, spec)


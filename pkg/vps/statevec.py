"""
Dense statevector simulation.

Amplitudes live in a tensor of shape (2,) * n with an optional trailing batch
axis; axis k is wire k, so wire 0 is the most significant bit of a flat basis
index. Parameterized gates follow the e^{i theta G} convention with G one of
X, Y, Z, ZZ or SWAP (all square to the identity), which keeps every
derivative a single generator insertion for the adjoint pass.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CapacityError, DegenerateProjectionError, InvalidStateError
from .hamiltonian import PauliSum

logger = logging.getLogger(__name__)

MAX_QUBITS = 20
DEGENERATE_PROB = 1e-12

GATE_KINDS = ("H", "X", "Rx", "Ry", "Rz", "Rzz", "Rswap", "SU2")
GATE_ARITY = {"H": 1, "X": 1, "Rx": 1, "Ry": 1, "Rz": 1, "Rzz": 2, "Rswap": 2, "SU2": 1}
GATE_SLOTS = {"H": 0, "X": 0, "Rx": 1, "Ry": 1, "Rz": 1, "Rzz": 1, "Rswap": 1, "SU2": 3}

_SQRT_HALF = 1.0 / np.sqrt(2.0)

FIXED_MATRICES = {
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT_HALF,
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
}

GENERATORS = {
    "Rx": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Ry": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Rz": np.diag([1, -1]).astype(np.complex128),
    "Rzz": np.diag([1, -1, -1, 1]).astype(np.complex128),
    "Rswap": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
    ),
}

SINGLET = np.array([0, 1, -1, 0], dtype=np.complex128) * _SQRT_HALF


@dataclass(frozen=True)
class Gate:
    """One gate of a circuit: kind, target wires and parameter slots."""

    kind: str
    wires: Tuple[int, ...]
    param_slots: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        object.__setattr__(self, "param_slots", tuple(int(s) for s in self.param_slots))
        if len(self.wires) != GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {GATE_ARITY[self.kind]} wire(s), got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"{self.kind} wires must be distinct, got {self.wires}")
        if len(self.param_slots) != GATE_SLOTS[self.kind]:
            raise ValueError(
                f"{self.kind} needs {GATE_SLOTS[self.kind]} parameter slot(s), got {self.param_slots}"
            )

    def primitives(self) -> List["Primitive"]:
        """Expand into single-generator steps in application order."""
        if self.kind == "SU2":
            # SU2(a, b, c) = Rz(a) Ry(b) Rz(c): Rz(c) acts first
            a, b, c = self.param_slots
            w = self.wires
            return [Primitive("Rz", w, c), Primitive("Ry", w, b), Primitive("Rz", w, a)]
        slot = self.param_slots[0] if self.param_slots else None
        return [Primitive(self.kind, self.wires, slot)]


@dataclass(frozen=True)
class Primitive:
    kind: str
    wires: Tuple[int, ...]
    slot: Optional[int]

    def matrix(self, params: np.ndarray) -> np.ndarray:
        if self.slot is None:
            return FIXED_MATRICES[self.kind]
        return rotation_matrix(self.kind, params[self.slot])

    def dagger(self, params: np.ndarray) -> np.ndarray:
        if self.slot is None:
            return FIXED_MATRICES[self.kind]
        return rotation_matrix(self.kind, -params[self.slot])

    @property
    def generator(self) -> np.ndarray:
        return GENERATORS[self.kind]


def rotation_matrix(kind: str, theta: float) -> np.ndarray:
    """e^{i theta G} = cos(theta) I + i sin(theta) G."""
    gen = GENERATORS[kind]
    return np.cos(theta) * np.eye(gen.shape[0]) + 1j * np.sin(theta) * gen


@dataclass(eq=False)
class PostSelection:
    """
    Projection of some wires onto a target state.

    The target is a normalized vector over the selected wires, first listed
    wire most significant; bitstring targets are one-hot vectors.
    """

    wires: Tuple[int, ...]
    target: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.wires = tuple(int(w) for w in self.wires)
        self.target = np.asarray(self.target, dtype=np.complex128).ravel()
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"post-selection wires must be distinct, got {self.wires}")
        if self.target.shape[0] != 1 << len(self.wires):
            raise ValueError(
                f"target has dimension {self.target.shape[0]}, expected {1 << len(self.wires)}"
            )
        if abs(np.linalg.norm(self.target) - 1.0) > 1e-12:
            raise ValueError("post-selection target must be normalized")

    @classmethod
    def bitstring(cls, wires: Sequence[int], bits: str) -> "PostSelection":
        if len(bits) != len(wires) or set(bits) - {"0", "1"}:
            raise ValueError(f"bitstring {bits!r} does not match wires {tuple(wires)}")
        target = np.zeros(1 << len(wires), dtype=np.complex128)
        target[int(bits, 2) if bits else 0] = 1.0
        return cls(tuple(wires), target, label=bits)

    @classmethod
    def singlet(cls, wires: Sequence[int]) -> "PostSelection":
        if len(wires) != 2:
            raise ValueError("singlet post-selection needs exactly two wires")
        return cls(tuple(wires), SINGLET.copy(), label="singlet")

    def describe(self) -> str:
        if self.label:
            return self.label
        return " ".join(f"{z.real!r}{z.imag:+}j" for z in self.target)


@dataclass
class StateVector:
    """Normalized amplitude vector over n qubits (flat, wire 0 most significant)."""

    amps: np.ndarray
    n_qubits: int

    def __post_init__(self):
        check_capacity(self.n_qubits)
        self.amps = np.asarray(self.amps, dtype=np.complex128).reshape(-1)
        if self.amps.shape[0] != 1 << self.n_qubits:
            raise ValueError(
                f"{self.amps.shape[0]} amplitudes do not describe {self.n_qubits} qubits"
            )

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        check_capacity(n_qubits)
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray) -> "StateVector":
        return cls(tensor.reshape(-1), tensor.ndim)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        probs = np.abs(self.amps) ** 2
        return probs / probs.sum()


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on n qubits."""

    mat: np.ndarray
    n_qubits: int
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=np.complex128)
        dim = 1 << self.n_qubits
        if self.mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.mat.shape} does not match {self.n_qubits} qubits")
        if self.validate:
            self.check()

    def check(self, hermitian_tol: float = 1e-10, trace_tol: float = 1e-8, eig_floor: float = -1e-8) -> None:
        if np.max(np.abs(self.mat - self.mat.conj().T)) > hermitian_tol:
            raise InvalidStateError("density matrix is not Hermitian")
        trace = np.trace(self.mat).real
        if abs(trace - 1.0) > trace_tol:
            raise InvalidStateError(f"density matrix trace is {trace}, expected 1")
        smallest = np.linalg.eigvalsh(self.mat)[0]
        if smallest < eig_floor:
            raise InvalidStateError(f"density matrix has eigenvalue {smallest:.3e}")

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return cls(np.outer(state.amps, state.amps.conj()), state.n_qubits)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.mat, self.mat)))

    def expectation(self, h: PauliSum) -> float:
        """Tr(H rho) via H applied to the columns of rho."""
        if h.n_qubits != self.n_qubits:
            raise ValueError(f"observable on {h.n_qubits} qubits, state on {self.n_qubits}")
        return float(np.real(np.trace(h.apply(self.mat))))


def check_capacity(n_qubits: int) -> None:
    if n_qubits < 1:
        raise ValueError(f"need at least one qubit, got {n_qubits}")
    if n_qubits > MAX_QUBITS:
        raise CapacityError(f"{n_qubits} qubits exceeds the dense simulator limit of {MAX_QUBITS}")


# --- tensor kernels -----------------------------------------------------------


def apply_matrix(tensor: np.ndarray, mat: np.ndarray, wires: Sequence[int]) -> np.ndarray:
    """Contract a 2^k x 2^k matrix into the given wire axes of a state tensor."""
    k = len(wires)
    op = mat.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(wires)))
    return np.moveaxis(out, list(range(k)), list(wires))


def apply_primitive(tensor: np.ndarray, prim: Primitive, params: np.ndarray) -> np.ndarray:
    return apply_matrix(tensor, prim.matrix(params), prim.wires)


def evolve(tensor: np.ndarray, gates: Sequence[Gate], params: np.ndarray) -> np.ndarray:
    for gate in gates:
        for prim in gate.primitives():
            tensor = apply_primitive(tensor, prim, params)
    return tensor


def _check_gate(state: StateVector, gate: Gate, params: np.ndarray) -> None:
    for w in gate.wires:
        if not 0 <= w < state.n_qubits:
            raise ValueError(f"wire {w} out of range for {state.n_qubits} qubits")
    for s in gate.param_slots:
        if not 0 <= s < len(params):
            raise ValueError(f"parameter slot {s} missing from a vector of length {len(params)}")


def apply_gate(state: StateVector, gate: Gate, params: Sequence[float] = ()) -> StateVector:
    """
    Apply one gate and return the new state.

    Raises:
        ValueError: Wire out of range or parameter slot not present.
    """
    params = np.asarray(params, dtype=np.float64)
    _check_gate(state, gate, params)
    return StateVector.from_tensor(evolve(state.tensor(), [gate], params))


def _system_matrix(tensor: np.ndarray, wires: Sequence[int]) -> np.ndarray:
    """Reshape a state tensor into (2^len(wires), rest) with wires leading."""
    rest = [w for w in range(tensor.ndim) if w not in wires]
    moved = np.transpose(tensor, list(wires) + rest)
    return moved.reshape(1 << len(wires), -1)


def expectation(state: StateVector, h: PauliSum, wires: Optional[Sequence[int]] = None) -> float:
    """
    <psi|H|psi> for an observable on all wires or on a subset.

    Args:
        state: Normalized state.
        h: Observable; when it is narrower than the state it acts on ``wires``
            (default: the leading h.n_qubits wires) and the identity elsewhere.
        wires: Wires carrying qubits 0..h.n_qubits-1 of the observable.

    Returns:
        The real expectation value.

    Raises:
        ValueError: Observable wider than the state or wire list mismatch.
    """
    if h.n_qubits > state.n_qubits:
        raise ValueError(f"observable on {h.n_qubits} qubits, state on {state.n_qubits}")
    if wires is None:
        wires = tuple(range(h.n_qubits))
    if len(wires) != h.n_qubits:
        raise ValueError(f"observable on {h.n_qubits} qubits needs as many wires, got {len(wires)}")
    psi = _system_matrix(state.tensor(), wires)
    value = np.vdot(psi, h.apply(psi))
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise InvalidStateError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def project(tensor: np.ndarray, sel: PostSelection) -> Tuple[np.ndarray, float]:
    """Unnormalized projected tensor over the remaining wires and its weight."""
    n = tensor.ndim
    for w in sel.wires:
        if not 0 <= w < n:
            raise ValueError(f"post-selection wire {w} out of range for {n} qubits")
    rest = [w for w in range(n) if w not in sel.wires]
    moved = np.transpose(tensor, rest + list(sel.wires)).reshape(1 << len(rest), -1)
    phi = moved @ sel.target.conj()
    return phi.reshape((2,) * len(rest)), float(np.real(np.vdot(phi, phi)))


def post_select(state: StateVector, sel: PostSelection) -> Tuple[StateVector, float]:
    """
    Project the selected wires onto the target and renormalize.

    Returns:
        (state on the remaining wires in ascending order, success probability)

    Raises:
        DegenerateProjectionError: success probability below 1e-12.
    """
    if not sel.wires:
        return state, 1.0
    if len(sel.wires) >= state.n_qubits:
        raise ValueError("post-selection must leave at least one wire")
    phi, prob = project(state.tensor(), sel)
    if prob < DEGENERATE_PROB:
        raise DegenerateProjectionError(prob, DEGENERATE_PROB)
    return StateVector.from_tensor(phi / np.sqrt(prob)), prob


def reduced_density_matrix(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace over every wire not in ``keep`` (kept in the given order)."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep list must not be empty")
    for w in keep:
        if not 0 <= w < state.n_qubits:
            raise ValueError(f"wire {w} out of range for {state.n_qubits} qubits")
    psi = _system_matrix(state.tensor(), keep)
    return DensityMatrix(psi @ psi.conj().T, len(keep))


def bits_from_indices(indices: np.ndarray, n_bits: int) -> np.ndarray:
    shifts = np.arange(n_bits - 1, -1, -1)
    return ((np.asarray(indices)[:, None] >> shifts) & 1).astype(np.uint8)


def indices_from_bits(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1)
    return bits @ weights


def sample_bitstrings(state: StateVector, shots: int, seed: int) -> np.ndarray:
    """
    Draw i.i.d. measurement outcomes in the computational basis.

    Returns:
        uint8 array of shape (shots, n_qubits); column k is wire k.
    """
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    rng = np.random.default_rng(seed)
    indices = rng.choice(1 << state.n_qubits, size=shots, p=state.probabilities())
    return bits_from_indices(indices, state.n_qubits)


def format_bitstrings(samples: np.ndarray) -> List[str]:
    return ["".join(map(str, row)) for row in samples]

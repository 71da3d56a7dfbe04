"""
Hamiltonians as weighted Pauli strings.

A PauliSum is the single observable representation used across the package:
lattice builders produce them, the Pauli file parser reads them, and the
simulator applies them to statevectors without materialising a matrix.

Qubit 0 is the most significant bit of a computational-basis index.

File format (one term per line, ``#`` starts a comment)::

    qubits 4            # optional header, overrides 1 + max index
    -0.5 Z0 Z1
    0.25 X2 Y3
    0.7137              # coefficient only: identity term
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import HamiltonianParseError

logger = logging.getLogger(__name__)

PAULI_AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class PauliString:
    """
    Tensor product of single-qubit Paulis, identity on unlisted qubits.

    Attributes:
        ops: (qubit, axis) pairs sorted by qubit; empty for the identity.
        n_qubits: Register width the string acts on.
    """

    ops: Tuple[Tuple[int, str], ...]
    n_qubits: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        seen = set()
        for qubit, axis in self.ops:
            if axis not in PAULI_AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")
            if not 0 <= qubit < self.n_qubits:
                raise ValueError(f"qubit {qubit} out of range for {self.n_qubits} qubits")
            if qubit in seen:
                raise ValueError(f"qubit {qubit} appears twice in one Pauli string")
            seen.add(qubit)
        object.__setattr__(self, "ops", tuple(sorted(self.ops)))

    @classmethod
    def from_mapping(cls, ops: Mapping[int, str], n_qubits: int) -> "PauliString":
        return cls(tuple((int(q), a) for q, a in ops.items()), n_qubits)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls((), n_qubits)

    @property
    def is_identity(self) -> bool:
        return not self.ops

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(q for q, _ in self.ops)

    def axis_on(self, qubit: int) -> Optional[str]:
        for q, axis in self.ops:
            if q == qubit:
                return axis
        return None

    def label(self) -> str:
        return " ".join(f"{axis}{qubit}" for qubit, axis in self.ops)

    def masks(self) -> Tuple[int, int, int]:
        """Return (x_mask, z_mask, number of Y factors) over basis indices."""
        x_mask = z_mask = n_y = 0
        for qubit, axis in self.ops:
            bit = 1 << (self.n_qubits - 1 - qubit)
            if axis in ("X", "Y"):
                x_mask |= bit
            if axis in ("Z", "Y"):
                z_mask |= bit
            if axis == "Y":
                n_y += 1
        return x_mask, z_mask, n_y

    def relabel(self, wire_map: Sequence[int], n_qubits: int) -> "PauliString":
        """Move qubit k onto wire_map[k] of an n_qubits register."""
        return PauliString(tuple((wire_map[q], a) for q, a in self.ops), n_qubits)


@lru_cache(maxsize=256)
def _term_action(x_mask: int, z_mask: int, n_y: int, n_qubits: int) -> Tuple[np.ndarray, np.ndarray]:
    # (P psi)[c] = phase[c] * psi[perm[c]]
    index = np.arange(1 << n_qubits, dtype=np.int64)
    perm = index ^ x_mask
    parity = np.bitwise_count(perm & z_mask) & 1
    phase = (1j**n_y) * (1 - 2 * parity.astype(np.float64))
    perm.setflags(write=False)
    phase.setflags(write=False)
    return perm, phase


class PauliSum:
    """
    Real-weighted sum of Pauli strings on a fixed register.

    Identical strings are merged on construction (coefficients add exactly);
    term order follows first appearance. Instances are immutable.
    """

    __slots__ = ("_terms", "_n_qubits")

    def __init__(self, terms: Iterable[Tuple[float, PauliString]], n_qubits: int):
        if n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {n_qubits}")
        merged: Dict[PauliString, float] = {}
        for coeff, string in terms:
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff} on '{string.label()}'")
            if string.n_qubits != n_qubits:
                raise ValueError(
                    f"Pauli string on {string.n_qubits} qubits added to a {n_qubits}-qubit sum"
                )
            merged[string] = merged.get(string, 0.0) + coeff
        self._terms = tuple((c, s) for s, c in merged.items())
        self._n_qubits = n_qubits

    @classmethod
    def from_labels(cls, terms: Mapping[str, float], n_qubits: int) -> "PauliSum":
        """Build from ``{"Z0 Z1": 1.0, "X0": -1.0, "": 0.5}`` style labels."""
        return cls(((c, _string_from_label(label, n_qubits)) for label, c in terms.items()), n_qubits)

    @property
    def terms(self) -> Tuple[Tuple[float, PauliString], ...]:
        return self._terms

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n_qubits == other._n_qubits and dict(
            (s, c) for c, s in self._terms
        ) == dict((s, c) for c, s in other._terms)

    def __repr__(self) -> str:
        return f"PauliSum({len(self)} terms on {self._n_qubits} qubits)"

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot add Pauli sums on different registers")
        return PauliSum(self._terms + other._terms, self._n_qubits)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(((factor * c, s) for c, s in self._terms), self._n_qubits)

    def one_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self._terms))

    def coefficient(self, label: str) -> float:
        target = _string_from_label(label, self._n_qubits)
        for c, s in self._terms:
            if s == target:
                return c
        return 0.0

    def embed(self, wires: Sequence[int], n_qubits: int) -> "PauliSum":
        """Relabel qubit k onto wires[k] of a wider register."""
        if len(wires) != self._n_qubits:
            raise ValueError(f"need {self._n_qubits} wires, got {len(wires)}")
        return PauliSum(((c, s.relabel(wires, n_qubits)) for c, s in self._terms), n_qubits)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """
        Return H @ amps without building H.

        Args:
            amps: Array of shape (2**n,) or (2**n, batch).

        Returns:
            Complex array of the same shape.
        """
        amps = np.asarray(amps)
        dim = 1 << self._n_qubits
        if amps.shape[0] != dim:
            raise ValueError(f"amplitude axis has length {amps.shape[0]}, expected {dim}")
        out = np.zeros(amps.shape, dtype=np.complex128)
        for coeff, string in self._terms:
            if coeff == 0.0:
                continue
            if string.is_identity:
                out += coeff * amps
                continue
            perm, phase = _term_action(*string.masks(), self._n_qubits)
            if amps.ndim == 1:
                out += coeff * phase * amps[perm]
            else:
                out += (coeff * phase)[:, None] * amps[perm]
        return out

    def to_dense(self) -> np.ndarray:
        """Dense matrix, assembled term by term by index scatter."""
        dim = 1 << self._n_qubits
        mat = np.zeros((dim, dim), dtype=np.complex128)
        rows = np.arange(dim)
        for coeff, string in self._terms:
            perm, phase = _term_action(*string.masks(), self._n_qubits)
            mat[rows, perm] += coeff * phase
        return mat

    def diagonal_terms(self) -> List[Tuple[float, PauliString]]:
        return [(c, s) for c, s in self._terms if all(a == "Z" for _, a in s.ops)]

    def basis_state_energy(self, bits: Sequence[int]) -> float:
        """Energy of a computational basis state; off-diagonal terms vanish."""
        if len(bits) != self._n_qubits:
            raise ValueError(f"need {self._n_qubits} bits, got {len(bits)}")
        total = 0.0
        for coeff, string in self.diagonal_terms():
            sign = 1
            for qubit in string.support:
                sign *= 1 - 2 * int(bits[qubit])
            total += coeff * sign
        return total


def _string_from_label(label: str, n_qubits: int) -> PauliString:
    ops = []
    for token in label.split():
        axis, index = token[0].upper(), token[1:]
        if axis not in PAULI_AXES or not index.isdigit():
            raise ValueError(f"malformed Pauli token {token!r}")
        ops.append((int(index), axis))
    return PauliString(tuple(ops), n_qubits)


# --- lattice builders ---------------------------------------------------------


def lattice_edges(rows: int, cols: int, periodic: bool, one_dimensional: bool = False) -> List[Tuple[int, int]]:
    """
    Nearest-neighbour bonds of a rows x cols grid (site (r, c) -> r * cols + c).

    Periodic wraps that coincide with an existing bond (extent 2) are kept as
    repeated entries so the Hamiltonian builders merge them into one term with
    a summed coefficient. Self-loops from extent-1 wraps are dropped.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"lattice needs at least 2 sites, got {rows}x{cols}")

    edges: List[Tuple[int, int]] = []

    def add(a: int, b: int) -> None:
        if a != b:
            edges.append((min(a, b), max(a, b)))

    if one_dimensional:
        n = rows * cols
        for i in range(n - 1):
            add(i, i + 1)
        if periodic:
            add(n - 1, 0)
        return edges

    for r in range(rows):
        for c in range(cols):
            site = r * cols + c
            if c + 1 < cols:
                add(site, site + 1)
            elif periodic:
                add(site, r * cols)
            if r + 1 < rows:
                add(site, site + cols)
            elif periodic:
                add(site, c)
    return edges


def build_tfim(rows: int, cols: int, periodic: bool = True, one_dimensional: bool = False) -> PauliSum:
    """Transverse-field Ising model: sum over bonds of Z_i Z_j minus sum of X_i."""
    edges = lattice_edges(rows, cols, periodic, one_dimensional)
    n = rows * cols
    terms = [(1.0, PauliString(((i, "Z"), (j, "Z")), n)) for i, j in edges]
    terms += [(-1.0, PauliString(((i, "X"),), n)) for i in range(n)]
    logger.debug(f"Built TFIM on {rows}x{cols} (periodic={periodic}) with {len(edges)} bonds")
    return PauliSum(terms, n)


def build_heisenberg(rows: int, cols: int, periodic: bool = True, one_dimensional: bool = False) -> PauliSum:
    """Isotropic Heisenberg model: XX + YY + ZZ on every bond, coefficient +1."""
    edges = lattice_edges(rows, cols, periodic, one_dimensional)
    n = rows * cols
    terms = [
        (1.0, PauliString(((i, axis), (j, axis)), n))
        for i, j in edges
        for axis in PAULI_AXES
    ]
    logger.debug(f"Built Heisenberg on {rows}x{cols} (periodic={periodic}) with {len(edges)} bonds")
    return PauliSum(terms, n)


def build_total_spin_squared(n: int) -> PauliSum:
    """J_tot^2 = (sum sigma / 2)^2 = 3n/4 + 1/2 sum_{i<j} (XX + YY + ZZ)."""
    terms = [(0.75 * n, PauliString.identity(n))]
    for i in range(n):
        for j in range(i + 1, n):
            for axis in PAULI_AXES:
                terms.append((0.5, PauliString(((i, axis), (j, axis)), n)))
    return PauliSum(terms, n)


def build_number_operator(n: int) -> PauliSum:
    """Sum of Z_i; conserved by the U(1) ansatz."""
    return PauliSum(((1.0, PauliString(((i, "Z"),), n)) for i in range(n)), n)


# --- file format --------------------------------------------------------------


def parse_pauli_file(text: str) -> PauliSum:
    """
    Parse the line-oriented Pauli file format.

    Args:
        text: Full file contents.

    Returns:
        PauliSum with n_qubits from the ``qubits`` header or 1 + max index.

    Raises:
        HamiltonianParseError: Malformed token, repeated qubit in a line,
            index beyond the declared width, or an empty file.
    """
    declared: Optional[int] = None
    raw_terms: List[Tuple[int, float, Tuple[Tuple[int, str], ...]]] = []
    max_index = -1

    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        fields = content.split()
        if fields[0].lower() == "qubits":
            if len(fields) != 2 or not fields[1].isdigit() or int(fields[1]) < 1:
                raise HamiltonianParseError(line_number, f"bad header {content!r}")
            if raw_terms:
                raise HamiltonianParseError(line_number, "qubits header must precede all terms")
            declared = int(fields[1])
            continue
        try:
            coeff = float(fields[0])
        except ValueError:
            raise HamiltonianParseError(line_number, f"bad coefficient {fields[0]!r}") from None
        if not math.isfinite(coeff):
            raise HamiltonianParseError(line_number, f"non-finite coefficient {fields[0]!r}")

        ops: Dict[int, str] = {}
        for token in fields[1:]:
            axis, index = token[:1], token[1:]
            if axis not in PAULI_AXES or not index.isdigit():
                raise HamiltonianParseError(line_number, f"malformed token {token!r}")
            qubit = int(index)
            if qubit in ops:
                raise HamiltonianParseError(line_number, f"qubit {qubit} appears twice")
            if declared is not None and qubit >= declared:
                raise HamiltonianParseError(
                    line_number, f"index {qubit} exceeds declared {declared} qubits"
                )
            ops[qubit] = axis
            max_index = max(max_index, qubit)
        raw_terms.append((line_number, coeff, tuple(ops.items())))

    if not raw_terms:
        raise HamiltonianParseError(0, "no terms found")
    n_qubits = declared if declared is not None else max(max_index + 1, 1)
    return PauliSum(((c, PauliString(ops, n_qubits)) for _, c, ops in raw_terms), n_qubits)


def serialize_pauli_sum(h: PauliSum) -> str:
    """Canonical text form: header, then merged terms with qubit-sorted tokens."""
    lines = [f"qubits {h.n_qubits}"]
    for coeff, string in h.terms:
        label = string.label()
        lines.append(f"{coeff!r} {label}" if label else f"{coeff!r}")
    return "\n".join(lines) + "\n"


def load_pauli_file(path: Union[str, Path]) -> PauliSum:
    path = Path(path)
    logger.info(f"Loading Pauli Hamiltonian from {path}")
    return parse_pauli_file(path.read_text(encoding="utf-8"))

"""
Circuit builders for every ansatz family.

A CircuitIR is an immutable gate list over wires split into system and
ancilla wires, with an optional singlet-pair initial state and an optional
post-selection. Builders allocate parameter slots in gate order; the ancilla
module V(phi) always occupies the trailing slots.

Structured text form (``CircuitIR.describe``), one record per line::

    circuit <name>
    qubits <n> params <p>
    system <wires...>
    ancilla <wires...>
    init singlet <a> <b>          # zero or more
    <Kind> <wires...> : <slots...>
    postselect <wires...> -> <bitstring|singlet>
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .statevec import (
    SINGLET,
    Gate,
    PostSelection,
    Primitive,
    StateVector,
    apply_matrix,
    check_capacity,
    evolve,
)

logger = logging.getLogger(__name__)

# maps |00> to the singlet on a wire pair that is still in |00>
_SINGLET_PREP = np.zeros((4, 4), dtype=np.complex128)
_SINGLET_PREP[:, 0] = SINGLET


@dataclass(frozen=True)
class CircuitIR:
    """
    Parameterized circuit with its wire roles.

    Attributes:
        n_qubits: Total wire count.
        gates: Gates in application order.
        n_params: Length of the circuit parameter vector.
        system_wires: Wires the observable acts on (ascending).
        ancilla_wires: Wires measured, post-selected or reweighted.
        post_selection: Projection applied to the output, if any.
        init_pairs: Wire pairs prepared in the singlet before the gates run.
        n_ancilla_params: Trailing slots that belong to the ancilla module V(phi).
        name: Builder name, used in logs and descriptions.
    """

    n_qubits: int
    gates: Tuple[Gate, ...]
    n_params: int
    system_wires: Tuple[int, ...]
    ancilla_wires: Tuple[int, ...] = ()
    post_selection: Optional[PostSelection] = field(default=None, compare=False)
    init_pairs: Tuple[Tuple[int, int], ...] = ()
    n_ancilla_params: int = 0
    name: str = "circuit"

    def __post_init__(self):
        check_capacity(self.n_qubits)
        sys_set, anc_set = set(self.system_wires), set(self.ancilla_wires)
        if sys_set & anc_set:
            raise ValueError("system and ancilla wires overlap")
        if sys_set | anc_set != set(range(self.n_qubits)):
            raise ValueError("system and ancilla wires must cover every wire")
        if list(self.system_wires) != sorted(self.system_wires):
            raise ValueError("system wires must be ascending")
        referenced = set()
        for gate in self.gates:
            for w in gate.wires:
                if not 0 <= w < self.n_qubits:
                    raise ValueError(f"{gate.kind} wire {w} out of range")
            for s in gate.param_slots:
                if not 0 <= s < self.n_params:
                    raise ValueError(f"{gate.kind} slot {s} out of range for {self.n_params} params")
                referenced.add(s)
        if referenced != set(range(self.n_params)):
            missing = sorted(set(range(self.n_params)) - referenced)
            raise ValueError(f"parameter slots never used: {missing[:8]}")
        paired = [w for pair in self.init_pairs for w in pair]
        if len(set(paired)) != len(paired) or any(not 0 <= w < self.n_qubits for w in paired):
            raise ValueError(f"invalid singlet pairs {self.init_pairs}")
        if not 0 <= self.n_ancilla_params <= self.n_params:
            raise ValueError(f"n_ancilla_params {self.n_ancilla_params} out of range")
        if self.post_selection is not None:
            if not set(self.post_selection.wires) <= anc_set:
                raise ValueError("post-selection must act on ancilla wires only")

    @property
    def n_system(self) -> int:
        return len(self.system_wires)

    @property
    def n_ancilla(self) -> int:
        return len(self.ancilla_wires)

    def primitives(self) -> List[Primitive]:
        return [prim for gate in self.gates for prim in gate.primitives()]

    def initial_tensor(self, basis_batch: bool = False) -> np.ndarray:
        """
        Tensor the gates act on.

        With ``basis_batch`` every computational basis state is an input,
        stacked on a trailing batch axis (column s is |s>); singlet pairs are
        not allowed then.
        """
        n = self.n_qubits
        if basis_batch:
            if self.init_pairs:
                raise ValueError("basis-batched inputs cannot carry singlet pairs")
            return np.eye(1 << n, dtype=np.complex128).reshape((2,) * n + (1 << n,))
        tensor = np.zeros((2,) * n, dtype=np.complex128)
        tensor[(0,) * n] = 1.0
        for a, b in self.init_pairs:
            tensor = apply_matrix(tensor, _SINGLET_PREP, (a, b))
        return tensor

    def run(self, params: Sequence[float], basis_batch: bool = False) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} circuit parameters, got {params.shape}")
        return evolve(self.initial_tensor(basis_batch), self.gates, params)

    def simulate(self, params: Sequence[float]) -> StateVector:
        """Output state before any post-selection."""
        return StateVector.from_tensor(self.run(params))

    def gate_counts(self) -> Dict[str, int]:
        counts = Counter(g.kind for g in self.gates)
        two_qubit = sum(1 for g in self.gates if len(g.wires) == 2)
        result = dict(sorted(counts.items()))
        result["two_qubit"] = two_qubit
        routed, merged = self._ring_costs()
        result["ring_routed_two_qubit"] = routed
        result["ring_merged_two_qubit"] = merged
        return result

    def _ring_costs(self) -> Tuple[int, int]:
        """
        Two-qubit gate counts on a ring of n_qubits wires.

        Routed: a coupling at ring distance d needs 2(d - 1) SWAPs around it.
        Merged: consecutive couplings that share one wire form a sweep; the
        shared wire walks along the ring and each coupling fuses with its SWAP.
        """
        n = self.n_qubits
        pairs = [g.wires for g in self.gates if len(g.wires) == 2]

        def cost(a: int, b: int) -> int:
            d = abs(a - b)
            return 2 * (min(d, n - d) - 1) + 1

        routed = sum(cost(a, b) for a, b in pairs)
        merged = 0
        for k, (a, b) in enumerate(pairs):
            neighbours = pairs[max(k - 1, 0):k] + pairs[k + 1:k + 2]
            if any(set(other) & {a, b} for other in neighbours):
                merged += 1
            else:
                merged += cost(a, b)
        return routed, merged

    def describe(self) -> str:
        lines = [
            f"circuit {self.name}",
            f"qubits {self.n_qubits} params {self.n_params}",
            "system " + " ".join(map(str, self.system_wires)),
            "ancilla " + " ".join(map(str, self.ancilla_wires)),
        ]
        lines += [f"init singlet {a} {b}" for a, b in self.init_pairs]
        for gate in self.gates:
            line = f"{gate.kind} " + " ".join(map(str, gate.wires))
            if gate.param_slots:
                line += " : " + " ".join(map(str, gate.param_slots))
            lines.append(line)
        if self.post_selection is not None:
            wires = " ".join(map(str, self.post_selection.wires))
            lines.append(f"postselect {wires} -> {self.post_selection.describe()}")
        return "\n".join(line.rstrip() for line in lines) + "\n"


class _Slots:
    """Hands out consecutive parameter slots."""

    def __init__(self):
        self.count = 0

    def take(self, k: int = 1) -> Tuple[int, ...]:
        slots = tuple(range(self.count, self.count + k))
        self.count += k
        return slots


def _rotation_layer(kind: str, wires: Sequence[int], slots: _Slots) -> List[Gate]:
    return [Gate(kind, (w,), slots.take()) for w in wires]


def _ring_bonds(wires: Sequence[int]) -> List[Tuple[int, int]]:
    n = len(wires)
    return [(wires[i], wires[(i + 1) % n]) for i in range(n)]


def _hea_gates(wires: Sequence[int], P: int, extra_ry: bool, slots: _Slots) -> List[Gate]:
    gates = [Gate("H", (w,)) for w in wires]
    for _ in range(P):
        gates += [Gate("Rzz", bond, slots.take()) for bond in _ring_bonds(wires)]
        gates += _rotation_layer("Rx", wires, slots)
        if extra_ry:
            gates += _rotation_layer("Ry", wires, slots)
    return gates


def build_hea(n: int, P: int, extra_ry: bool = False) -> CircuitIR:
    """
    Hardware-efficient ansatz: Hadamards, then P blocks of a ring Rzz layer and
    an Rx layer (and an Ry layer with ``extra_ry``).

    Args:
        n: Number of qubits, at least 2.
        P: Number of blocks, at least 1.
        extra_ry: Append one Ry rotation per qubit to every block.

    Returns:
        Circuit with 2nP parameters (3nP with extra_ry) and no ancilla.
    """
    if n < 2:
        raise ValueError(f"hardware-efficient ansatz needs n >= 2, got {n}")
    _check_blocks(P)
    slots = _Slots()
    gates = _hea_gates(list(range(n)), P, extra_ry, slots)
    return CircuitIR(
        n_qubits=n,
        gates=tuple(gates),
        n_params=slots.count,
        system_wires=tuple(range(n)),
        name="hea_ry" if extra_ry else "hea",
    )


def build_hea_postselect(n_sys: int, P: int) -> CircuitIR:
    """
    All-to-one ansatz with one post-selected ancilla (wire n_sys).

    Every block couples system wires 0..n_sys-1 in order to the ancilla with
    Rzz, then applies Rx on all n_sys + 1 wires. A three-angle SU2 rotation
    V(phi) on the ancilla precedes post-selection of |0>.
    """
    if n_sys < 2:
        raise ValueError(f"post-selection ansatz needs n_sys >= 2, got {n_sys}")
    _check_blocks(P)
    anc = n_sys
    slots = _Slots()
    gates = [Gate("H", (w,)) for w in range(n_sys)]
    for _ in range(P):
        gates += [Gate("Rzz", (i, anc), slots.take()) for i in range(n_sys)]
        gates += _rotation_layer("Rx", range(n_sys + 1), slots)
    gates.append(Gate("SU2", (anc,), slots.take(3)))
    return CircuitIR(
        n_qubits=n_sys + 1,
        gates=tuple(gates),
        n_params=slots.count,
        system_wires=tuple(range(n_sys)),
        ancilla_wires=(anc,),
        post_selection=PostSelection.bitstring((anc,), "0"),
        n_ancilla_params=3,
        name="hea_postselect",
    )


def build_su2_ansatz(n_sys: int, P: int, symmetric_sel: bool = True, post_select: bool = True) -> CircuitIR:
    """
    SU(2)-symmetric ansatz with an ancilla pair (wires n_sys, n_sys + 1).

    System wires start as singlets on (0,1), (2,3), ...; the ancilla pair
    starts as a singlet too. Each block swaps ancilla 0 with every system
    wire in order through Rswap, then applies Rswap to the ancilla pair.

    Args:
        n_sys: Even number of system wires.
        P: Number of blocks.
        symmetric_sel: Post-select the ancilla singlet (keeps J_tot^2 = 0);
            otherwise post-select the symmetry-breaking |11> outcome.
        post_select: Without it the ancilla pair is simply traced out.
    """
    if n_sys < 2 or n_sys % 2:
        raise ValueError(f"SU(2) ansatz needs an even n_sys >= 2, got {n_sys}")
    _check_blocks(P)
    a0, a1 = n_sys, n_sys + 1
    slots = _Slots()
    gates: List[Gate] = []
    for _ in range(P):
        gates += [Gate("Rswap", (i, a0), slots.take()) for i in range(n_sys)]
        gates.append(Gate("Rswap", (a0, a1), slots.take()))
    if not post_select:
        selection = None
    elif symmetric_sel:
        selection = PostSelection.singlet((a0, a1))
    else:
        selection = PostSelection.bitstring((a0, a1), "11")
    return CircuitIR(
        n_qubits=n_sys + 2,
        gates=tuple(gates),
        n_params=slots.count,
        system_wires=tuple(range(n_sys)),
        ancilla_wires=(a0, a1),
        post_selection=selection,
        init_pairs=tuple((i, i + 1) for i in range(0, n_sys, 2)) + ((a0, a1),),
        name="su2" if post_select else "su2_no_postselect",
    )


def build_su2_ladder(n_sys: int, P: int) -> CircuitIR:
    """Conventional SU(2) ansatz: singlet pairs, then P ring ladders of Rswap."""
    if n_sys < 2 or n_sys % 2:
        raise ValueError(f"SU(2) ansatz needs an even n_sys >= 2, got {n_sys}")
    _check_blocks(P)
    wires = list(range(n_sys))
    slots = _Slots()
    gates: List[Gate] = []
    bonds = _ring_bonds(wires) if n_sys > 2 else [(0, 1)]
    for _ in range(P):
        gates += [Gate("Rswap", bond, slots.take()) for bond in bonds]
    return CircuitIR(
        n_qubits=n_sys,
        gates=tuple(gates),
        n_params=slots.count,
        system_wires=tuple(wires),
        init_pairs=tuple((i, i + 1) for i in range(0, n_sys, 2)),
        name="su2_ladder",
    )


def build_u1_ansatz(n_sys: int, P: int, electrons: int, with_ancilla: bool = False) -> CircuitIR:
    """
    Particle-number-conserving ansatz for Jordan-Wigner molecular Hamiltonians.

    X gates on the first ``electrons`` wires prepare the Hartree-Fock state.
    Block layout: Rswap ladder, then Rzz ladder over (i, i+1), then Rz on every
    system wire; with an ancilla (wire n_sys) each block ends with Rswap
    couplings (i, n_sys) in order. V(phi) is a single Rz on the ancilla, and
    the ancilla is post-selected in |0> (no excitation).
    """
    if n_sys < 2:
        raise ValueError(f"U(1) ansatz needs n_sys >= 2, got {n_sys}")
    if not 0 < electrons <= n_sys:
        raise ValueError(f"electrons must be in 1..{n_sys}, got {electrons}")
    _check_blocks(P)
    slots = _Slots()
    ladder = [(i, i + 1) for i in range(n_sys - 1)]
    gates = [Gate("X", (w,)) for w in range(electrons)]
    anc = n_sys
    for _ in range(P):
        gates += [Gate("Rswap", bond, slots.take()) for bond in ladder]
        gates += [Gate("Rzz", bond, slots.take()) for bond in ladder]
        gates += _rotation_layer("Rz", range(n_sys), slots)
        if with_ancilla:
            gates += [Gate("Rswap", (i, anc), slots.take()) for i in range(n_sys)]
    if with_ancilla:
        gates.append(Gate("Rz", (anc,), slots.take()))
    return CircuitIR(
        n_qubits=n_sys + 1 if with_ancilla else n_sys,
        gates=tuple(gates),
        n_params=slots.count,
        system_wires=tuple(range(n_sys)),
        ancilla_wires=(anc,) if with_ancilla else (),
        post_selection=PostSelection.bitstring((anc,), "0") if with_ancilla else None,
        n_ancilla_params=1 if with_ancilla else 0,
        name="u1_postselect" if with_ancilla else "u1",
    )


def build_thermal_ansatz(n_sys: int, P: int) -> CircuitIR:
    """
    Hardware-efficient ansatz on 2 * n_sys wires with interleaved ancillas.

    System wires are the even wires, ancillas the odd ones; nothing is
    post-selected because ancilla outcomes are reweighted instead.
    """
    if n_sys < 2:
        raise ValueError(f"thermal ansatz needs n_sys >= 2, got {n_sys}")
    _check_blocks(P)
    n = 2 * n_sys
    slots = _Slots()
    gates = _hea_gates(list(range(n)), P, False, slots)
    return CircuitIR(
        n_qubits=n,
        gates=tuple(gates),
        n_params=slots.count,
        system_wires=tuple(range(0, n, 2)),
        ancilla_wires=tuple(range(1, n, 2)),
        name="thermal",
    )


def _check_blocks(P: int) -> None:
    if P < 1:
        raise ValueError(f"number of blocks P must be at least 1, got {P}")


BUILDERS = {
    "hea": build_hea,
    "hea_postselect": build_hea_postselect,
    "su2": build_su2_ansatz,
    "su2_ladder": build_su2_ladder,
    "u1": build_u1_ansatz,
    "thermal": build_thermal_ansatz,
}

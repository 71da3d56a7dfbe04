"""
Reverse-mode gradients through the statevector simulator.

Objectives expose ``evaluate(values) -> Evaluation``; the adjoint pass here
turns a cotangent on the circuit output into gradients for every circuit
slot. Cotangents follow the convention lam = dL/d(psi*), so a perturbation
dpsi changes the loss by 2 Re <lam|dpsi>.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .ansatz import CircuitIR
from .errors import EvaluationError
from .statevec import apply_matrix

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class SlotRange:
    """Named half-open slice of a flat parameter vector."""

    name: str
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start

    def slice(self) -> slice:
        return slice(self.start, self.stop)


def make_layout(sizes: Sequence[Tuple[str, int]]) -> Tuple[SlotRange, ...]:
    """Consecutive ranges for ``[(name, size), ...]``; empty groups are skipped."""
    layout = []
    start = 0
    for name, size in sizes:
        if size < 0:
            raise ValueError(f"group {name!r} has negative size {size}")
        if size:
            layout.append(SlotRange(name, start, start + size))
            start += size
    return tuple(layout)


def circuit_layout(circuit: CircuitIR, n_weights: int = 0) -> Tuple[SlotRange, ...]:
    """theta (circuit slots), phi (trailing ancilla-module slots), weights."""
    n_phi = circuit.n_ancilla_params
    return make_layout(
        [("theta", circuit.n_params - n_phi), ("phi", n_phi), ("weights", n_weights)]
    )


@dataclass
class ParamVector:
    """Flat trainable values plus the named groups they split into."""

    values: np.ndarray
    layout: Tuple[SlotRange, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        expected = self.layout[-1].stop if self.layout else 0
        if self.values.shape[0] != expected:
            raise ValueError(f"{self.values.shape[0]} values do not fit a layout of {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("parameter vector contains non-finite values")

    def __len__(self) -> int:
        return self.values.shape[0]

    def group(self, name: str) -> np.ndarray:
        for rng in self.layout:
            if rng.name == name:
                return self.values[rng.slice()]
        return self.values[0:0]

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(np.array(values, dtype=np.float64), self.layout)

    def to_record(self) -> Dict[str, list]:
        return {rng.name: self.values[rng.slice()].tolist() for rng in self.layout}


@dataclass
class Evaluation:
    """Objective value with its gradient and optional diagnostics."""

    value: float
    grad: Optional[np.ndarray] = None
    energy: Optional[float] = None
    success_prob: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)


def _values(p) -> np.ndarray:
    if isinstance(p, ParamVector):
        return p.values
    return np.asarray(p, dtype=np.float64)


def value_and_grad(objective: Any, p) -> Tuple[float, np.ndarray]:
    """
    Value and exact gradient of an objective.

    Objects with an ``evaluate`` method supply their own adjoint gradient;
    plain callables fall back to central differences.

    Raises:
        EvaluationError: The value or a gradient entry is not finite.
    """
    values = _values(p)
    if hasattr(objective, "evaluate"):
        result = objective.evaluate(values)
        value, grad = result.value, result.grad
    else:
        value = float(objective(values))
        grad = finite_difference(objective, values, DEFAULT_FD_STEP)
    if not np.isfinite(value):
        raise EvaluationError(f"objective evaluated to {value}")
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise EvaluationError(f"non-finite gradient at {bad.size} slot(s), first {bad[0]}")
    return float(value), grad


def gradient(objective: Any, p) -> np.ndarray:
    return value_and_grad(objective, p)[1]


def finite_difference(objective: Any, p, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """
    Central-difference gradient estimate.

    Args:
        objective: Callable on a flat value array, or an object with ``evaluate``.
        p: Point to differentiate at.
        step: Symmetric displacement, must be positive.

    Returns:
        Array of (f(p + h e_k) - f(p - h e_k)) / 2h.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    values = np.array(_values(p), dtype=np.float64)

    def f(x: np.ndarray) -> float:
        if hasattr(objective, "evaluate"):
            return float(objective.evaluate(x, with_grad=False).value)
        return float(objective(x))

    grad = np.zeros_like(values)
    for k in range(values.shape[0]):
        saved = values[k]
        values[k] = saved + step
        up = f(values)
        values[k] = saved - step
        down = f(values)
        values[k] = saved
        grad[k] = (up - down) / (2.0 * step)
    return grad


def backpropagate(circuit: CircuitIR, params: np.ndarray, psi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """
    Adjoint pass from the output tensor back to the initial state.

    Args:
        circuit: Circuit that produced ``psi``.
        params: Circuit slot values.
        psi: Output tensor, shape (2,) * n with an optional trailing batch axis.
        lam: Cotangent dL/d(psi*) of the same shape.

    Returns:
        dL/dparams for every circuit slot.
    """
    if psi.shape != lam.shape:
        raise ValueError(f"state {psi.shape} and cotangent {lam.shape} differ in shape")
    grad = np.zeros(circuit.n_params)
    for prim in reversed(circuit.primitives()):
        if prim.slot is not None:
            # d/dtheta e^{i theta G} = iG e^{i theta G}
            g_psi = apply_matrix(psi, prim.generator, prim.wires)
            grad[prim.slot] -= 2.0 * np.vdot(lam, g_psi).imag
        dagger = prim.dagger(params)
        psi = apply_matrix(psi, dagger, prim.wires)
        lam = apply_matrix(lam, dagger, prim.wires)
    return grad

"""
Feed-forward reweighting network over ancilla bitstrings.

The network maps a bitstring a (fed in as 1 - 2a, i.e. +-1 per bit) to a
logit g(a); weights are f(a) = softmax(g) over every bitstring of the
register. The bounded variant squashes logits into [-bound, bound] with
bound * tanh(raw), which keeps the map differentiable everywhere.

The same class doubles as the enumerable classical sampler of the
pre-processing baseline.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax

from .errors import CapacityError, InvalidStateError
from .statevec import bits_from_indices

logger = logging.getLogger(__name__)

MAX_ENUM_BITS = 12
DEFAULT_HIDDEN = (32, 32)
DEFAULT_BOUND = math.e
DEFAULT_INIT_SIGMA = 0.005
NORMALIZATION_TOL = 1e-10


def all_bitstrings(n_bits: int) -> np.ndarray:
    """Every bitstring of n_bits as rows, in basis-index order (bit 0 most significant)."""
    if n_bits > MAX_ENUM_BITS:
        raise CapacityError(f"cannot enumerate {n_bits} bits (limit {MAX_ENUM_BITS})")
    if n_bits < 1:
        raise ValueError(f"need at least one bit, got {n_bits}")
    return bits_from_indices(np.arange(1 << n_bits), n_bits)


@dataclass
class ForwardCache:
    activations: List[np.ndarray]
    raw: np.ndarray
    probs: np.ndarray


class Reweighter:
    """
    Fully connected tanh network producing one logit per bitstring.

    Attributes:
        layer_sizes: (n_inputs, hidden..., 1).
        weights: Per-layer matrices of shape (out, in).
        biases: Per-layer vectors of shape (out,).
        bounded: Squash logits into [-bound, bound].
        bound: Logit range for the bounded variant.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        bounded: bool = False,
        bound: float = DEFAULT_BOUND,
    ):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or self.layer_sizes[-1] != 1:
            raise ValueError(f"layer sizes must end in a single logit, got {self.layer_sizes}")
        if self.layer_sizes[0] > MAX_ENUM_BITS:
            raise CapacityError(
                f"reweighter over {self.layer_sizes[0]} bits exceeds the enumeration limit {MAX_ENUM_BITS}"
            )
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for k, (n_in, n_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            if self.weights[k].shape != (n_out, n_in) or self.biases[k].shape != (n_out,):
                raise ValueError(f"layer {k} has shapes {self.weights[k].shape}/{self.biases[k].shape}")
        self.bounded = bounded
        self.bound = float(bound)

    @classmethod
    def init(
        cls,
        n_inputs: int,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        bounded: bool = False,
        bound: float = DEFAULT_BOUND,
        sigma: float = DEFAULT_INIT_SIGMA,
        rng: Optional[np.random.Generator] = None,
    ) -> "Reweighter":
        """Gaussian N(0, sigma) initialization of every weight and bias."""
        rng = rng if rng is not None else np.random.default_rng()
        sizes = (n_inputs, *hidden, 1)
        weights = [rng.normal(0.0, sigma, (o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [rng.normal(0.0, sigma, o) for o in sizes[1:]]
        return cls(sizes, weights, biases, bounded, bound)

    @classmethod
    def zeros(
        cls,
        n_inputs: int,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        bounded: bool = False,
        bound: float = DEFAULT_BOUND,
    ) -> "Reweighter":
        sizes = (n_inputs, *hidden, 1)
        weights = [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(o) for o in sizes[1:]]
        return cls(sizes, weights, biases, bounded, bound)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_weights(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        """Weights then bias of each layer, concatenated."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    def with_flat(self, values: np.ndarray) -> "Reweighter":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_weights,):
            raise ValueError(f"expected {self.n_weights} weights, got {values.shape}")
        weights, biases = [], []
        offset = 0
        for w, b in zip(self.weights, self.biases):
            weights.append(values[offset:offset + w.size].reshape(w.shape))
            offset += w.size
            biases.append(values[offset:offset + b.size])
            offset += b.size
        return Reweighter(self.layer_sizes, weights, biases, self.bounded, self.bound)

    def _forward(self, bits: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray], np.ndarray]:
        x = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
        activations = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            activations.append(np.tanh(activations[-1] @ w.T + b))
        raw = (activations[-1] @ self.weights[-1].T + self.biases[-1])[:, 0]
        logits = self.bound * np.tanh(raw) if self.bounded else raw
        return logits, activations, raw

    def logits(self, bits: np.ndarray) -> np.ndarray:
        """g(a) for a batch of bitstrings of shape (m, n_inputs)."""
        bits = np.atleast_2d(bits)
        if bits.shape[1] != self.n_inputs:
            raise ValueError(f"bitstrings have {bits.shape[1]} bits, network expects {self.n_inputs}")
        return self._forward(bits)[0]

    def forward(self) -> ForwardCache:
        """Softmax weights over every bitstring, with the activations for backprop."""
        logits, activations, raw = self._forward(all_bitstrings(self.n_inputs))
        probs = np.exp(log_softmax(logits))
        total = probs.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL or not np.all(probs > 0):
            raise InvalidStateError(f"reweighter output not normalized (sum {total!r})")
        return ForwardCache(activations, raw, probs)

    def backward(self, cache: ForwardCache, dprobs: np.ndarray) -> np.ndarray:
        """Gradient of a loss w.r.t. the flat weights, given dL/df for every bitstring."""
        f = cache.probs
        dlogits = f * (dprobs - np.dot(f, dprobs))
        if self.bounded:
            delta = dlogits * self.bound * (1.0 - np.tanh(cache.raw) ** 2)
        else:
            delta = dlogits
        delta = delta[:, None]
        grads_w: List[np.ndarray] = [None] * len(self.weights)
        grads_b: List[np.ndarray] = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            a = cache.activations[k]
            grads_w[k] = delta.T @ a
            grads_b[k] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k]) * (1.0 - a**2)
        parts = []
        for gw, gb in zip(grads_w, grads_b):
            parts += [gw.ravel(), gb]
        return np.concatenate(parts)

    def log_probabilities(self) -> np.ndarray:
        logits, _, _ = self._forward(all_bitstrings(self.n_inputs))
        return log_softmax(logits)

    def probabilities(self) -> np.ndarray:
        return self.forward().probs

    def entropy(self) -> float:
        """Classical Shannon entropy -sum P ln P in nats."""
        return classical_entropy(self.probabilities())

    def __repr__(self) -> str:
        kind = "bounded" if self.bounded else "unbounded"
        return f"Reweighter({self.layer_sizes}, {kind})"


def reweight_all(r: Reweighter) -> np.ndarray:
    """f(a) for every ancilla bitstring in basis-index order; sums to 1."""
    return r.forward().probs


def classical_entropy(probs: np.ndarray) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    nonzero = probs[probs > 0]
    return float(-np.sum(nonzero * np.log(nonzero)))


def classical_model_sample(model: Reweighter, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw bitstrings from the model's softmax distribution.

    Returns:
        (uint8 samples of shape (count, n_inputs), log P of each sample)
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    log_probs = model.log_probabilities()
    rng = np.random.default_rng(seed)
    indices = rng.choice(log_probs.shape[0], size=count, p=np.exp(log_probs))
    return bits_from_indices(indices, model.n_inputs), log_probs[indices]

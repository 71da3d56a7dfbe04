"""
Unit tests for the reweighting network.
"""

import math

import numpy as np
import pytest

from vps.errors import CapacityError
from vps.neural import (
    Reweighter,
    all_bitstrings,
    classical_entropy,
    classical_model_sample,
    reweight_all,
)


def _loss(network: Reweighter, coeffs: np.ndarray) -> float:
    return float(np.dot(coeffs, network.forward().probs))


class TestEnumeration:
    """Bitstring enumeration order and limits."""

    def test_basis_index_order(self) -> None:
        """Row k is the binary expansion of k, first bit most significant."""
        np.testing.assert_array_equal(all_bitstrings(2), [[0, 0], [0, 1], [1, 0], [1, 1]])

    def test_enumeration_limit(self) -> None:
        """More than twelve bits cannot be enumerated."""
        with pytest.raises(CapacityError):
            all_bitstrings(13)
        with pytest.raises(CapacityError):
            Reweighter.zeros(13, (4,))


class TestForward:
    """Softmax weights over every bitstring."""

    def test_zero_network_is_uniform(self) -> None:
        """All-zero weights give equal weight to every outcome."""
        probs = reweight_all(Reweighter.zeros(3, (8, 8)))
        np.testing.assert_allclose(probs, np.full(8, 1 / 8))

    def test_probabilities_are_normalized(self, rng) -> None:
        """f sums to one and stays strictly positive."""
        probs = Reweighter.init(4, (16,), sigma=1.0, rng=rng).forward().probs
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs > 0)

    def test_bounded_logits_stay_in_range(self, rng) -> None:
        """Large weights saturate at the bound instead of diverging."""
        network = Reweighter.init(3, (8,), bounded=True, bound=2.0, sigma=50.0, rng=rng)
        logits = network.logits(all_bitstrings(3))
        assert np.all(np.abs(logits) <= 2.0)

    def test_flat_round_trip(self, rng) -> None:
        """with_flat(flat()) rebuilds an identical network."""
        network = Reweighter.init(3, (5, 4), sigma=0.7, rng=rng)
        rebuilt = network.with_flat(network.flat())
        np.testing.assert_array_equal(rebuilt.logits(all_bitstrings(3)), network.logits(all_bitstrings(3)))
        assert network.n_weights == 3 * 5 + 5 + 5 * 4 + 4 + 4 + 1

    def test_wrong_input_width_rejected(self) -> None:
        """Bitstrings must match the input layer."""
        with pytest.raises(ValueError, match="network expects 3"):
            Reweighter.zeros(3, (4,)).logits(np.zeros((2, 2)))

    def test_layer_sizes_must_end_in_one_logit(self) -> None:
        """The output layer has a single unit."""
        with pytest.raises(ValueError, match="single logit"):
            Reweighter((2, 3), [np.zeros((3, 2))], [np.zeros(3)])


class TestBackward:
    """Manual backpropagation against central differences."""

    @pytest.mark.parametrize("bounded", [False, True])
    def test_gradient_matches_differences(self, rng, bounded: bool) -> None:
        """dL/dw for a linear functional of f."""
        network = Reweighter.init(3, (6, 5), bounded=bounded, bound=math.e, sigma=0.8, rng=rng)
        coeffs = rng.normal(size=8)
        grad = network.backward(network.forward(), coeffs)

        flat = network.flat()
        step = 1e-5
        numeric = np.zeros_like(flat)
        for k in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[k] += step
            down[k] -= step
            numeric[k] = (_loss(network.with_flat(up), coeffs) - _loss(network.with_flat(down), coeffs)) / (2 * step)
        np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-8)


class TestEntropyAndSampling:
    """Classical entropy and the enumerable sampler."""

    def test_uniform_entropy(self) -> None:
        """n fair bits carry n ln 2 nats."""
        assert Reweighter.zeros(4, (3,)).entropy() == pytest.approx(4 * math.log(2))

    def test_zero_probabilities_contribute_nothing(self) -> None:
        """0 ln 0 is taken as 0."""
        assert classical_entropy(np.array([1.0, 0.0])) == 0.0

    def test_samples_and_log_probabilities(self, rng) -> None:
        """Samples come with the log-probability of each drawn bitstring."""
        model = Reweighter.init(3, (4,), sigma=1.0, rng=rng)
        bits, log_probs = classical_model_sample(model, 25, seed=5)
        assert bits.shape == (25, 3)
        indices = bits.astype(int) @ np.array([4, 2, 1])
        np.testing.assert_allclose(log_probs, model.log_probabilities()[indices])

    def test_sample_count_must_be_positive(self) -> None:
        """At least one sample is drawn."""
        with pytest.raises(ValueError, match="count"):
            classical_model_sample(Reweighter.zeros(2, (2,)), 0, seed=0)

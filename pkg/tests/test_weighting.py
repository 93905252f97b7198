import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsmppi.weighting import (LAMBDA_CEIL, LAMBDA_FLOOR, WeightingConfig,
                              adapt_temperature, elite_weights,
                              exponential_weights)

finite_costs = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=40)


class TestExponentialWeights:
    def test_equal_costs_uniform(self):
        w, eta = exponential_weights(np.array([7.0, 7.0, 7.0]), lam=3.0)
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3])
        assert eta == pytest.approx(3.0)

    def test_analytic_two_sample(self):
        lam = 0.7
        w, eta = exponential_weights(np.array([0.0, lam * math.log(2.0)]), lam)
        np.testing.assert_allclose(w, [2 / 3, 1 / 3], atol=1e-14)
        assert eta == pytest.approx(1.5, abs=1e-14)

    @given(finite_costs, st.floats(min_value=-1e5, max_value=1e5, allow_nan=False))
    def test_shift_invariance(self, costs, shift):
        costs = np.asarray(costs)
        w1, _ = exponential_weights(costs, 2.0)
        w2, _ = exponential_weights(costs + shift, 2.0)
        assert np.max(np.abs(w1 - w2)) <= 1e-12

    def test_sum_one_and_argmax(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            costs = rng.uniform(0, 100, size=17)
            w, eta = exponential_weights(costs, 5.0)
            assert w.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.argmax(w) == np.argmin(costs)
            assert 1.0 <= eta <= costs.size
            # weights non-increasing in cost rank
            order = np.argsort(costs)
            assert np.all(np.diff(w[order]) <= 1e-15)

    def test_large_lambda_is_uniform(self):
        rng = np.random.default_rng(1)
        costs = rng.uniform(0, 50, size=64)
        w, _ = exponential_weights(costs, 1e9)
        assert np.max(np.abs(w - 1.0 / 64)) <= 1e-6

    def test_rejects_non_finite_with_index(self):
        with pytest.raises(ValueError, match="index 2"):
            exponential_weights(np.array([1.0, 2.0, np.nan]), 1.0)
        with pytest.raises(ValueError, match="index 0"):
            exponential_weights(np.array([np.inf, 2.0]), 1.0)

    def test_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            exponential_weights(np.array([1.0]), 0.0)


class TestEliteWeights:
    def test_all_elite_uniform(self):
        np.testing.assert_allclose(elite_weights(np.array([5.0, 1.0, 3.0]), 3),
                                   [1 / 3, 1 / 3, 1 / 3])

    def test_unique_minimum(self):
        np.testing.assert_allclose(elite_weights(np.array([3.0, 1.0, 2.0]), 1),
                                   [0.0, 1.0, 0.0])

    def test_tie_break_matches_stable_sort_oracle(self):
        costs = np.array([2.0, 1.0, 2.0, 1.0, 0.5])
        k = 3
        w = elite_weights(costs, k)
        expected = np.zeros(5)
        order = sorted(range(5), key=lambda i: (costs[i], i))  # stable reference
        expected[order[:k]] = 1.0 / k
        np.testing.assert_array_equal(w, expected)

    @given(st.lists(st.integers(min_value=-10**6, max_value=10**6),
                    min_size=1, max_size=40))
    def test_monotone_transform_invariance(self, costs):
        # integer-valued costs keep the affine map exact, so the transform
        # introduces no new floating-point ties
        costs = np.asarray(costs, dtype=np.float64)
        k = max(1, len(costs) // 2)
        w1 = elite_weights(costs, k)
        w2 = elite_weights(3.0 * costs + 11.0, k)
        np.testing.assert_array_equal(w1, w2)

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            elite_weights(np.array([1.0, 2.0]), 0)
        with pytest.raises(ValueError):
            elite_weights(np.array([1.0, 2.0]), 3)


class TestAdaptTemperature:
    def setup_method(self):
        self.config = WeightingConfig(eta_min=5.0, eta_max=10.0)

    def test_shrink_branch(self):
        assert adapt_temperature(1.0, 12.0, self.config) == pytest.approx(0.9)

    def test_grow_branch(self):
        assert adapt_temperature(1.0, 3.0, self.config) == pytest.approx(1.2)

    def test_hold_branch(self):
        assert adapt_temperature(1.0, 7.0, self.config) == 1.0

    def test_idempotent_in_band(self):
        lam = 0.37
        for _ in range(5):
            lam_next = adapt_temperature(lam, 6.0, self.config)
            assert lam_next == lam
            lam = lam_next

    def test_clamped(self):
        assert adapt_temperature(LAMBDA_FLOOR, 20.0, self.config) == LAMBDA_FLOOR
        assert adapt_temperature(LAMBDA_CEIL, 1.0, self.config) == LAMBDA_CEIL

    def test_config_validation(self):
        with pytest.raises(ValueError):
            WeightingConfig(eta_min=10.0, eta_max=5.0)
        with pytest.raises(ValueError):
            WeightingConfig(scheme="softmax")

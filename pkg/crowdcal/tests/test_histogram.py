"""
Tests for fixed-support histograms, their Wasserstein distance and coefficient sampling.
"""

import unittest

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import wasserstein_distance

from crowdcal.ad import DualReal, TraceContext, TraceMode, constant_parameters, seed_parameters
from crowdcal.exceptions import InvalidDistributionError, InvalidInputError
from crowdcal.scenarios import Histogram20, sample_coefficient, wasserstein_1d
from crowdcal.tests.fixtures import central_difference, point_mass_weights

weights_20 = st.lists(st.floats(0.0, 1.0), min_size=20, max_size=20).filter(lambda w: sum(w) > 1e-3)


def times(weights) -> Histogram20:
    return Histogram20.evacuation_times(np.asarray(weights, dtype=float))


def scipy_distance(a: Histogram20, b: Histogram20) -> float:
    return wasserstein_distance(
        a.support, b.support, np.asarray(a.weights.value), np.asarray(b.weights.value)
    )


class TestHistogram(unittest.TestCase):
    """Construction, binning and normalization."""

    def test_supports(self):
        coefficients = Histogram20.coefficients(np.ones(20))
        self.assertAlmostEqual(coefficients.support[0], 0.1)
        self.assertAlmostEqual(coefficients.support[-1], 1.0)
        output = times(np.ones(20))
        self.assertAlmostEqual(output.bin_width, 3.25)
        self.assertAlmostEqual(output.support[0], 11.625)
        self.assertEqual(output.bins, 20)

    def test_from_samples_binning(self):
        hist = Histogram20.from_samples([10.0, 12.0, 74.9, 100.0, np.nan, 5.0], n=2)
        counts = np.asarray(hist.weights.value)
        self.assertEqual(counts[0], 3.0)
        self.assertEqual(counts[-1], 3.0)
        self.assertEqual(counts.sum(), 6.0)
        np.testing.assert_array_equal(hist.weights.tangent, np.zeros((20, 2)))

    def test_normalized_sums_to_one(self):
        probs = times(np.arange(1.0, 21.0)).normalized()
        self.assertAlmostEqual(float(probs.sum().value), 1.0)

    def test_normalized_rejects_bad_weights(self):
        for weights in (np.zeros(20), np.full(20, np.nan)):
            with self.assertRaises(InvalidDistributionError):
                times(weights).normalized()
        negative = np.ones(20)
        negative[3] = -0.5
        with self.assertRaises(InvalidDistributionError):
            times(negative).normalized()

    def test_min_weight_clamps_negative_weights(self):
        negative = np.ones(20)
        negative[3] = -0.5
        probs = np.asarray(times(negative).normalized(min_weight=1e-6).value)
        self.assertTrue(np.all(probs > 0.0))
        self.assertAlmostEqual(probs.sum(), 1.0)

    def test_mean(self):
        hist = Histogram20.coefficients([1.0, 1.0])
        self.assertAlmostEqual(float(hist.mean().value), 0.55)

    def test_mismatched_shapes_raise(self):
        with self.assertRaises(InvalidInputError):
            Histogram20(DualReal.constant(np.ones(3), 1), np.arange(4.0))
        with self.assertRaises(InvalidInputError):
            Histogram20.coefficients([1.0])


class TestWasserstein(unittest.TestCase):
    """Earth mover's distance on a shared support."""

    @settings(max_examples=100, deadline=None)
    @given(weights_20, weights_20, weights_20)
    def test_metric_axioms(self, a, b, c):
        ha, hb, hc = times(a), times(b), times(c)
        ab = float(wasserstein_1d(ha, hb).value)
        self.assertAlmostEqual(float(wasserstein_1d(ha, ha).value), 0.0, places=12)
        self.assertGreaterEqual(ab, 0.0)
        self.assertAlmostEqual(ab, float(wasserstein_1d(hb, ha).value), places=9)
        self.assertLessEqual(
            ab, float(wasserstein_1d(ha, hc).value) + float(wasserstein_1d(hc, hb).value) + 1e-9
        )

    def test_matches_scipy_on_seeded_triples(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            a, b, c = (times(rng.uniform(0.0, 1.0, 20)) for _ in range(3))
            for x, y in ((a, b), (b, c), (a, c)):
                self.assertAlmostEqual(float(wasserstein_1d(x, y).value), scipy_distance(x, y), delta=1e-9)

    def test_point_masses(self):
        a = times(point_mass_weights(20, 2))
        b = times(point_mass_weights(20, 7))
        self.assertAlmostEqual(float(wasserstein_1d(a, b).value), 5 * 3.25)

    def test_different_supports_raise(self):
        with self.assertRaises(InvalidInputError):
            wasserstein_1d(times(np.ones(20)), Histogram20.coefficients(np.ones(20)))

    def test_tangent_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        target = times(rng.uniform(0.0, 1.0, 20))
        theta = rng.uniform(0.2, 1.0, 20)

        def distance(params: DualReal) -> DualReal:
            reference = Histogram20.evacuation_times(DualReal.constant(target.weights.value, 20))
            return wasserstein_1d(Histogram20.evacuation_times(params), reference)

        ad = distance(seed_parameters(theta)).tangent
        fd = central_difference(lambda t: float(distance(constant_parameters(t)).value), theta)
        np.testing.assert_allclose(ad, fd, rtol=1e-5, atol=1e-8)


class TestSampleCoefficient(unittest.TestCase):
    """Inverse-transform draws through tracked branches."""

    def test_point_mass_always_drawn(self):
        hist = Histogram20.coefficients(point_mass_weights(20, 5))
        for u in (0.0, 0.3, 0.999):
            self.assertAlmostEqual(float(sample_coefficient(None, u, hist).value), hist.support[5])

    def test_u_out_of_range_raises(self):
        hist = Histogram20.coefficients(np.ones(20))
        for u in (-0.1, 1.0, 1.5):
            with self.assertRaises(InvalidInputError):
                sample_coefficient(None, u, hist)

    def test_draw_is_a_constant_with_recorded_conditions(self):
        hist = Histogram20.coefficients(seed_parameters(np.ones(20)))
        ctx = TraceContext(mode=TraceMode.DGO, n=20)
        drawn = sample_coefficient(ctx, 0.52, hist)
        self.assertAlmostEqual(float(drawn.value), hist.support[10])
        np.testing.assert_array_equal(drawn.tangent, np.zeros(20))
        self.assertEqual(len(ctx.registry), 11)
        last = ctx.registry.records()[-1].observations[0]
        self.assertTrue(np.any(last.tangent != 0.0))

    def test_ipa_sees_no_dependence(self):
        hist = Histogram20.coefficients(seed_parameters(np.arange(1.0, 21.0)))
        ctx = TraceContext(mode=TraceMode.IPA, n=20)
        drawn = sample_coefficient(ctx, 0.4, hist)
        np.testing.assert_array_equal(drawn.tangent, np.zeros(20))
        self.assertEqual(len(ctx.registry), 0)

    @pytest.mark.slow
    def test_draw_frequencies(self):
        weights = np.arange(1.0, 21.0)
        hist = Histogram20.coefficients(weights)
        draws = 100000
        rng = np.random.default_rng(2)
        counts = np.zeros(20)
        for u in rng.uniform(0.0, 1.0, draws):
            drawn = float(sample_coefficient(None, float(u), hist).value)
            counts[int(np.argmin(np.abs(hist.support - drawn)))] += 1
        p = weights / weights.sum()
        spread = 4.0 * np.sqrt(draws * p * (1.0 - p))
        self.assertTrue(np.all(np.abs(counts - draws * p) <= spread))


if __name__ == "__main__":
    unittest.main()

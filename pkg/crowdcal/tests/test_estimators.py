"""
Tests for the IPA, DGO/HYBRID and PGO gradient estimators.
Analytic oracles come from the synthetic programs with closed-form gradients.
"""

import unittest

import numpy as np
import pytest
from scipy.stats import norm

from crowdcal.estimators import (
    EstimatorConfig,
    EstimatorKind,
    GradientEstimate,
    estimate,
    estimate_dgo,
    estimate_ipa,
    estimate_pgo,
    gradient_mae,
    reference_gradient,
    sample_seeds,
)
from crowdcal.exceptions import EstimationError, InvalidConfigError, InvalidInputError
from crowdcal.scenarios.synthetic import heaviside, linear, product, quadratic, two_branch
from crowdcal.tests.fixtures import HEAVISIDE_THETAS, TRACKED_SITE, mixed_site_program, nan_program


def decomposes(est: GradientEstimate) -> bool:
    total = est.pathwise.copy()
    for c in est.contributions:
        total = total + c.contribution
    return np.array_equal(total, est.gradient)


class TestIPA(unittest.TestCase):
    """Pathwise derivative averages."""

    def test_heaviside_gradient_is_exactly_zero(self):
        for theta in HEAVISIDE_THETAS:
            cfg = EstimatorConfig(samples=200, mode=EstimatorKind.IPA, seed=1)
            est = estimate_ipa(heaviside(), [theta], cfg)
            np.testing.assert_array_equal(est.gradient, [0.0])
            self.assertEqual(est.contributions, [])

    def test_linear_program_is_exact(self):
        cfg = EstimatorConfig(samples=5, mode=EstimatorKind.IPA)
        est = estimate_ipa(linear(3), [0.1, 0.2, 0.3], cfg)
        np.testing.assert_array_equal(est.gradient, np.ones(3))

    def test_product_gradient_is_mean_noise(self):
        cfg = EstimatorConfig(samples=50, mode=EstimatorKind.IPA, seed=9)
        est = estimate_ipa(product(), [2.0], cfg)
        noise = [np.random.default_rng(s).standard_normal(1)[0] for s in sample_seeds(cfg)]
        self.assertAlmostEqual(float(est.gradient[0]), float(np.mean(noise)), places=12)

    def test_quadratic_is_unbiased(self):
        cfg = EstimatorConfig(samples=4000, mode=EstimatorKind.IPA, seed=2)
        est = estimate_ipa(quadratic(2), [1.0, -0.5], cfg)
        np.testing.assert_allclose(est.gradient, [2.0, -1.0], atol=0.15)
        self.assertEqual(est.evaluations, 4000)

    def test_wrong_mode_raises(self):
        with self.assertRaises(InvalidConfigError):
            estimate_ipa(linear(), [0.0], EstimatorConfig(mode=EstimatorKind.DGO))


class TestDGO(unittest.TestCase):
    """Pathwise mean plus per-branch jump terms."""

    def test_decomposition_identity(self):
        programs = [(heaviside(), [0.2]), (two_branch(), [0.5]), (mixed_site_program(), [0.1]), (quadratic(2), [1.0, 2.0])]
        for mode in (EstimatorKind.DGO, EstimatorKind.HYBRID):
            for prog, theta in programs:
                est = estimate_dgo(prog, theta, EstimatorConfig(samples=300, mode=mode, seed=5))
                self.assertTrue(decomposes(est), f"{prog.name} {mode.value}")

    def test_heaviside_contribution_terms(self):
        est = estimate_dgo(heaviside(), [0.0], EstimatorConfig(samples=2000, mode=EstimatorKind.DGO, seed=4))
        (c,) = est.contributions
        self.assertEqual(c.delta, -1.0)
        self.assertEqual(c.reach_fraction, 1.0)
        np.testing.assert_array_equal(c.condition_gradient, [1.0])
        self.assertAlmostEqual(c.density, norm.pdf(0.0), delta=0.07)
        np.testing.assert_array_equal(est.pathwise, [0.0])

    def test_hybrid_ignores_untracked_sites(self):
        cfg = EstimatorConfig(samples=300, mode=EstimatorKind.HYBRID, seed=8)
        est = estimate_dgo(mixed_site_program(), [0.0], cfg)
        self.assertTrue(est.contributions)
        self.assertTrue(all(c.site == TRACKED_SITE.name for c in est.contributions))

        full = estimate_dgo(mixed_site_program(), [0.0], EstimatorConfig(samples=300, mode=EstimatorKind.DGO, seed=8))
        self.assertGreater(len({c.site for c in full.contributions}), 1)

    def test_two_branch_nested_keys(self):
        est = estimate_dgo(two_branch(), [0.5], EstimatorConfig(samples=2000, mode=EstimatorKind.DGO, seed=3))
        self.assertEqual(est.branch_keys, 3)
        sites = sorted(c.site for c in est.contributions)
        self.assertEqual(sites, ["synthetic.second_step", "synthetic.second_step", "synthetic.step"])
        self.assertEqual(len({c.key for c in est.contributions}), 3)

    @pytest.mark.slow
    def test_two_branch_gradient(self):
        # the first key's jump uses one sample per side, so its delta is noisy; compare medians
        expected = -2.0 * norm.pdf(0.5)
        grads = [
            estimate_dgo(two_branch(), [0.5], EstimatorConfig(samples=5000, mode=EstimatorKind.DGO, seed=r)).gradient[0]
            for r in range(20)
        ]
        self.assertAlmostEqual(float(np.median(grads)), expected, delta=0.05 * abs(expected))

    def test_degenerate_densities_are_counted(self):
        est = estimate_dgo(heaviside(), [0.0], EstimatorConfig(samples=50, mode=EstimatorKind.DGO, seed=1))
        self.assertEqual(est.degenerate_kde, 0)
        narrow = EstimatorConfig(samples=50, mode=EstimatorKind.DGO, seed=1, bandwidth=1e-8)
        with self.assertLogs("crowdcal.estimators.kde", level="WARNING"):
            est = estimate_dgo(heaviside(), [0.0], narrow)
        self.assertEqual(est.degenerate_kde, 1)
        np.testing.assert_array_equal(est.gradient, [0.0])

    def test_single_sample_has_no_jump_terms(self):
        est = estimate_dgo(heaviside(), [0.0], EstimatorConfig(samples=1, mode=EstimatorKind.DGO))
        self.assertEqual(est.contributions, [])
        self.assertEqual(est.skipped_keys, est.branch_keys)
        np.testing.assert_array_equal(est.gradient, [0.0])

    def test_registry_cap_truncates(self):
        cfg = EstimatorConfig(samples=200, mode=EstimatorKind.DGO, registry_cap=1)
        est = estimate_dgo(two_branch(), [0.5], cfg)
        self.assertTrue(est.truncated)
        self.assertEqual(est.branch_keys, 1)

    def test_wrong_mode_raises(self):
        with self.assertRaises(InvalidConfigError):
            estimate_dgo(heaviside(), [0.0], EstimatorConfig(mode=EstimatorKind.IPA))

    def test_non_finite_output_raises(self):
        with self.assertRaises(EstimationError):
            estimate_dgo(nan_program(), [1.0], EstimatorConfig(samples=3, mode=EstimatorKind.DGO))

    def test_same_seed_same_estimate(self):
        cfg = EstimatorConfig(samples=100, mode=EstimatorKind.DGO, seed=17)
        a = estimate_dgo(two_branch(), [0.3], cfg)
        b = estimate_dgo(two_branch(), [0.3], cfg)
        np.testing.assert_array_equal(a.gradient, b.gradient)


class TestPGO(unittest.TestCase):
    """Gaussian-smoothing finite differences."""

    def test_zero_sigma_raises(self):
        with self.assertRaises(InvalidConfigError):
            estimate_pgo(linear(), [0.0], EstimatorConfig(mode=EstimatorKind.PGO, sigma=0.0))

    def test_negative_sigma_rejected_by_config(self):
        with self.assertRaises(InvalidConfigError):
            EstimatorConfig(mode=EstimatorKind.PGO, sigma=-0.1)

    def test_evaluation_count(self):
        cfg = EstimatorConfig(samples=7, sigma=0.1, mode=EstimatorKind.PGO)
        est = estimate_pgo(linear(), [0.0], cfg)
        self.assertEqual(est.evaluations, 14)
        self.assertEqual(cfg.evaluations_per_estimate, 14)

    def test_reference_gradient_on_quadratic(self):
        ref = reference_gradient(quadratic(), [1.0], samples=4000, sigma=0.01, seed=1)
        self.assertAlmostEqual(float(ref[0]), 2.0, delta=0.35)

    def test_unbiased_on_quadratic(self):
        # with shared noise the difference quotient has mean exactly 2 theta for (theta + omega)^2
        estimates = np.array([
            estimate_pgo(quadratic(), [1.0], EstimatorConfig(samples=10, sigma=0.1, mode=EstimatorKind.PGO, seed=r)).gradient[0]
            for r in range(100)
        ])
        standard_error = estimates.std(ddof=1) / np.sqrt(len(estimates))
        self.assertAlmostEqual(float(estimates.mean()), 2.0, delta=4.0 * standard_error)

    def test_smoothed_heaviside(self):
        sigma = 0.5
        scale = np.sqrt(1.0 + sigma ** 2)
        estimates = [
            estimate_pgo(heaviside(), [0.0], EstimatorConfig(samples=1000, sigma=sigma, mode=EstimatorKind.PGO, seed=r)).gradient[0]
            for r in range(10)
        ]
        expected = -norm.pdf(0.0) / scale
        self.assertAlmostEqual(float(np.median(estimates)), expected, delta=0.15 * abs(expected))


class TestDispatchAndErrors(unittest.TestCase):
    """Dispatcher, parameter checks and the MAE metric."""

    def test_dispatch(self):
        for kind in EstimatorKind:
            cfg = EstimatorConfig(samples=4, sigma=0.1 if kind == EstimatorKind.PGO else 0.0, mode=kind)
            self.assertEqual(estimate(heaviside(), [0.0], cfg).kind, kind)

    def test_mean_output_does_not_depend_on_mode(self):
        for prog, theta in [(two_branch(), [0.2]), (mixed_site_program(), [0.1]), (quadratic(2), [1.0, -1.0])]:
            outputs = [
                estimate(prog, theta, EstimatorConfig(samples=50, mode=kind, seed=6)).mean_output
                for kind in (EstimatorKind.IPA, EstimatorKind.DGO, EstimatorKind.HYBRID)
            ]
            self.assertEqual(outputs[0], outputs[1], prog.name)
            self.assertEqual(outputs[0], outputs[2], prog.name)

    def test_wrong_parameter_count_raises(self):
        with self.assertRaises(InvalidInputError):
            estimate(linear(2), [0.0], EstimatorConfig(mode=EstimatorKind.IPA))

    def test_sample_seeds_are_distinct(self):
        seeds = sample_seeds(EstimatorConfig(samples=1000))
        self.assertEqual(len(set(seeds)), 1000)

    def test_bad_config_values(self):
        with self.assertRaises(InvalidConfigError):
            EstimatorConfig(samples=0)
        with self.assertRaises(InvalidConfigError):
            EstimatorConfig(bandwidth=-1.0)

    def test_gradient_mae(self):
        self.assertAlmostEqual(gradient_mae([[1.0], [3.0]], [[0.0], [0.0]]), 2.0)
        self.assertAlmostEqual(gradient_mae([[1.0, 5.0]], [[0.0, 0.0]], coordinate=1), 5.0)
        with self.assertRaises(InvalidInputError):
            gradient_mae([[1.0]], [])
        with self.assertRaises(InvalidInputError):
            gradient_mae([], [])


class TestHeavisideOracle(unittest.TestCase):
    """1[theta + omega < 0] has gradient -phi(theta)."""

    def test_dgo_and_ipa(self):
        for theta in HEAVISIDE_THETAS:
            expected = -norm.pdf(theta)
            dgo = [
                estimate_dgo(heaviside(), [theta], EstimatorConfig(samples=1000, mode=EstimatorKind.DGO, seed=r)).gradient[0]
                for r in range(20)
            ]
            self.assertAlmostEqual(float(np.median(dgo)), expected, delta=0.15 * abs(expected), msg=f"theta={theta}")
            ipa = estimate_ipa(heaviside(), [theta], EstimatorConfig(samples=1000, mode=EstimatorKind.IPA))
            self.assertEqual(float(ipa.gradient[0]), 0.0)

    @pytest.mark.slow
    def test_pgo_small_sigma(self):
        # few crossings per estimate at this sigma; compare the median with a wide margin
        for theta in HEAVISIDE_THETAS:
            expected = -norm.pdf(theta)
            pgo = [
                estimate_pgo(heaviside(), [theta], EstimatorConfig(samples=10000, sigma=0.01, mode=EstimatorKind.PGO, seed=r)).gradient[0]
                for r in range(20)
            ]
            self.assertAlmostEqual(float(np.median(pgo)), expected, delta=0.3 * abs(expected), msg=f"theta={theta}")


if __name__ == "__main__":
    unittest.main()

"""
Tests for the condition density estimate at zero.
"""

import unittest

import numpy as np
from scipy.stats import gaussian_kde, norm

from crowdcal.estimators import kde_at_zero, silverman_bandwidth
from crowdcal.exceptions import InsufficientDataError


class TestKDE(unittest.TestCase):
    """Gaussian KDE with Silverman's bandwidth."""

    def setUp(self):
        self.values = np.random.default_rng(3).normal(0.4, 1.3, size=500)

    def test_silverman_rule(self):
        expected = 1.06 * np.std(self.values, ddof=1) * 500 ** (-0.2)
        self.assertAlmostEqual(silverman_bandwidth(self.values), expected)

    def test_matches_scipy_with_same_bandwidth(self):
        factor = 1.06 * len(self.values) ** (-0.2)
        expected = gaussian_kde(self.values, bw_method=factor).evaluate([0.0])[0]
        self.assertAlmostEqual(kde_at_zero(self.values), expected, places=10)

    def test_fixed_bandwidth(self):
        values = np.array([-0.5, 0.5])
        expected = norm.pdf(0.5 / 0.25) / 0.25
        self.assertAlmostEqual(kde_at_zero(values, 0.25), expected)

    def test_close_to_true_density(self):
        values = np.random.default_rng(11).standard_normal(5000)
        self.assertAlmostEqual(kde_at_zero(values), norm.pdf(0.0), delta=0.05)

    def test_degenerate_data_gives_zero(self):
        with self.assertLogs("crowdcal.estimators.kde", level="WARNING"):
            self.assertEqual(kde_at_zero([0.7, 0.7, 0.7]), 0.0)

    def test_fixed_bandwidth_diagnostics(self):
        with self.assertLogs("crowdcal.estimators.kde", level="DEBUG") as logs:
            kde_at_zero([-0.5, 0.5], 0.25)
        self.assertIn("rule of thumb", logs.output[0])

        with self.assertLogs("crowdcal.estimators.kde", level="WARNING") as logs:
            self.assertEqual(kde_at_zero([1.0, -2.0, 3.0], 1e-3), 0.0)
        self.assertIn("underflows", logs.output[0])

        with self.assertLogs("crowdcal.estimators.kde", level="WARNING"):
            self.assertAlmostEqual(kde_at_zero([0.7, 0.7], 1.0), norm.pdf(0.7))

    def test_too_few_values_raise(self):
        with self.assertRaises(InsufficientDataError):
            kde_at_zero([0.1])
        with self.assertRaises(InsufficientDataError):
            kde_at_zero([])

    def test_non_finite_values_raise(self):
        with self.assertRaises(InsufficientDataError):
            kde_at_zero([0.1, np.inf])


if __name__ == "__main__":
    unittest.main()

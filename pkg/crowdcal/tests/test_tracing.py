"""
Tests for traced branching: recording modes, path keys, scopes and the registry.
"""

import unittest

import numpy as np

from crowdcal.ad import (
    BranchObservation,
    BranchRegistry,
    BranchSite,
    PathKey,
    TraceContext,
    TraceMode,
    seed_parameters,
    traced_less_than,
)
from crowdcal.exceptions import TraceError
from crowdcal.tests.fixtures import TRACKED_SITE, UNTRACKED_SITE


class TestTracedLessThan(unittest.TestCase):
    """Branch outcome and recording per trace mode."""

    def test_outcome_does_not_depend_on_mode(self):
        x = seed_parameters([-0.5])[0]
        for mode in TraceMode:
            ctx = TraceContext(mode=mode, n=1)
            self.assertTrue(traced_less_than(ctx, x, TRACKED_SITE))
            self.assertFalse(traced_less_than(ctx, -x, TRACKED_SITE))
        self.assertTrue(traced_less_than(None, x, TRACKED_SITE))

    def test_plain_and_ipa_record_nothing(self):
        for mode in (TraceMode.PLAIN, TraceMode.IPA):
            ctx = TraceContext(mode=mode, n=1)
            traced_less_than(ctx, seed_parameters([1.0])[0], TRACKED_SITE)
            self.assertEqual(len(ctx.registry), 0)

    def test_dgo_records_value_and_tangent(self):
        p = seed_parameters([0.3, 0.0])
        ctx = TraceContext(mode=TraceMode.DGO, n=2, sample_id=4)
        traced_less_than(ctx, p[0] * 2.0 - 1.0, TRACKED_SITE)
        (record,) = ctx.registry.records()
        (obs,) = record.observations
        self.assertEqual(record.site, TRACKED_SITE.name)
        self.assertEqual(obs.sample_id, 4)
        self.assertAlmostEqual(obs.value, -0.4)
        np.testing.assert_allclose(obs.tangent, [2.0, 0.0])
        self.assertTrue(obs.taken)

    def test_hybrid_records_tracked_sites_only(self):
        x = seed_parameters([1.0])[0]
        hybrid = TraceContext(mode=TraceMode.HYBRID, n=1)
        traced_less_than(hybrid, x, TRACKED_SITE)
        traced_less_than(hybrid, x, UNTRACKED_SITE)
        self.assertEqual([r.site for r in hybrid.registry.records()], [TRACKED_SITE.name])

        dgo = TraceContext(mode=TraceMode.DGO, n=1)
        traced_less_than(dgo, x, TRACKED_SITE)
        traced_less_than(dgo, x, UNTRACKED_SITE)
        self.assertEqual(len(dgo.registry), 2)

    def test_plain_number_conditions_get_zero_tangent(self):
        ctx = TraceContext(mode=TraceMode.DGO, n=3)
        traced_less_than(ctx, 2.0, TRACKED_SITE)
        obs = ctx.registry.records()[0].observations[0]
        np.testing.assert_array_equal(obs.tangent, np.zeros(3))

    def test_array_conditions_are_sequential_encounters(self):
        ctx = TraceContext(mode=TraceMode.DGO, n=2)
        taken = traced_less_than(ctx, seed_parameters([-1.0, 1.0]), TRACKED_SITE)
        np.testing.assert_array_equal(taken, [True, False])
        # second element is keyed by the path extended with the first outcome
        self.assertEqual(len(ctx.registry), 2)

    def test_non_finite_condition_raises(self):
        ctx = TraceContext(mode=TraceMode.DGO, n=1, sample_id=2)
        with self.assertRaises(TraceError) as caught:
            traced_less_than(ctx, float("nan"), TRACKED_SITE)
        self.assertEqual(caught.exception.sample_id, 2)
        self.assertEqual(caught.exception.site, TRACKED_SITE.name)


class TestPathKeys(unittest.TestCase):
    """Keys identify the control-flow path."""

    def test_extension_depends_on_sign_and_site(self):
        root = PathKey.root()
        self.assertNotEqual(root.extend("a", True), root.extend("a", False))
        self.assertNotEqual(root.extend("a", True), root.extend("b", True))
        self.assertEqual(root.extend("a", True), PathKey.root().extend("a", True))

    def test_same_path_shares_a_record_across_samples(self):
        registry = BranchRegistry()
        for s, c in enumerate((-0.5, 0.5, 1.5)):
            ctx = TraceContext(mode=TraceMode.DGO, registry=registry, sample_id=s, n=1)
            traced_less_than(ctx, c, TRACKED_SITE)
        (record,) = registry.records()
        self.assertEqual(record.reach_count, 3)
        np.testing.assert_allclose(record.condition_values(), [-0.5, 0.5, 1.5])

    def test_scope_nests_and_restores(self):
        registry = BranchRegistry()
        ctx = TraceContext(mode=TraceMode.DGO, registry=registry, n=1)
        before = ctx.path
        with ctx.scope("agent0"):
            traced_less_than(ctx, 1.0, TRACKED_SITE)
        self.assertEqual(ctx.path, before)
        with ctx.scope("agent1"):
            traced_less_than(ctx, 1.0, TRACKED_SITE)
        self.assertEqual(len(registry), 2)

    def test_later_branches_depend_on_earlier_outcomes(self):
        registry = BranchRegistry()
        second = BranchSite("test.second")
        for s, first in enumerate((-1.0, 1.0)):
            ctx = TraceContext(mode=TraceMode.DGO, registry=registry, sample_id=s, n=1)
            traced_less_than(ctx, first, TRACKED_SITE)
            traced_less_than(ctx, 0.5, second)
        second_records = [r for r in registry.records() if r.site == second.name]
        self.assertEqual(len(second_records), 2)


class TestBranchRegistry(unittest.TestCase):
    """Capacity, truncation and merging."""

    def _obs(self, sample_id=0, value=1.0):
        return BranchObservation(sample_id=sample_id, value=value, tangent=np.zeros(1), taken=value < 0)

    def test_cap_drops_new_keys_and_flags_truncation(self):
        registry = BranchRegistry(cap=2)
        root = PathKey.root()
        for label in ("a", "b", "c", "d"):
            registry.observe(root.nest(label), "site", self._obs())
        self.assertEqual(len(registry), 2)
        self.assertEqual(registry.dropped, 2)
        self.assertTrue(registry.truncated)

    def test_existing_keys_accept_observations_at_cap(self):
        registry = BranchRegistry(cap=1)
        key = PathKey.root()
        registry.observe(key, "site", self._obs(0))
        registry.observe(key, "site", self._obs(1))
        self.assertFalse(registry.truncated)
        self.assertEqual(registry.records()[0].reach_count, 2)

    def test_merge(self):
        a, b = BranchRegistry(), BranchRegistry()
        key = PathKey.root()
        a.observe(key, "site", self._obs(0, -1.0))
        b.observe(key, "site", self._obs(1, 1.0))
        b.observe(key.nest("x"), "site", self._obs(1, 2.0))
        a.merge(b)
        self.assertEqual(len(a), 2)
        merged = [r for r in a.records() if r.key == key][0]
        self.assertEqual(merged.reach_count, 2)


if __name__ == "__main__":
    unittest.main()

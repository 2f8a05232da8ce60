"""
Tests for the command-line interface.
"""

import os
import unittest

import pandas as pd
from click.testing import CliRunner

from crowdcal.cli import main
from crowdcal.scenarios import load_reference
from crowdcal.tests.fixtures import remove_dir, temp_dir


class TestCLI(unittest.TestCase):
    """Commands run end to end on small inputs."""

    def setUp(self):
        self.dir = temp_dir()
        self.runner = CliRunner()

    def tearDown(self):
        remove_dir(self.dir)

    def _invoke(self, *args: str):
        return self.runner.invoke(main, ["-q", *args], catch_exceptions=False)

    def test_fidelity(self):
        result = self._invoke(
            "fidelity", "--scenario", "heaviside", "--points", "3", "--samples", "20",
            "--estimators", "ipa,dgo", "--output-dir", self.dir,
        )
        self.assertEqual(result.exit_code, 0, result.output)
        frame = pd.read_csv(os.path.join(self.dir, "fidelity_heaviside.csv"))
        self.assertEqual(len(frame), 3)
        self.assertTrue(os.path.exists(os.path.join(self.dir, "fidelity_heaviside_mae.csv")))

    def test_make_reference_with_config_file(self):
        config = os.path.join(self.dir, "small.ini")
        with open(config, "w", encoding="utf-8") as f:
            f.write("[bottleneck]\nagents = 2\nduration = 2.0\n")
        output = os.path.join(self.dir, "refs", "bottleneck.csv")
        result = self.runner.invoke(
            main,
            ["--config", config, "-q", "make-reference", "--scenario", "bottleneck-position", "--seeds", "2", "--output", output],
            catch_exceptions=False,
        )
        self.assertEqual(result.exit_code, 0, result.output)
        record = load_reference(output)
        self.assertEqual(record.scenario, "bottleneck-position")
        self.assertEqual(len(record.metadata["seeds"]), 2)
        self.assertEqual(record.metadata["config"]["agents"], 2)

    def test_sweep_then_replay(self):
        result = self._invoke(
            "sweep", "--scenario", "sphere", "--methods", "gd-ipa", "--macroreplications", "1",
            "--microreplications", "1", "--max-evaluations", "20", "--post-seeds", "2",
            "--budget-seconds", "0", "--output-dir", self.dir,
        )
        self.assertEqual(result.exit_code, 0, result.output)
        manifest = pd.read_csv(os.path.join(self.dir, "manifest.csv"))
        self.assertEqual(len(manifest), 4)
        self.assertTrue((manifest["status"] == "completed").all())

        run_id = manifest["run_id"].iloc[0]
        replayed = self._invoke("replay", run_id, "--output-dir", self.dir)
        self.assertEqual(replayed.exit_code, 0, replayed.output)
        self.assertIn("reproduced exactly", replayed.output)

    def test_missing_reference_exits_with_error(self):
        result = self._invoke("sweep", "--scenario", "exit-selection", "--methods", "ga", "--output-dir", self.dir)
        self.assertEqual(result.exit_code, 1)

    def test_unknown_run_exits_with_error(self):
        result = self._invoke("replay", "nope-m00", "--output-dir", self.dir)
        self.assertEqual(result.exit_code, 1)

    def test_bad_config_file(self):
        config = os.path.join(self.dir, "bad.ini")
        with open(config, "w", encoding="utf-8") as f:
            f.write("[nonsense]\nx = 1\n")
        result = self.runner.invoke(main, ["--config", config, "replay", "x", "--output-dir", self.dir])
        self.assertNotEqual(result.exit_code, 0)


if __name__ == "__main__":
    unittest.main()

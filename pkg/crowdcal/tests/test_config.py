"""
Tests for configuration loading: defaults, INI files and environment overrides.
"""

import logging
import os
import unittest
from unittest.mock import patch

from crowdcal.config import LoggingConfig, Settings, configure_logging, load_config
from crowdcal.exceptions import ConfigError
from crowdcal.tests.fixtures import remove_dir, temp_dir


class TestConfig(unittest.TestCase):
    """Layered settings: defaults, file, environment."""

    def setUp(self):
        self.dir = temp_dir()

    def tearDown(self):
        remove_dir(self.dir)

    def _write(self, text: str) -> str:
        path = os.path.join(self.dir, "crowdcal.ini")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_defaults(self):
        settings = Settings()
        self.assertEqual(settings.force.a_agent, 3.0)
        self.assertEqual(settings.force.dt, 0.1)
        self.assertEqual(settings.bottleneck.door_width, 4.0)
        self.assertEqual(settings.exit_selection.bins, 20)
        self.assertEqual(settings.harness.master_seed, 20240101)
        self.assertIsNone(settings.exit_selection.reference_path)

    def test_file_overrides(self):
        path = self._write(
            "[force]\na_agent = 4.5\nfull_dgo = yes\n\n"
            "[harness]\nshow_progress = no\nworkers = 4\n\n"
            "[exit_selection]\nreference_path = refs/exit.csv\n"
        )
        with patch.dict(os.environ, {}, clear=True):
            settings = load_config(path)
        self.assertEqual(settings.force.a_agent, 4.5)
        self.assertTrue(settings.force.full_dgo)
        self.assertFalse(settings.harness.show_progress)
        self.assertEqual(settings.harness.workers, 4)
        self.assertEqual(settings.exit_selection.reference_path, "refs/exit.csv")
        self.assertEqual(settings.force.b_agent, 0.2)

    def test_environment_beats_file(self):
        path = self._write("[bottleneck]\nagents = 5\n")
        env = {"CROWDCAL_BOTTLENECK_AGENTS": "7", "CROWDCAL_LOGGING_LOG_LEVEL": "DEBUG"}
        with patch.dict(os.environ, env, clear=True):
            settings = load_config(path)
        self.assertEqual(settings.bottleneck.agents, 7)
        self.assertEqual(settings.logging.log_level, "DEBUG")

    def test_errors(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.dir, "missing.ini"))
        with self.assertRaises(ConfigError):
            load_config(self._write("[simulation]\nagents = 3\n"))
        with self.assertRaises(ConfigError):
            load_config(self._write("[force]\nspeed = 3\n"))
        with self.assertRaises(ConfigError):
            load_config(self._write("[bottleneck]\nagents = many\n"))

    def test_flat_dict(self):
        flat = Settings().to_dict()
        self.assertEqual(flat["force.mass"], 80.0)
        self.assertEqual(flat["harness.registry_cap"], 10000)

    def test_rebuild_from_flat_dict(self):
        with patch.dict(os.environ, {"CROWDCAL_BOTTLENECK_AGENTS": "7", "CROWDCAL_LOGGING_LOG_LEVEL": "DEBUG"}):
            settings = load_config()
        self.assertEqual(Settings.from_dict(settings.to_dict()), settings)
        self.assertEqual(Settings.from_dict({"bottleneck.agents": 2}).bottleneck.agents, 2)
        with self.assertRaises(ConfigError):
            Settings.from_dict({"bottleneck.speed": 1.0})
        with self.assertRaises(ConfigError):
            Settings.from_dict({"simulation.agents": 1})

    def test_configure_logging(self):
        log_file = os.path.join(self.dir, "crowdcal.log")
        configure_logging(LoggingConfig(log_level="DEBUG", log_file=log_file))
        root = logging.getLogger()
        try:
            self.assertEqual(root.level, logging.DEBUG)
            logging.getLogger("crowdcal.test").debug("hello")
            self.assertTrue(os.path.exists(log_file))
        finally:
            for handler in list(root.handlers):
                handler.close()
                root.removeHandler(handler)


if __name__ == "__main__":
    unittest.main()

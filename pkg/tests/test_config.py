"""
Unit tests for run configuration and the parameter ledger
"""

import os
import sys
import tempfile
import unittest
from pathlib import Path

import yaml

# Add repository root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.adoption import VelocityMode
from src.capmodel import AbilityCategory
from src.config import (
    DEFAULT_LEDGER,
    OUTPUT_DIR_ENV,
    Overrides,
    apply_overrides,
    load_ledger,
    load_run_config,
)
from src.exceptions import ConfigError


class TestLedger(unittest.TestCase):
    """Test cases for the shipped parameter ledger."""

    @classmethod
    def setUpClass(cls):
        cls.ledger = load_ledger(DEFAULT_LEDGER)

    def test_calibrated_values(self):
        self.assertEqual(self.ledger.version, "2026.1")
        self.assertEqual(self.ledger.tiers[1].k, 0.85)
        self.assertEqual(self.ledger.tiers[3].tau0, 2025.75)
        self.assertEqual(self.ledger.region_ids, ["seattle", "sf_bay", "austin", "new_york", "boston"])
        self.assertEqual(self.ledger.thresholds.moderate, 0.35)
        self.assertEqual(self.ledger.grid_years, (2025.0, 2026.0, 2027.0, 2030.0))
        self.assertEqual(self.ledger.major_groups["43"], "Admin/Clerical")

    def test_analysis_settings(self):
        self.assertEqual([s.name for s in self.ledger.scenarios], ["conservative", "baseline", "aggressive"])
        self.assertEqual(self.ledger.sensitivity.cap_category, AbilityCategory.COGNITIVE)
        self.assertEqual(self.ledger.sensitivity.reclassify.region, "seattle")
        self.assertEqual(self.ledger.reinstatement.base_workers, 580_000)
        self.assertEqual(self.ledger.report.top_n, 20)

    def test_quarter_years(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            document = yaml.safe_load(DEFAULT_LEDGER.read_text())
            document["grid_years"] = ["2025Q1", "2027"]
            path = Path(tmpdir) / 'ledger.yaml'
            path.write_text(yaml.safe_dump(document))
            self.assertEqual(load_ledger(path).grid_years, (2025.125, 2027.0))

    def test_invalid_tier(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            document = yaml.safe_load(DEFAULT_LEDGER.read_text())
            document["tiers"][1]["L"] = 1.4
            path = Path(tmpdir) / 'ledger.yaml'
            path.write_text(yaml.safe_dump(document))
            with self.assertRaises(ConfigError) as ctx:
                load_ledger(path)
            self.assertTrue(ctx.exception.field.startswith("ledger.tiers"))

    def test_missing_ledger(self):
        with self.assertRaises(ConfigError) as ctx:
            load_ledger("/nonexistent/parameters.yaml")
        self.assertEqual(ctx.exception.field, "ledger")


class TestOverrides(unittest.TestCase):
    """Test cases for apply_overrides."""

    @classmethod
    def setUpClass(cls):
        cls.ledger = load_ledger(DEFAULT_LEDGER)

    def test_tier_override(self):
        ledger = apply_overrides(self.ledger, Overrides(tiers={1: {"k": 0.9}}))
        self.assertEqual(ledger.tiers[1].k, 0.9)
        self.assertEqual(ledger.tiers[1].L, 0.92)
        self.assertEqual(ledger.tiers[2], self.ledger.tiers[2])
        # the shipped ledger is untouched
        self.assertEqual(self.ledger.tiers[1].k, 0.85)

    def test_invalid_tier_override(self):
        with self.assertRaises(ConfigError) as ctx:
            apply_overrides(self.ledger, Overrides(tiers={1: {"L": 1.5}}))
        self.assertEqual(ctx.exception.field, "overrides.tiers.1.L")
        with self.assertRaises(ConfigError):
            apply_overrides(self.ledger, Overrides(tiers={4: {"k": 0.5}}))

    def test_threshold_override(self):
        ledger = apply_overrides(self.ledger, Overrides(thresholds={"high": 0.7}))
        self.assertEqual((ledger.thresholds.moderate, ledger.thresholds.high), (0.35, 0.7))
        with self.assertRaises(ConfigError) as ctx:
            apply_overrides(self.ledger, Overrides(thresholds={"moderate": 0.8}))
        self.assertEqual(ctx.exception.field, "overrides.thresholds")

    def test_years_override(self):
        ledger = apply_overrides(self.ledger, Overrides(years=["2025Q1", "2030"]))
        self.assertEqual(ledger.grid_years, (2025.125, 2030.0))
        with self.assertRaises(ConfigError):
            apply_overrides(self.ledger, Overrides(years=["soon"]))

    def test_no_overrides(self):
        self.assertEqual(apply_overrides(self.ledger, Overrides()), self.ledger)


class TestRunConfig(unittest.TestCase):
    """Test cases for load_run_config precedence and path checks."""

    def test_defaults(self):
        config = load_run_config(env={})
        self.assertEqual(config.output_dir, Path("output"))
        self.assertEqual(config.velocity_mode, VelocityMode.RESIDENCE)
        self.assertEqual(config.ledger, DEFAULT_LEDGER)
        self.assertFalse(config.fixture.enabled)
        self.assertEqual(config.reports_dir, Path("output") / "reports")

    def test_file_paths_resolve_next_to_file(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / 'run.yaml'
            path.write_text(
                "output_dir: out\n"
                "velocity_mode: remote_adjusted\n"
                "paths:\n"
                "  task_corpus: data/tasks.tsv\n"
                "  external_indices:\n"
                "    aioe: indices/aioe.csv\n"
            )
            config = load_run_config(path, env={})
            base = Path(tmpdir).resolve()
            self.assertEqual(config.output_dir, base / "out")
            self.assertEqual(config.paths.task_corpus, base / "data" / "tasks.tsv")
            self.assertEqual(config.paths.external_indices["aioe"], base / "indices" / "aioe.csv")
            self.assertEqual(config.velocity_mode, VelocityMode.REMOTE_ADJUSTED)

    def test_precedence(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / 'run.yaml'
            path.write_text("output_dir: from_file\nparallelism: 2\n")
            env = {OUTPUT_DIR_ENV: "/tmp/from_env"}
            self.assertEqual(load_run_config(path, env=env).output_dir, Path("/tmp/from_env"))
            config = load_run_config(path, flags={"output_dir": "/tmp/from_flag", "parallelism": None}, env=env)
            self.assertEqual(config.output_dir, Path("/tmp/from_flag"))
            self.assertEqual(config.parallelism, 2)

    def test_nested_flags_merge(self):
        config = load_run_config(flags={"fixture": {"enabled": True, "seed": 3}}, env={})
        self.assertTrue(config.fixture.enabled)
        self.assertEqual(config.fixture.seed, 3)
        self.assertEqual(config.fixture.n_occupations, 36)

    def test_invalid_value(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(flags={"parallelism": 0}, env={})
        self.assertEqual(ctx.exception.field, "config.parallelism")

    def test_missing_calibration_file(self):
        config = load_run_config(flags={"paths": {"ability_map": "/nonexistent/ability_map.tsv"}, "fixture": {"enabled": True}}, env={})
        with self.assertRaises(ConfigError) as ctx:
            config.validate_paths()
        self.assertEqual(ctx.exception.field, "paths.ability_map")
        self.assertTrue(str(ctx.exception).startswith("[config] paths.ability_map"))

    def test_corpus_required_without_fixture(self):
        config = load_run_config(env={})
        with self.assertRaises(ConfigError) as ctx:
            config.validate_paths()
        self.assertEqual(ctx.exception.field, "paths.task_corpus")
        load_run_config(flags={"fixture": {"enabled": True}}, env={}).validate_paths()

    def test_missing_ratings_file(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            paths = {}
            for name in ("task_corpus", "ability_profiles", "employment"):
                paths[name] = str(Path(tmpdir) / f"{name}.txt")
                Path(paths[name]).write_text("x\n")
            paths["task_ratings"] = str(Path(tmpdir) / "Task Ratings.txt")
            config = load_run_config(flags={"paths": paths}, env={})
            with self.assertRaises(ConfigError) as ctx:
                config.validate_paths()
            self.assertEqual(ctx.exception.field, "paths.task_ratings")

            Path(paths["task_ratings"]).write_text("x\n")
            config.validate_paths()

    def test_area_codes_read_as_text(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / 'run.yaml'
            path.write_text("oews_areas:\n  41860: sf_bay\n  '35620': new_york\n")
            config = load_run_config(path, env={})
            self.assertEqual(config.oews_areas, {"41860": "sf_bay", "35620": "new_york"})

    def test_missing_config_file(self):
        with self.assertRaises(ConfigError):
            load_run_config("/nonexistent/run.yaml", env={})


def run_tests():
    """Run all tests."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestLedger, TestOverrides, TestRunConfig):
        suite.addTests(loader.loadTestsFromTestCase(case))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return 0 if result.wasSuccessful() else 1


if __name__ == '__main__':
    sys.exit(run_tests())

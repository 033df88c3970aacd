"""
Unit tests for AI capability scoring
"""

import io
import os
import sys
import unittest
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st

# Add repository root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.capmodel import (
    AbilityCategory,
    AbilityMap,
    AbilityScore,
    TextModifierRule,
    base_cap,
    cap_for_task,
    load_ability_map,
    load_modifier_rules,
    modifier_factor,
    occupation_caps,
    shift_category,
)
from src.exceptions import EmptyInputError, InvariantError, UnmappedAbilityError
from src.ingest import FIXTURE_ABILITIES, AbilityProfile, TaskRecord

DEFAULTS = Path(__file__).parent.parent / 'data' / 'defaults'


def _task(text, soc="13-2041", task_id="t1"):
    return TaskRecord(soc_code=soc, task_id=task_id, text=text, importance=3.0, relevance=50.0)


class TestAbilityMap(unittest.TestCase):
    """Test cases for the ability map."""

    @classmethod
    def setUpClass(cls):
        cls.ability_map = load_ability_map(DEFAULTS / 'ability_map.tsv')

    def test_shipped_map(self):
        self.assertEqual(len(self.ability_map), 11)
        self.assertEqual(self.ability_map.score("Written Comprehension"), 0.95)
        self.assertEqual(self.ability_map.score("Static Strength"), 0.0)
        self.assertEqual(self.ability_map.lookup()["Manual Dexterity"].category, AbilityCategory.PSYCHOMOTOR)

    def test_unknown_ability(self):
        with self.assertRaises(UnmappedAbilityError):
            self.ability_map.score("Telepathy")

    def test_score_out_of_range_is_rejected(self):
        source = io.StringIO("ability_name\tcategory\tai_score\tsource_note\nOral Expression\tCognitive\t1.2\t-\n")
        with self.assertRaises(InvariantError):
            load_ability_map(source)

    def test_duplicate_names_are_rejected(self):
        source = io.StringIO("ability_name\tcategory\tai_score\nA\tCognitive\t0.2\nA\tSensory\t0.3\n")
        with self.assertRaises(InvariantError):
            load_ability_map(source)

    def test_shift_category_clamps(self):
        shifted = shift_category(self.ability_map, "Cognitive", 1.10)
        self.assertEqual(shifted.score("Written Comprehension"), 1.0)
        self.assertAlmostEqual(shifted.score("Mathematical Reasoning"), 0.825)
        self.assertEqual(shifted.score("Near Vision"), 0.30)
        # the original is untouched
        self.assertEqual(self.ability_map.score("Written Comprehension"), 0.95)


class TestBaseCap(unittest.TestCase):
    """Test cases for base_cap."""

    @classmethod
    def setUpClass(cls):
        cls.ability_map = load_ability_map(DEFAULTS / 'ability_map.tsv')

    def test_importance_weighted_mean(self):
        profile = AbilityProfile(
            soc_code="13-2041",
            entries=(("Written Comprehension", 4.0), ("Deductive Reasoning", 3.0), ("Static Strength", 1.0)),
        )
        self.assertAlmostEqual(base_cap(profile, self.ability_map), (4 * 0.95 + 3 * 0.88) / 8.0)

    def test_order_independent(self):
        entries = (("Written Comprehension", 4.0), ("Near Vision", 2.5), ("Memorization", 3.3))
        first = AbilityProfile(soc_code="13-2041", entries=entries)
        second = AbilityProfile(soc_code="13-2041", entries=tuple(reversed(entries)))
        self.assertEqual(base_cap(first, self.ability_map), base_cap(second, self.ability_map))

    def test_unmapped_ability_raises_by_default(self):
        profile = AbilityProfile(soc_code="13-2041", entries=(("Written Comprehension", 4.0), ("Telepathy", 2.0)))
        with self.assertRaises(UnmappedAbilityError) as ctx:
            base_cap(profile, self.ability_map)
        self.assertEqual(ctx.exception.ability, "Telepathy")
        self.assertEqual(ctx.exception.soc_code, "13-2041")

    def test_unmapped_ability_dropped_when_allowed(self):
        profile = AbilityProfile(soc_code="13-2041", entries=(("Written Comprehension", 4.0), ("Telepathy", 2.0)))
        self.assertAlmostEqual(base_cap(profile, self.ability_map, drop_unmapped=True), 0.95)

    def test_empty_profile(self):
        with self.assertRaises(EmptyInputError):
            base_cap(AbilityProfile(soc_code="13-2041", entries=()), self.ability_map)

    def test_all_unmapped_is_empty(self):
        profile = AbilityProfile(soc_code="13-2041", entries=(("Telepathy", 2.0),))
        with self.assertRaises(EmptyInputError):
            base_cap(profile, self.ability_map, drop_unmapped=True)

    @given(
        st.lists(
            st.tuples(st.sampled_from(FIXTURE_ABILITIES), st.floats(min_value=1.0, max_value=5.0)),
            min_size=1,
            max_size=11,
            unique_by=lambda e: e[0],
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_cap_in_unit_interval(self, entries):
        profile = AbilityProfile(soc_code="13-2041", entries=tuple(entries))
        value = base_cap(profile, self.ability_map)
        self.assertGreaterEqual(value, 0.0)
        self.assertLessEqual(value, 1.0)


class TestModifiers(unittest.TestCase):
    """Test cases for task-text modifier rules."""

    @classmethod
    def setUpClass(cls):
        cls.ability_map = load_ability_map(DEFAULTS / 'ability_map.tsv')
        cls.rules = load_modifier_rules(DEFAULTS / 'text_modifiers.tsv')
        cls.profile = AbilityProfile(soc_code="43-9021", entries=(("Written Comprehension", 4.0), ("Near Vision", 4.0)))

    def test_shipped_rules(self):
        self.assertEqual(len(self.rules), 8)
        self.assertEqual({r.direction for r in self.rules}, {"boost", "reduce"})

    def test_direction_must_match_magnitude(self):
        with self.assertRaises(ValueError):
            TextModifierRule(pattern="compile", direction="boost", magnitude=0.9)
        with self.assertRaises(InvariantError):
            load_modifier_rules(io.StringIO("pattern\tdirection\tmagnitude\nlift\treduce\t1.3\n"))

    def test_factor_multiplies_matching_rules(self):
        self.assertAlmostEqual(modifier_factor("Perform DATA ENTRY and compile totals", self.rules), 1.15 * 1.10)
        self.assertEqual(modifier_factor("Review statements", self.rules), 1.0)

    def test_boost_is_clamped(self):
        profile = AbilityProfile(soc_code="43-9021", entries=(("Written Comprehension", 4.0),))
        rules = [TextModifierRule(pattern="entry", direction="boost", magnitude=2.0)]
        self.assertEqual(cap_for_task(_task("Data entry"), profile, self.ability_map, rules), 1.0)

    def test_reduce_rule(self):
        base = base_cap(self.profile, self.ability_map)
        self.assertAlmostEqual(base, 0.625)
        cap = cap_for_task(_task("Lift cartons"), self.profile, self.ability_map, self.rules)
        self.assertAlmostEqual(cap, 0.625 * 0.70)

    def test_occupation_caps(self):
        tasks = [_task("Compile totals", task_id="a"), _task("Review files", task_id="b")]
        caps = occupation_caps(tasks, self.profile, self.ability_map, self.rules)
        self.assertEqual(len(caps), 2)
        self.assertAlmostEqual(caps[0], 0.625 * 1.10)
        self.assertAlmostEqual(caps[1], 0.625)

    def test_explicit_map_rows(self):
        ability_map = AbilityMap(
            rows=(AbilityScore(ability_name="X", category="Sensory", ai_score=0.4),)
        )
        profile = AbilityProfile(soc_code="13-2041", entries=(("X", 2.0),))
        self.assertAlmostEqual(base_cap(profile, ability_map), 0.4)


def run_tests():
    """Run all tests."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestAbilityMap, TestBaseCap, TestModifiers):
        suite.addTests(loader.loadTestsFromTestCase(case))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return 0 if result.wasSuccessful() else 1


if __name__ == '__main__':
    sys.exit(run_tests())

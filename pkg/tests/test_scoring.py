"""
Unit tests for ATE scoring
"""

import math
import os
import sys
import tempfile
import unittest
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st

# Add repository root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.adoption import DEFAULT_TIERS, AdoptionModel, RegionConfig, VelocityMode, logistic_v
from src.capmodel import load_ability_map, load_modifier_rules
from src.covmodel import load_rubric, task_covs
from src.exceptions import EmptyInputError, InvariantError, WeightUndefinedError
from src.ingest import AbilityProfile, TaskRecord, generate_fixture_corpus, parse_telework, parse_tier_shares
from src.scoring import (
    AteRecord,
    OccupationScore,
    RiskClass,
    RiskThresholds,
    ScoringInputs,
    aggregate_share,
    ate,
    base_ate,
    classify_risk,
    compute_weights,
    histogram,
    read_occupation_scores,
    reclassify,
    regional_share_table,
    risk_counts,
    score_corpus,
    score_grid,
    score_occupation,
    select,
    top_n,
    write_occupation_scores,
)

DEFAULTS = Path(__file__).parent.parent / 'data' / 'defaults'
SF_BAY = RegionConfig(region_id="sf_bay", tier=1)
NEW_YORK = RegionConfig(region_id="new_york", tier=3)


def _task(task_id, text, importance, relevance, soc="41-3091", title=None):
    return TaskRecord(
        soc_code=soc, task_id=task_id, text=text, importance=importance, relevance=relevance, title=title
    )


def _inputs(profiles):
    return ScoringInputs(
        ability_map=load_ability_map(DEFAULTS / 'ability_map.tsv'),
        rubric=load_rubric(DEFAULTS / 'cov_rubric.yaml'),
        profiles={p.soc_code: p for p in profiles},
        rules=tuple(load_modifier_rules(DEFAULTS / 'text_modifiers.tsv')),
    )


def _fixture_inputs(corpus):
    return _inputs(corpus.profiles)


class TestWeights(unittest.TestCase):
    """Test cases for compute_weights and base_ate."""

    def test_weights_normalized(self):
        tasks = [_task("a", "Sell", 4.0, 100.0), _task("b", "File", 3.0, 50.0)]
        weights = compute_weights(tasks)
        self.assertAlmostEqual(weights[0].w, 400 / 550)
        self.assertAlmostEqual(weights[1].w, 150 / 550)
        self.assertAlmostEqual(math.fsum(w.w for w in weights), 1.0, places=12)

    def test_zero_relevance_task_has_zero_weight(self):
        weights = compute_weights([_task("a", "Sell", 4.0, 0.0), _task("b", "File", 3.0, 50.0)])
        self.assertEqual(weights[0].w, 0.0)
        self.assertEqual(weights[1].w, 1.0)

    def test_all_zero_is_undefined(self):
        with self.assertRaises(WeightUndefinedError):
            compute_weights([_task("a", "Sell", 4.0, 0.0)])

    def test_empty(self):
        with self.assertRaises(EmptyInputError):
            compute_weights([])

    def test_base_ate_length_mismatch(self):
        with self.assertRaises(InvariantError):
            base_ate([0.5, 0.5], [0.5], [1.0, 1.0])

    def test_base_ate_single_task(self):
        self.assertAlmostEqual(base_ate([1.0], [0.8], [0.75]), 0.6)

    @given(st.lists(st.tuples(st.floats(1.0, 5.0), st.floats(0.1, 100.0), st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=20))
    @settings(max_examples=100, deadline=None)
    def test_base_ate_in_unit_interval(self, rows):
        tasks = [_task(f"t{i}", "Do", imp, rel) for i, (imp, rel, _, _) in enumerate(rows)]
        weights = compute_weights(tasks)
        self.assertAlmostEqual(math.fsum(w.w for w in weights), 1.0, places=9)
        value = base_ate(weights, [r[2] for r in rows], [r[3] for r in rows])
        self.assertGreaterEqual(value, 0.0)
        self.assertLessEqual(value, 1.0)


class TestOccupationScoring(unittest.TestCase):
    """Test cases for score_occupation and ate."""

    @classmethod
    def setUpClass(cls):
        cls.profile = AbilityProfile(
            soc_code="41-3091", entries=(("Written Comprehension", 4.0), ("Near Vision", 4.0))
        )
        cls.inputs = _inputs([cls.profile])
        cls.tasks = [
            _task("a", "Negotiate prices or terms of sales or service agreements", 4.0, 100.0, title="Sales Representative"),
            _task("b", "Maintain customer records using automated systems", 3.0, 50.0, title="Sales Representative"),
        ]

    def test_worked_example(self):
        score = score_occupation(self.tasks, self.inputs, title="Sales Representative")
        expected = (400 * 0.625 * 0.75 + 150 * 0.625 * 1.0) / 550
        self.assertAlmostEqual(score.base_score, expected)
        self.assertEqual(score.major_group, "41")
        self.assertEqual([c.cov for c in score.components], [0.75, 1.0])

        record = ate(score.base_score, SF_BAY, 2027, occupation=score)
        self.assertAlmostEqual(record.ate, expected * 0.83895, places=4)
        self.assertEqual(record.risk, RiskClass.MODERATE)
        self.assertEqual(record.soc_code, "41-3091")
        self.assertEqual(record.title, "Sales Representative")

    def test_table_values_for_fixed_base(self):
        values = [round(ate(0.512, SF_BAY, tau).ate, 2) for tau in (2025.0, 2027, 2030)]
        self.assertEqual(values, [0.31, 0.43, 0.47])
        self.assertEqual(round(ate(0.5006, NEW_YORK, 2027).ate, 2), 0.25)

    def test_components_follow_task_coverage(self):
        score = score_occupation(self.tasks, self.inputs)
        covs = task_covs(self.tasks, self.inputs.rubric)
        self.assertEqual([(c.task_id, c.cov) for c in score.components], [(r.task_id, r.cov) for r in covs])

    def test_far_past_time_point_scores_zero(self):
        score = OccupationScore(soc_code="41-3091", major_group="41", base_score=0.5)
        record = ate(0.5, SF_BAY, -1.0e6, occupation=score)
        self.assertEqual(record.velocity, 0.0)
        self.assertEqual(record.ate, 0.0)
        self.assertEqual(record.risk, RiskClass.LOW)

    def test_decomposition_enforced(self):
        with self.assertRaises(ValueError):
            AteRecord(
                soc_code="41-3091", region_id="sf_bay", tau=2027, velocity=0.8, base_score=0.5, ate=0.5,
                risk=RiskClass.MODERATE,
            )

    def test_base_out_of_range(self):
        with self.assertRaises(InvariantError):
            ate(1.2, SF_BAY, 2027)

    def test_missing_profile(self):
        tasks = [_task("a", "Sell", 3.0, 50.0, soc="11-1011")]
        with self.assertRaises(InvariantError):
            score_occupation(tasks, self.inputs)

    def test_profile_falls_back_to_base_soc(self):
        tasks = [_task("a", "Sell", 3.0, 50.0, soc="41-3091.01")]
        score = score_occupation(tasks, self.inputs)
        self.assertAlmostEqual(score.base_score, 0.625)

    def test_remote_adjusted_record(self):
        model = AdoptionModel(
            telework=parse_telework(DEFAULTS / 'telework.tsv'),
            tier_shares=parse_tier_shares(DEFAULTS / 'tier_shares.tsv'),
        )
        score = score_occupation(self.tasks, self.inputs)
        record = ate(score.base_score, model.region("sf_bay"), 2027, VelocityMode.REMOTE_ADJUSTED, model, occupation=score)
        self.assertEqual(record.mode, VelocityMode.REMOTE_ADJUSTED)
        self.assertLess(record.velocity, logistic_v(DEFAULT_TIERS[1], 2027))

    def test_thresholds(self):
        thresholds = RiskThresholds()
        self.assertEqual(classify_risk(0.65), RiskClass.HIGH)
        self.assertEqual(classify_risk(0.35), RiskClass.MODERATE)
        self.assertEqual(classify_risk(0.3499), RiskClass.LOW)
        self.assertEqual(thresholds.classify(0.0), RiskClass.LOW)
        with self.assertRaises(ValueError):
            RiskThresholds(moderate=0.7, high=0.6)


class TestCorpusScoring(unittest.TestCase):
    """Test cases for score_corpus, score_grid and the aggregates."""

    @classmethod
    def setUpClass(cls):
        cls.corpus = generate_fixture_corpus(seed=7, n_occupations=12, tasks_per_occ=8)
        cls.inputs = _fixture_inputs(cls.corpus)
        cls.scores = score_corpus(cls.corpus.tasks, cls.inputs, parallelism=1)
        cls.model = AdoptionModel()
        cls.records = score_grid(cls.scores, cls.model, [2025.0, 2027.0, 2030.0])

    def test_one_score_per_occupation(self):
        self.assertEqual(len(self.scores), 12)
        self.assertEqual([s.key for s in self.scores], sorted(s.key for s in self.scores))
        self.assertEqual(len(self.records), 12 * 3 * 5)

    def test_parallel_matches_serial(self):
        parallel = score_corpus(self.corpus.tasks, self.inputs, parallelism=4)
        self.assertEqual(parallel, self.scores)

    def test_shared_soc_titles_kept_apart(self):
        tasks = [
            _task("a", "Sell goods", 3.0, 50.0, soc="13-1011", title="Agent A"),
            _task("b", "Negotiate deals", 3.0, 50.0, soc="13-1011", title="Agent B"),
        ]
        inputs = _inputs([AbilityProfile(soc_code="13-1011", entries=(("Written Comprehension", 3.0),))])
        scores = score_corpus(tasks, inputs, parallelism=1)
        self.assertEqual([s.title for s in scores], ["Agent A", "Agent B"])
        self.assertTrue(all(s.shared_soc for s in scores))
        self.assertNotEqual(scores[0].base_score, scores[1].base_score)

    def test_top_n_order(self):
        year = select(self.records, region_id="sf_bay", tau=2027)
        top = top_n(year, 5)
        self.assertEqual(len(top), 5)
        values = [r.ate for r in top]
        self.assertEqual(values, sorted(values, reverse=True))
        self.assertEqual(top_n(year, 100), sorted(year, key=lambda r: (-r.ate, -r.base_score, r.soc_code, r.title or "")))

    def test_ties_broken_by_soc(self):
        a = OccupationScore(soc_code="43-1011", major_group="43", base_score=0.5)
        b = OccupationScore(soc_code="13-1011", major_group="13", base_score=0.5)
        records = [ate(s.base_score, SF_BAY, 2027, occupation=s) for s in (a, b)]
        self.assertEqual([r.soc_code for r in top_n(records, 2)], ["13-1011", "43-1011"])

    def test_reclassify_changes_only_risk(self):
        strict = RiskThresholds(moderate=0.2, high=0.4)
        changed = reclassify(self.records, strict)
        self.assertEqual([r.ate for r in changed], [r.ate for r in self.records])
        self.assertEqual(sum(risk_counts(changed).values()), len(self.records))
        for record in changed:
            self.assertEqual(record.risk, strict.classify(record.ate))

    def test_share_table(self):
        year = select(self.records, tau=2027)
        table = regional_share_table(year, threshold=0.35)
        self.assertEqual(table.tau, 2027.0)
        self.assertEqual(len(table.rows), 5 * 6)
        for row in table.rows:
            self.assertEqual(row.occupations, 2)
            self.assertAlmostEqual(row.share_pct, 100.0 * row.crossing / row.occupations)
        with self.assertRaises(InvariantError):
            regional_share_table(self.records)

    def test_share_table_notes_missing_groups(self):
        table = regional_share_table(select(self.records, tau=2027), groups=["13", "99"])
        self.assertEqual(len(table.rows), 5)
        self.assertEqual(len(table.notes), 5)

    def test_aggregate_share(self):
        year = select(self.records, region_id="sf_bay", tau=2027)
        share = aggregate_share(year, 0.0)
        self.assertEqual(share, 100.0)
        with self.assertRaises(EmptyInputError):
            aggregate_share([], 0.35)

    def test_histogram_counts_everything(self):
        year = select(self.records, region_id="sf_bay", tau=2027)
        bins = histogram(year, 0.05)
        self.assertEqual(sum(b.count for b in bins), len(year))
        for left, right in zip(bins, bins[1:]):
            self.assertAlmostEqual(left.upper, right.lower)
        self.assertEqual(histogram([], 0.05), [])

    def test_histogram_edge_is_left_closed(self):
        score = OccupationScore(soc_code="13-1011", major_group="13", base_score=0.5)
        record = ate(0.5, SF_BAY, 2027, occupation=score)
        edge = record.model_copy(update={"ate": 0.1, "base_score": 0.1 / record.velocity})
        bins = histogram([edge], 0.05)
        self.assertEqual((bins[0].lower, bins[0].upper, bins[0].count), (0.1, 0.15, 1))

    def test_persisted_scores_reload(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            write_occupation_scores(self.scores, tmpdir)
            self.assertEqual(read_occupation_scores(tmpdir), self.scores)


class TestPipelineInvariants(unittest.TestCase):
    """Invariants that hold for any fixture corpus."""

    def test_fixture_seeds(self):
        taus = [2025.0, 2026.0, 2027.0, 2030.0]
        model = AdoptionModel()
        for seed in range(1, 11):
            corpus = generate_fixture_corpus(seed=seed, n_occupations=6, tasks_per_occ=6)
            scores = score_corpus(corpus.tasks, _fixture_inputs(corpus), parallelism=1)
            records = score_grid(scores, model, taus)
            for record in records:
                ceiling = model.tiers[model.region(record.region_id).tier].L
                self.assertGreaterEqual(record.ate, 0.0)
                self.assertLess(record.ate, ceiling)
                self.assertLessEqual(abs(record.ate - record.base_score * record.velocity), 1e-9)
                self.assertAlmostEqual(math.fsum(c.w for c in record.components), 1.0, places=9)
            for score in scores:
                self.assertGreater(score.base_score, 0.0)
                by_region = {}
                for record in records:
                    if record.key == score.key:
                        by_region.setdefault(record.region_id, []).append(record.ate)
                for values in by_region.values():
                    self.assertEqual(values, sorted(values))
                    self.assertEqual(len(set(values)), len(values))
                for tau in (2027.0, 2030.0):
                    ates = {
                        r.region_id: r.ate for r in records if r.key == score.key and r.tau == tau
                    }
                    self.assertGreater(ates["sf_bay"], ates["seattle"])
                    self.assertGreater(ates["seattle"], ates["new_york"])

    def test_rank_and_risk_stable_across_time(self):
        taus = [2025.0, 2026.0, 2027.0, 2030.0]
        severity = {RiskClass.LOW: 0, RiskClass.MODERATE: 1, RiskClass.HIGH: 2}
        model = AdoptionModel()
        for seed in range(1, 11):
            corpus = generate_fixture_corpus(seed=seed, n_occupations=6, tasks_per_occ=6)
            scores = score_corpus(corpus.tasks, _fixture_inputs(corpus), parallelism=1)
            records = score_grid(scores, model, taus)
            for region_id in model.region_ids:
                rankings = [
                    [r.key for r in top_n(select(records, region_id=region_id, tau=tau), len(scores))] for tau in taus
                ]
                for ranking in rankings[1:]:
                    self.assertEqual(ranking, rankings[0])
                for score in scores:
                    history = sorted(
                        (r for r in select(records, region_id=region_id) if r.key == score.key), key=lambda r: r.tau
                    )
                    levels = [severity[r.risk] for r in history]
                    self.assertEqual(levels, sorted(levels))


def run_tests():
    """Run all tests."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestWeights, TestOccupationScoring, TestCorpusScoring, TestPipelineInvariants):
        suite.addTests(loader.loadTestsFromTestCase(case))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return 0 if result.wasSuccessful() else 1


if __name__ == '__main__':
    sys.exit(run_tests())

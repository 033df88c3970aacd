"""
Unit tests for table artifacts and rendering
"""

import os
import sys
import tempfile
import unittest
from pathlib import Path

# Add repository root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.adoption import DEFAULT_REGIONS, DEFAULT_TIERS, AdoptionModel, VelocityMode, velocity_table
from src.analysis import k_stress, reinstatement_table, tier_ordering_holds
from src.exceptions import InvariantError, UnknownTableError
from src.ingest import parse_telework, parse_tier_shares
from src.report import (
    Provenance,
    TableArtifact,
    file_digest,
    format_cell,
    histogram_artifact,
    k_stress_artifact,
    load_annotations,
    parse_delimited,
    reinstatement_artifact,
    remote_deltas_artifact,
    render,
    tau_text,
    tier_params_artifact,
    top_n_artifact,
    velocity_artifact,
    write_artifact,
)
from src.scoring import OccupationScore, histogram, score_grid

DEFAULTS = Path(__file__).parent.parent / 'data' / 'defaults'
PROVENANCE = Provenance(engine_version="1.0.0", ledger_version="2026.1", inputs={"ledger": "sha256:00"})


def _scores():
    return [
        OccupationScore(soc_code="13-2041", title="Credit Analysts", major_group="13", base_score=0.512),
        OccupationScore(soc_code="29-1229", title="Physicians", major_group="29", base_score=0.30),
        OccupationScore(soc_code="43-9021", title="Data Entry Keyers", major_group="43", base_score=0.70),
    ]


class TestRendering(unittest.TestCase):
    """Test cases for render and format_cell."""

    def setUp(self):
        self.artifact = TableArtifact(
            table_id="velocity",
            columns=("tier", "v_2027"),
            rows=((1, 0.838952), (2, 0.659231)),
            formats={"v_2027": ".2f"},
            provenance=PROVENANCE,
            tau=2027.0,
        )

    def test_delimited_layout(self):
        text = render(self.artifact).decode("utf-8")
        lines = text.splitlines()
        self.assertEqual(lines[0], "# table: velocity")
        self.assertIn("# engine_version: 1.0.0", lines)
        self.assertIn("# ledger_version: 2026.1", lines)
        self.assertIn("# input.ledger: sha256:00", lines)
        self.assertIn("# tau: 2027", lines)
        self.assertEqual(lines[-3:], ["tier\tv_2027", "1\t0.84", "2\t0.66"])
        self.assertTrue(text.endswith("\n"))

    def test_delimited_reparses(self):
        columns, rows = parse_delimited(render(self.artifact))
        self.assertEqual(columns, ["tier", "v_2027"])
        self.assertEqual(rows, [["1", "0.84"], ["2", "0.66"]])

    def test_rendering_is_deterministic(self):
        self.assertEqual(render(self.artifact), render(self.artifact.model_copy()))

    def test_aligned_layout(self):
        lines = render(self.artifact, "aligned").decode("utf-8").splitlines()
        body = [line for line in lines if not line.startswith("#")]
        self.assertEqual(body[0].split(), ["tier", "v_2027"])
        self.assertEqual(set(body[1].replace(" ", "")), {"-"})
        self.assertEqual(body[2].split(), ["1", "0.84"])

    def test_unknown_table_id(self):
        with self.assertRaises(UnknownTableError):
            render(self.artifact.model_copy(update={"table_id": "mystery"}))

    def test_unknown_format(self):
        with self.assertRaises(InvariantError):
            render(self.artifact, "html")

    def test_ragged_row(self):
        ragged = self.artifact.model_copy(update={"rows": ((1,),)})
        with self.assertRaises(InvariantError):
            render(ragged)

    def test_cells(self):
        self.assertEqual(format_cell(None), "")
        self.assertEqual(format_cell(True), "yes")
        self.assertEqual(format_cell(-0.001, ".2f"), "0.00")
        self.assertEqual(format_cell("two\twords"), "two words")
        self.assertEqual(tau_text(2025.125), "2025.125")
        self.assertEqual(tau_text(2027.0), "2027")

    def test_file_stem(self):
        artifact = self.artifact.model_copy(update={"region_id": "sf_bay", "mode": VelocityMode.RESIDENCE})
        self.assertEqual(artifact.file_stem(), "velocity_sf_bay_2027_residence")

    def test_write_and_digest(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_artifact(self.artifact, tmpdir)
            self.assertEqual(path.name, "velocity_2027.tsv")
            self.assertEqual(path.read_bytes(), render(self.artifact))
            text_path = write_artifact(self.artifact, tmpdir, "aligned")
            self.assertEqual(text_path.suffix, ".txt")

            sample = Path(tmpdir) / 'abc.txt'
            sample.write_bytes(b"abc")
            self.assertEqual(
                file_digest(sample), "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
            )


class TestArtifacts(unittest.TestCase):
    """Test cases for the table builders."""

    @classmethod
    def setUpClass(cls):
        cls.model = AdoptionModel(
            telework=parse_telework(DEFAULTS / 'telework.tsv'),
            tier_shares=parse_tier_shares(DEFAULTS / 'tier_shares.tsv'),
        )
        cls.records = score_grid(_scores(), cls.model, [2025.0, 2027.0, 2030.0])

    def test_top_n_table(self):
        artifact = top_n_artifact(
            self.records,
            "sf_bay",
            2027,
            [2025.0, 2027.0, 2030.0],
            2,
            PROVENANCE,
            labels={"13": "Financial"},
            annotations=load_annotations(DEFAULTS / 'annotations.tsv'),
        )
        self.assertEqual(artifact.columns[4:7], ("ate_2025", "ate_2027", "ate_2030"))
        columns, rows = parse_delimited(render(artifact))
        self.assertEqual([r[1] for r in rows], ["43-9021", "13-2041"])
        credit = rows[1]
        self.assertEqual(credit[3], "Financial")
        self.assertEqual(credit[4:7], ["0.31", "0.43", "0.47"])
        self.assertEqual(artifact.file_stem(), "top_n_sf_bay_2027")

    def test_top_n_annotation_note(self):
        artifact = top_n_artifact(
            self.records, "sf_bay", 2027, [2027.0], 3, PROVENANCE,
            annotations=load_annotations(DEFAULTS / 'annotations.tsv'),
        )
        physicians = [row for row in artifact.rows if row[1] == "29-1229"][0]
        self.assertEqual(physicians[-2], "†")
        self.assertTrue(any(note.startswith("†") for note in artifact.notes))

    def test_tier_params_table(self):
        artifact = tier_params_artifact(DEFAULT_TIERS, DEFAULT_REGIONS, PROVENANCE)
        _, rows = parse_delimited(render(artifact))
        self.assertEqual(rows[0][:4], ["1", "0.85", "2024.25", "0.92"])
        self.assertIn("Seattle-Tacoma-Bellevue", rows[1][4])

    def test_remote_deltas_table(self):
        artifact = remote_deltas_artifact(self.model, ["13"], 2027, PROVENANCE)
        _, rows = parse_delimited(render(artifact))
        deltas = {row[2]: row[6] for row in rows}
        self.assertEqual(deltas["sf_bay"], "-16.8")
        self.assertEqual(deltas["new_york"], "9.2")

    def test_k_stress_table(self):
        grid = k_stress([0.3, 0.5, 0.7, 0.9])
        artifact = k_stress_artifact(grid, PROVENANCE, tier_ordering_holds(grid))
        self.assertEqual(len(artifact.rows), 9)
        self.assertEqual(artifact.columns, ("tier", "scenario", "share_2025", "share_2027", "share_2030"))
        self.assertEqual(len(artifact.notes), 2)

    def test_histogram_table(self):
        records = [r for r in self.records if r.region_id == "sf_bay" and r.tau == 2027.0]
        artifact = histogram_artifact(histogram(records), "sf_bay", 2027, PROVENANCE)
        self.assertEqual(sum(row[2] for row in artifact.rows), 3)

    def test_reinstatement_table(self):
        _, rows = parse_delimited(render(reinstatement_artifact(reinstatement_table(), PROVENANCE)))
        self.assertEqual(rows[0], ["Low", "10", "58000", "29000", "46000"])
        self.assertEqual(rows[2], ["High", "30", "174000", "87000", "139000"])

    def test_velocity_table(self):
        artifact = velocity_artifact(velocity_table(DEFAULT_TIERS, [2027.0]), PROVENANCE)
        _, rows = parse_delimited(render(artifact))
        self.assertEqual(rows, [["1", "0.8390"], ["2", "0.6592"], ["3", "0.5036"]])

    def test_annotation_table_without_marker(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / 'annotations.tsv'
            path.write_text("soc_code\tnote\n13-2041\tshared code\n")
            with self.assertRaises(InvariantError) as ctx:
                load_annotations(path)
            self.assertIn("marker", str(ctx.exception))


def run_tests():
    """Run all tests."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestRendering, TestArtifacts):
        suite.addTests(loader.loadTestsFromTestCase(case))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return 0 if result.wasSuccessful() else 1


if __name__ == '__main__':
    sys.exit(run_tests())

"""
Demo script for the Agentic Task Exposure engine
This script prints the calibrated adoption curves, walks one occupation
through the scoring formula and, given a seed, runs the whole pipeline on
a generated corpus.
"""

import sys
import os
import tempfile
from pathlib import Path

# Add repository root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.adoption import DEFAULT_REGIONS, DEFAULT_TIERS, AdoptionModel, velocity_table
from src.cli import cmd_analyze, cmd_ingest, cmd_report, cmd_score
from src.config import load_run_config
from src.scoring import OccupationScore, ate, base_ate


def demo_velocities():
    """Show the three tier S-curves at the grid years."""
    print("=" * 70)
    print("Agentic Task Exposure - Demo")
    print("=" * 70)

    print("\n[1] Adoption velocity per tier")
    table = velocity_table(DEFAULT_TIERS, [2025.0, 2027.0, 2030.0])
    for tier, row in table.items():
        params = DEFAULT_TIERS[tier]
        values = "  ".join(f"{tau:g}: {v:.4f}" for tau, v in row.items())
        print(f"    Tier {tier} (k={params.k}, tau0={params.tau0}, L={params.L})  {values}")


def demo_worked_example():
    """Score one hand-made occupation in every region."""
    print("\n[2] Worked example: three tasks")
    weights, caps, covs = [0.5, 0.3, 0.2], [0.8, 0.6, 0.4], [1.0, 0.75, 0.6]
    base = base_ate(weights, caps, covs)
    print(f"    weights={weights} cap={caps} cov={covs}")
    print(f"    base = {base:.4f}")

    occupation = OccupationScore(soc_code="13-2041", title="Credit Analysts", major_group="13", base_score=base)
    model = AdoptionModel()
    for region in DEFAULT_REGIONS:
        record = ate(base, region, 2027.0, model=model, occupation=occupation)
        print(f"    {region.name:<26} tier {region.tier}  ATE(2027) = {record.ate:.3f}  ({record.risk.value})")


def run_fixture_pipeline(seed):
    """Run ingest, score, analyze and report on a generated corpus."""
    out_dir = Path(tempfile.mkdtemp(prefix="ate_demo_"))
    print(f"\n[3] Running the pipeline on fixture seed {seed}")
    print(f"    Output: {out_dir}")

    try:
        config = load_run_config(flags={"output_dir": str(out_dir), "fixture": {"enabled": True, "seed": seed}})
        cmd_ingest(config)
        records = cmd_score(config)
        analysis = cmd_analyze(config)
        reports = cmd_report(config)
    except Exception as e:
        print(f"\n✗ Pipeline failed: {str(e)}")
        return False

    print(f"    ✓ {len(records)} ATE records")
    print(f"    ✓ {len(analysis)} analysis tables, {len(reports)} report tables")
    print("\n" + "=" * 70)
    print("TOP OCCUPATIONS:")
    print("=" * 70)
    print(reports["top_n"].read_text(encoding="utf-8"))
    return True


def main():
    """Main function."""
    demo_velocities()
    demo_worked_example()

    if len(sys.argv) < 2:
        print("\n" + "=" * 70)
        print("USAGE:")
        print("=" * 70)
        print(f"  python {sys.argv[0]} <fixture_seed>")
        print("\nExample:")
        print(f"  python {sys.argv[0]} 7")
        print("\nOr run the stages yourself:")
        print("  python -m src.cli --fixture-seed 7 --output-dir output ingest")
        print("  python -m src.cli --fixture-seed 7 --output-dir output score")
        print("=" * 70)
        return

    success = run_fixture_pipeline(int(sys.argv[1]))

    if success:
        print("=" * 70)
        print("✓ Demo completed successfully!")
        print("=" * 70)
    else:
        print("\n" + "=" * 70)
        print("✗ Demo failed!")
        print("=" * 70)
        sys.exit(1)


if __name__ == "__main__":
    main()

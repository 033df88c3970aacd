"""
Quick Examples for the Agentic Task Exposure engine

This file contains simple code examples for using the scoring modules directly.
"""

import sys
import os
from pathlib import Path

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.adoption import AdoptionModel, logistic_v, parse_tau
from src.capmodel import base_cap, load_ability_map
from src.config import DEFAULT_LEDGER, load_ledger
from src.covmodel import load_rubric, score_cov
from src.ingest import AbilityProfile, parse_telework, parse_tier_shares

DEFAULTS = Path(__file__).parent / 'data' / 'defaults'


def example1_task_coverage():
    """Example 1: Score task statements against the keyword rubric"""
    print("Example 1: Workflow Coverage")
    print("-" * 50)

    rubric = load_rubric(DEFAULTS / 'cov_rubric.yaml')

    for text in (
        "Compile, sort, and verify the accuracy of data to be entered",
        "Negotiate prices or terms of sales agreements",
        "Respond to emergency situations and escalate to supervisors",
    ):
        result = score_cov(text, rubric)
        print(f"COV {result.cov:.2f} {list(result.triggered)}: {text}")


def example2_ability_capability():
    """Example 2: Importance-weighted AI capability of an ability profile"""
    print("\nExample 2: Ability Capability")
    print("-" * 50)

    ability_map = load_ability_map(DEFAULTS / 'ability_map.tsv')
    profile = AbilityProfile(
        soc_code="43-9021",
        entries=(("Written Comprehension", 4.0), ("Near Vision", 3.5), ("Information Ordering", 3.0)),
    )

    print(f"base CAP for {profile.soc_code}: {base_cap(profile, ability_map):.4f}")


def example3_adoption_curve():
    """Example 3: Evaluate a tier's S-curve at quarter time points"""
    print("\nExample 3: Adoption Curve")
    print("-" * 50)

    tiers = load_ledger(DEFAULT_LEDGER).tiers
    for label in ("2025Q1", "2026Q3", "2027", "2030"):
        tau = parse_tau(label)
        print(f"{label:>7} (tau={tau:g}): tier 1 V={logistic_v(tiers[1], tau):.4f}")


def example4_remote_adjustment():
    """Example 4: Remote-work adjusted velocity per region"""
    print("\nExample 4: Remote Adjustment")
    print("-" * 50)

    model = AdoptionModel(
        telework=parse_telework(DEFAULTS / 'telework.tsv'),
        tier_shares=parse_tier_shares(DEFAULTS / 'tier_shares.tsv'),
    )

    for region_id in model.region_ids:
        delta = model.remote_delta("13", region_id, 2027.0)
        print(f"{region_id:<10} Business & Financial Ops: {delta:+.1f}% vs residence")


def main():
    """Run all examples."""
    print("=" * 70)
    print("Agentic Task Exposure - Code Examples")
    print("=" * 70)

    example1_task_coverage()
    example2_ability_capability()
    example3_adoption_curve()
    example4_remote_adjustment()

    print("\n" + "=" * 70)
    print("All examples completed!")
    print("=" * 70)


if __name__ == "__main__":
    main()

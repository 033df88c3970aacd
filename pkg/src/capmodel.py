"""
AI capability scoring.

CAP(t) is the importance-weighted mean of per-ability AI capability scores
over the occupation's ability profile, adjusted by task-text modifier rules
and clamped to [0, 1].
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import EmptyInputError, InvariantError, UnmappedAbilityError
from .ingest import AbilityProfile, TaskRecord, read_table

logger = logging.getLogger(__name__)


class AbilityCategory(str, Enum):
    COGNITIVE = "Cognitive"
    SENSORY = "Sensory"
    PSYCHOMOTOR = "Psychomotor"
    PHYSICAL = "Physical"


class AbilityScore(BaseModel):
    """One row of the ability-to-AI calibration table."""

    model_config = ConfigDict(frozen=True)

    ability_name: str = Field(min_length=1)
    category: AbilityCategory
    ai_score: float = Field(ge=0.0, le=1.0)
    source_note: str = ""


class AbilityMap(BaseModel):
    """Ability name to AI capability score calibration table."""

    model_config = ConfigDict(frozen=True)

    rows: Tuple[AbilityScore, ...]

    @field_validator("rows")
    @classmethod
    def _unique_names(cls, rows: Tuple[AbilityScore, ...]) -> Tuple[AbilityScore, ...]:
        names = [r.ability_name for r in rows]
        if len(set(names)) != len(names):
            raise ValueError("ability names must be unique in an ability map")
        return rows

    def lookup(self) -> Dict[str, AbilityScore]:
        return {r.ability_name: r for r in self.rows}

    def score(self, ability: str) -> float:
        row = self.lookup().get(ability)
        if row is None:
            raise UnmappedAbilityError(ability)
        return row.ai_score

    def __len__(self) -> int:
        return len(self.rows)


class TextModifierRule(BaseModel):
    """Multiplies CAP when ``pattern`` occurs in the lowercased task text."""

    model_config = ConfigDict(frozen=True)

    pattern: str = Field(min_length=1)
    direction: Literal["boost", "reduce"]
    magnitude: float = Field(gt=0.0, le=2.0)

    @field_validator("pattern")
    @classmethod
    def _lowercase(cls, value: str) -> str:
        return value.strip().lower()

    @model_validator(mode="after")
    def _direction_matches_magnitude(self) -> "TextModifierRule":
        if self.direction == "boost" and not self.magnitude > 1.0:
            raise ValueError(f"boost rule '{self.pattern}' needs magnitude > 1")
        if self.direction == "reduce" and not self.magnitude < 1.0:
            raise ValueError(f"reduce rule '{self.pattern}' needs magnitude < 1")
        return self


def load_ability_map(path: Union[str, Path]) -> AbilityMap:
    """Load an ability map table (ability_name, category, ai_score, source_note)."""
    frame = read_table(path)
    try:
        rows = tuple(
            AbilityScore(
                ability_name=row["ability_name"].strip(),
                category=row["category"].strip(),
                ai_score=float(row["ai_score"]),
                source_note=row.get("source_note", ""),
            )
            for row in frame.to_dict("records")
        )
        ability_map = AbilityMap(rows=rows)
    except (KeyError, ValueError) as e:
        raise InvariantError(f"Failed to load ability map {path}: {e}", module="capmodel") from e
    logger.info(f"Loaded {len(ability_map)} ability mappings from {path}")
    return ability_map


def load_modifier_rules(path: Union[str, Path]) -> List[TextModifierRule]:
    """Load task-text modifier rules (pattern, direction, magnitude)."""
    frame = read_table(path)
    try:
        rules = [
            TextModifierRule(pattern=row["pattern"], direction=row["direction"].strip(), magnitude=float(row["magnitude"]))
            for row in frame.to_dict("records")
        ]
    except (KeyError, ValueError) as e:
        raise InvariantError(f"Failed to load modifier rules {path}: {e}", module="capmodel") from e
    logger.info(f"Loaded {len(rules)} text modifier rules from {path}")
    return rules


def shift_category(ability_map: AbilityMap, category: Union[str, AbilityCategory], factor: float) -> AbilityMap:
    """Scale every ai_score in ``category`` by ``factor``, clamping to [0, 1]."""
    if factor < 0:
        raise InvariantError(f"Category shift factor must be non-negative, got {factor}", module="capmodel")
    category = AbilityCategory(category)
    rows = tuple(
        r.model_copy(update={"ai_score": min(1.0, r.ai_score * factor)}) if r.category == category else r
        for r in ability_map.rows
    )
    return AbilityMap(rows=rows)


def base_cap(profile: AbilityProfile, ability_map: AbilityMap, drop_unmapped: bool = False) -> float:
    """
    Importance-weighted mean AI capability over an occupation's abilities.

    Args:
        profile: The occupation's ability profile
        ability_map: Calibration table
        drop_unmapped: Skip abilities absent from the map and renormalize
            over the rest instead of raising

    Returns:
        sum(importance * ai_score) / sum(importance), in [0, 1]
    """
    if not profile.entries:
        raise EmptyInputError(f"Ability profile for {profile.soc_code} is empty", module="capmodel")

    lookup = ability_map.lookup()
    importances: List[float] = []
    scores: List[float] = []
    # sorted so the sum is identical for any entry order
    for name, importance in sorted(profile.entries):
        row = lookup.get(name)
        if row is None:
            if drop_unmapped:
                continue
            raise UnmappedAbilityError(name, profile.soc_code)
        importances.append(importance)
        scores.append(row.ai_score)

    if not importances:
        raise EmptyInputError(f"No ability of {profile.soc_code} is in the ability map", module="capmodel")

    weights = np.asarray(importances)
    value = float(np.dot(weights, np.asarray(scores)) / weights.sum())
    return min(1.0, max(0.0, value))


def modifier_factor(text: str, rules: Sequence[TextModifierRule]) -> float:
    """Product of the magnitudes of every rule whose pattern occurs in ``text``."""
    lowered = text.lower()
    factor = 1.0
    for rule in rules:
        if rule.pattern in lowered:
            factor *= rule.magnitude
    return factor


def cap_for_task(
    task: TaskRecord,
    profile: AbilityProfile,
    ability_map: AbilityMap,
    rules: Sequence[TextModifierRule] = (),
    drop_unmapped: bool = False,
) -> float:
    """CAP for one task: base_cap times the matching modifiers, clamped to [0, 1]."""
    base = base_cap(profile, ability_map, drop_unmapped=drop_unmapped)
    return min(1.0, max(0.0, base * modifier_factor(task.text, rules)))


def occupation_caps(
    tasks: Sequence[TaskRecord],
    profile: AbilityProfile,
    ability_map: AbilityMap,
    rules: Sequence[TextModifierRule] = (),
    drop_unmapped: bool = False,
) -> np.ndarray:
    """CAP for every task of one occupation; the base is computed once."""
    base = base_cap(profile, ability_map, drop_unmapped=drop_unmapped)
    return np.array([min(1.0, max(0.0, base * modifier_factor(t.text, rules))) for t in tasks], dtype=float)

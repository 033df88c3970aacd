"""
Workflow coverage (COV) scoring.

A task's coverage starts at 1.0 and is multiplied by the multiplier of each
distinct penalty category whose phrases occur in the task text. A category
applies once no matter how many of its phrases match.

Phrase matching is case-insensitive. A phrase without whitespace must start
at a word boundary and may continue into a longer word ("diagnos" matches
"diagnoses", "mediate" does not match "immediately"); a multi-word phrase is
a plain substring match.
"""

import logging
import re
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import EmptyInputError, InvariantError
from .ingest import TaskRecord

logger = logging.getLogger(__name__)

CATEGORY_COUNT = 4


class CovCategory(BaseModel):
    """One penalty category of a coverage rubric."""

    model_config = ConfigDict(frozen=True)

    label: str = Field(min_length=1)
    description: str = ""
    keywords: Tuple[str, ...]
    multiplier: float = Field(gt=0.0, lt=1.0)

    @field_validator("keywords")
    @classmethod
    def _normalize_keywords(cls, keywords: Tuple[str, ...]) -> Tuple[str, ...]:
        cleaned = tuple(dict.fromkeys(k.strip().lower() for k in keywords if k.strip()))
        if not cleaned:
            raise ValueError("a rubric category needs at least one keyword")
        return cleaned


class CovRubric(BaseModel):
    """Four penalty categories applied multiplicatively."""

    model_config = ConfigDict(frozen=True)

    name: str = "keyword"
    categories: Tuple[CovCategory, ...]

    @field_validator("categories")
    @classmethod
    def _four_distinct(cls, categories: Tuple[CovCategory, ...]) -> Tuple[CovCategory, ...]:
        labels = [c.label for c in categories]
        if len(categories) != CATEGORY_COUNT or len(set(labels)) != CATEGORY_COUNT:
            raise ValueError(f"a rubric has exactly {CATEGORY_COUNT} distinct categories, got {labels}")
        return categories

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(c.label for c in self.categories)

    def multipliers(self) -> Dict[str, float]:
        return {c.label: c.multiplier for c in self.categories}


class CovResult(BaseModel):
    """Coverage of one task and the phrases that triggered its penalties."""

    model_config = ConfigDict(frozen=True)

    task_id: str = ""
    cov: float = Field(gt=0.0, le=1.0)
    triggered: Tuple[str, ...] = ()
    matched_phrases: Tuple[Tuple[str, str], ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.triggered)


@lru_cache(maxsize=4096)
def _phrase_pattern(phrase: str) -> "re.Pattern[str]":
    escaped = re.escape(phrase)
    if any(ch.isspace() for ch in phrase):
        return re.compile(escaped)
    return re.compile(r"(?<![a-z0-9])" + escaped)


def phrase_matches(phrase: str, lowered_text: str) -> bool:
    """True when ``phrase`` occurs in already-lowercased text under the rubric's matching rule."""
    return _phrase_pattern(phrase).search(lowered_text) is not None


def score_cov(text: str, rubric: CovRubric, task_id: str = "") -> CovResult:
    """
    Score one task statement against a rubric.

    Args:
        text: Task statement
        rubric: Coverage rubric
        task_id: Carried into the result for reporting

    Returns:
        CovResult with cov equal to the product of the multipliers of the
        distinct triggered categories (1.0 when nothing triggers)
    """
    lowered = text.lower()
    cov = 1.0
    triggered: List[str] = []
    matched: List[Tuple[str, str]] = []
    for category in rubric.categories:
        hits = [phrase for phrase in category.keywords if phrase_matches(phrase, lowered)]
        if hits:
            cov *= category.multiplier
            triggered.append(category.label)
            matched.extend((category.label, phrase) for phrase in hits)
    return CovResult(task_id=task_id, cov=cov, triggered=tuple(triggered), matched_phrases=tuple(matched))


def occupation_mean_cov(tasks: Sequence[TaskRecord], rubric: CovRubric) -> float:
    """Unweighted mean task coverage of one occupation."""
    if not tasks:
        raise EmptyInputError("Cannot average coverage over an empty task list", module="covmodel")
    codes = {t.soc_code for t in tasks}
    if len(codes) != 1:
        raise InvariantError(f"Tasks span several occupations: {sorted(codes)}", module="covmodel")
    return float(np.mean([score_cov(t.text, rubric).cov for t in tasks]))


def task_covs(tasks: Sequence[TaskRecord], rubric: CovRubric) -> List[CovResult]:
    return [score_cov(t.text, rubric, task_id=t.task_id) for t in tasks]


def relax_multipliers(rubric: CovRubric, fraction: float) -> CovRubric:
    """Move every multiplier ``fraction`` of the way to 1.0 (0.5 halves each penalty)."""
    if not 0.0 <= fraction < 1.0:
        raise InvariantError(f"Relaxation fraction must be in [0, 1), got {fraction}", module="covmodel")
    categories = tuple(
        c.model_copy(update={"multiplier": c.multiplier + (1.0 - c.multiplier) * fraction}) for c in rubric.categories
    )
    return CovRubric(name=f"{rubric.name}-relaxed", categories=categories)


def merge_rubrics(base: CovRubric, additions: Mapping[str, Sequence[str]], name: str = "semantic") -> CovRubric:
    """Extend a rubric's phrase sets, keeping its categories and multipliers."""
    unknown = set(additions) - set(base.labels)
    if unknown:
        raise InvariantError(f"Unknown rubric categories in extension: {sorted(unknown)}", module="covmodel")
    categories = tuple(
        CovCategory(
            label=c.label,
            description=c.description,
            keywords=tuple(c.keywords) + tuple(additions.get(c.label, ())),
            multiplier=c.multiplier,
        )
        for c in base.categories
    )
    return CovRubric(name=name, categories=categories)


def load_rubric(path: Union[str, Path]) -> CovRubric:
    """
    Load a rubric from YAML.

    A file may declare ``extends: <other file>`` plus ``additions`` mapping
    category labels to extra phrases; the path is resolved next to the file.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise InvariantError(f"Failed to read rubric {path}: {e}", module="covmodel") from e

    try:
        if "extends" in document:
            base = load_rubric(path.parent / document["extends"])
            rubric = merge_rubrics(base, document.get("additions", {}), name=document.get("name", path.stem))
        else:
            rubric = CovRubric(
                name=document.get("name", path.stem),
                categories=tuple(CovCategory(**c) for c in document.get("categories", [])),
            )
    except ValidationError as e:
        raise InvariantError(f"Invalid rubric {path}: {e}", module="covmodel") from e
    logger.info(f"Loaded rubric '{rubric.name}' from {path}")
    return rubric


class PilotReport(BaseModel):
    """Keyword vs semantic rubric comparison over a task corpus."""

    total_tasks: int
    keyword_flagged: int
    semantic_flagged: int
    keyword_by_category: Dict[str, int]
    semantic_by_category: Dict[str, int]
    newly_flagged: Dict[str, List[str]]

    @property
    def keyword_share(self) -> float:
        return 100.0 * self.keyword_flagged / self.total_tasks if self.total_tasks else 0.0

    @property
    def semantic_share(self) -> float:
        return 100.0 * self.semantic_flagged / self.total_tasks if self.total_tasks else 0.0

    @property
    def newly_flagged_count(self) -> int:
        return sum(len(ids) for ids in self.newly_flagged.values())

    def summary(self) -> str:
        return (
            f"keyword rubric flags {self.keyword_flagged} of {self.total_tasks} tasks ({self.keyword_share:.1f}%); "
            f"semantic rubric flags {self.semantic_flagged} ({self.semantic_share:.1f}%); "
            f"{self.newly_flagged_count} newly flagged in {len(self.newly_flagged)} occupations"
        )


def pilot_compare(
    corpus: Sequence[TaskRecord], keyword_rubric: CovRubric, semantic_rubric: Optional[CovRubric] = None
) -> PilotReport:
    """
    Compare how many tasks the keyword and semantic rubrics flag.

    Args:
        corpus: Full task corpus
        keyword_rubric: Primary rubric
        semantic_rubric: Extended rubric with the same four categories

    Returns:
        PilotReport with flagged counts per rubric and per category, and the
        task ids flagged only by the semantic rubric, grouped by SOC code
    """
    semantic_rubric = semantic_rubric or keyword_rubric
    if keyword_rubric.labels != semantic_rubric.labels:
        raise InvariantError(
            f"Rubrics differ in categories: {keyword_rubric.labels} vs {semantic_rubric.labels}", module="covmodel"
        )

    keyword_by_category = {label: 0 for label in keyword_rubric.labels}
    semantic_by_category = {label: 0 for label in semantic_rubric.labels}
    keyword_flagged = semantic_flagged = 0
    newly_flagged: Dict[str, List[str]] = {}

    for task in sorted(corpus, key=lambda t: (t.soc_code, t.task_id)):
        keyword = score_cov(task.text, keyword_rubric, task.task_id)
        semantic = score_cov(task.text, semantic_rubric, task.task_id)
        for label in keyword.triggered:
            keyword_by_category[label] += 1
        for label in semantic.triggered:
            semantic_by_category[label] += 1
        keyword_flagged += keyword.flagged
        semantic_flagged += semantic.flagged
        if semantic.flagged and not keyword.flagged:
            newly_flagged.setdefault(task.soc_code, []).append(task.task_id)

    report = PilotReport(
        total_tasks=len(corpus),
        keyword_flagged=keyword_flagged,
        semantic_flagged=semantic_flagged,
        keyword_by_category=keyword_by_category,
        semantic_by_category=semantic_by_category,
        newly_flagged=newly_flagged,
    )
    logger.info(report.summary())
    return report

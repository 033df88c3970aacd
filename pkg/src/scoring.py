"""
ATE scoring.

An occupation's base score is the weighted sum of per-task capability and
coverage, sum_t w_t * CAP_t * COV_t, where the task weights are normalized
importance x relevance products. The base score does not depend on region
or time; ATE(r, tau) = base * V(r, tau).
"""

import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .adoption import AdoptionModel, RegionConfig, VelocityMode
from .capmodel import AbilityMap, TextModifierRule, occupation_caps
from .covmodel import CovRubric, task_covs
from .exceptions import EmptyInputError, InvariantError, WeightUndefinedError
from .ingest import AbilityProfile, TaskRecord, base_soc, major_group, read_table, write_frame

logger = logging.getLogger(__name__)

DECOMPOSITION_TOLERANCE = 1e-9


class RiskClass(str, Enum):
    HIGH = "high"
    MODERATE = "moderate"
    LOW = "low"


class RiskThresholds(BaseModel):
    """Lower bounds (inclusive) of the moderate and high risk classes."""

    model_config = ConfigDict(frozen=True)

    moderate: float = Field(default=0.35, gt=0.0, le=1.0)
    high: float = Field(default=0.65, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered(self) -> "RiskThresholds":
        if self.moderate >= self.high:
            raise ValueError(f"moderate threshold {self.moderate} must be below high threshold {self.high}")
        return self

    def classify(self, ate: float) -> RiskClass:
        if ate >= self.high:
            return RiskClass.HIGH
        if ate >= self.moderate:
            return RiskClass.MODERATE
        return RiskClass.LOW


DEFAULT_THRESHOLDS = RiskThresholds()


class TaskWeight(BaseModel):
    model_config = ConfigDict(frozen=True)

    soc_code: str
    task_id: str
    w: float = Field(ge=0.0, le=1.0)


class TaskComponent(BaseModel):
    """Per-task (w, cap, cov) triple kept for audit."""

    model_config = ConfigDict(frozen=True)

    task_id: str
    w: float = Field(ge=0.0, le=1.0)
    cap: float = Field(ge=0.0, le=1.0)
    cov: float = Field(gt=0.0, le=1.0)


class OccupationScore(BaseModel):
    """Time-independent base score of one occupation."""

    model_config = ConfigDict(frozen=True)

    soc_code: str
    title: Optional[str] = None
    major_group: str
    base_score: float = Field(ge=0.0, le=1.0)
    components: Tuple[TaskComponent, ...] = ()
    shared_soc: bool = False

    @property
    def key(self) -> Tuple[str, str]:
        return (self.soc_code, self.title or "")


class AteRecord(BaseModel):
    """ATE of one occupation in one region at one time point."""

    model_config = ConfigDict(frozen=True)

    soc_code: str
    title: Optional[str] = None
    major_group: str = ""
    region_id: str
    tau: float
    mode: VelocityMode = VelocityMode.RESIDENCE
    velocity: float = Field(ge=0.0, le=1.0)
    base_score: float = Field(ge=0.0, le=1.0)
    ate: float = Field(ge=0.0, le=1.0)
    risk: RiskClass
    components: Tuple[TaskComponent, ...] = ()
    shared_soc: bool = False

    @model_validator(mode="after")
    def _decomposes(self) -> "AteRecord":
        if abs(self.ate - self.base_score * self.velocity) > DECOMPOSITION_TOLERANCE:
            raise ValueError(f"ate {self.ate} != base {self.base_score} * V {self.velocity}")
        return self

    @property
    def key(self) -> Tuple[str, str]:
        return (self.soc_code, self.title or "")


def compute_weights(tasks: Sequence[TaskRecord]) -> List[TaskWeight]:
    """
    Normalized importance x relevance weights of one occupation's tasks.

    Raises:
        EmptyInputError: no tasks
        WeightUndefinedError: every product is zero
    """
    if not tasks:
        raise EmptyInputError("Cannot weight an empty task list", module="scoring")
    products = [t.importance * t.relevance for t in tasks]
    total = math.fsum(products)
    if total <= 0.0:
        raise WeightUndefinedError(f"All importance x relevance products are zero for {tasks[0].soc_code}")
    return [TaskWeight(soc_code=t.soc_code, task_id=t.task_id, w=p / total) for t, p in zip(tasks, products)]


def base_ate(
    weights: Sequence[Union[TaskWeight, float]], caps: Sequence[float], covs: Sequence[float]
) -> float:
    """sum_t w_t * cap_t * cov_t over aligned per-task vectors."""
    if not len(weights) == len(caps) == len(covs):
        raise InvariantError(
            f"Length mismatch: {len(weights)} weights, {len(caps)} caps, {len(covs)} covs", module="scoring"
        )
    w = [x.w if isinstance(x, TaskWeight) else float(x) for x in weights]
    value = math.fsum(wi * ci * vi for wi, ci, vi in zip(w, caps, covs))
    return min(1.0, max(0.0, value))


def classify_risk(ate_value: float, thresholds: RiskThresholds = DEFAULT_THRESHOLDS) -> RiskClass:
    return thresholds.classify(ate_value)


def ate(
    base: float,
    region: RegionConfig,
    tau: float,
    velocity_mode: Union[str, VelocityMode] = VelocityMode.RESIDENCE,
    model: Optional[AdoptionModel] = None,
    thresholds: RiskThresholds = DEFAULT_THRESHOLDS,
    occupation: Optional[OccupationScore] = None,
) -> AteRecord:
    """
    ATE of a base score in a region at a time point.

    Args:
        base: Base score in [0, 1]
        region: Region (its tier selects the S-curve)
        tau: Decimal year
        velocity_mode: Residence or remote-adjusted velocity
        model: Adoption model (default: calibrated tiers, no remote tables)
        thresholds: Risk class bounds
        occupation: Occupation the base belongs to; supplies identity and
            the major group needed for remote adjustment

    Returns:
        AteRecord with ate = base * V
    """
    if not 0.0 <= base <= 1.0:
        raise InvariantError(f"Base score {base} outside [0, 1]", module="scoring")
    model = model or AdoptionModel()
    mode = VelocityMode.parse(velocity_mode)
    group = occupation.major_group if occupation else None
    velocity = model.velocity_for(region, tau, group, mode)
    value = base * velocity
    return AteRecord(
        soc_code=occupation.soc_code if occupation else "",
        title=occupation.title if occupation else None,
        major_group=group or "",
        region_id=region.region_id,
        tau=float(tau),
        mode=mode,
        velocity=velocity,
        base_score=base,
        ate=value,
        risk=thresholds.classify(value),
        components=occupation.components if occupation else (),
        shared_soc=occupation.shared_soc if occupation else False,
    )


@dataclass(frozen=True)
class ScoringInputs:
    """Calibration inputs shared by every occupation of a scoring run."""

    ability_map: AbilityMap
    rubric: CovRubric
    profiles: Mapping[str, AbilityProfile]
    rules: Sequence[TextModifierRule] = ()
    drop_unmapped: bool = False

    def profile_for(self, soc_code: str) -> AbilityProfile:
        profile = self.profiles.get(soc_code) or self.profiles.get(base_soc(soc_code))
        if profile is None:
            raise InvariantError(f"No ability profile for occupation {soc_code}", module="scoring")
        return profile


def score_occupation(
    tasks: Sequence[TaskRecord], inputs: ScoringInputs, title: Optional[str] = None, shared_soc: bool = False
) -> OccupationScore:
    """Base score and per-task audit components for one occupation's tasks."""
    weights = compute_weights(tasks)
    soc = tasks[0].soc_code
    caps = occupation_caps(tasks, inputs.profile_for(soc), inputs.ability_map, inputs.rules, inputs.drop_unmapped)
    covs = [result.cov for result in task_covs(tasks, inputs.rubric)]
    components = tuple(
        TaskComponent(task_id=w.task_id, w=w.w, cap=float(c), cov=v) for w, c, v in zip(weights, caps, covs)
    )
    return OccupationScore(
        soc_code=soc,
        title=title,
        major_group=major_group(soc),
        base_score=base_ate(weights, caps.tolist(), covs),
        components=components,
        shared_soc=shared_soc,
    )


def group_occupations(tasks: Sequence[TaskRecord]) -> Dict[Tuple[str, str], List[TaskRecord]]:
    """Tasks grouped by (soc_code, title), in key order."""
    groups: Dict[Tuple[str, str], List[TaskRecord]] = defaultdict(list)
    for task in tasks:
        groups[(task.soc_code, task.title or "")].append(task)
    return {key: sorted(groups[key], key=lambda t: t.task_id) for key in sorted(groups)}


def _worker_count(parallelism: Optional[int]) -> int:
    return max(1, parallelism or os.cpu_count() or 1)


def score_corpus(
    tasks: Sequence[TaskRecord], inputs: ScoringInputs, parallelism: Optional[int] = None
) -> List[OccupationScore]:
    """
    Score every occupation of a corpus.

    Occupations are keyed by (soc_code, title) so distinct titles sharing a
    SOC code are kept apart and flagged. Output order is the key order for
    any worker count. Workers are threads; the scoring loop is pure Python
    and holds the GIL, so they bound concurrency but add no speed.
    """
    groups = group_occupations(tasks)
    titles_per_soc: Dict[str, int] = defaultdict(int)
    for soc, _ in groups:
        titles_per_soc[soc] += 1
    shared = {soc for soc, n in titles_per_soc.items() if n > 1}
    for soc in sorted(shared):
        logger.warning(f"SOC code {soc} carries {titles_per_soc[soc]} distinct occupation titles")

    def _score(item: Tuple[Tuple[str, str], List[TaskRecord]]) -> OccupationScore:
        (soc, title), occ_tasks = item
        return score_occupation(occ_tasks, inputs, title=title or None, shared_soc=soc in shared)

    workers = _worker_count(parallelism)
    if workers == 1:
        scores = [_score(item) for item in groups.items()]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(_score, groups.items()))
    logger.info(f"Scored {len(scores)} occupations with {workers} worker(s)")
    return scores


def score_grid(
    scores: Sequence[OccupationScore],
    model: AdoptionModel,
    taus: Sequence[float],
    region_ids: Optional[Sequence[str]] = None,
    mode: Union[str, VelocityMode] = VelocityMode.RESIDENCE,
    thresholds: RiskThresholds = DEFAULT_THRESHOLDS,
) -> List[AteRecord]:
    """ATE records for every (region, tau, occupation), in that nesting order."""
    region_ids = list(region_ids) if region_ids is not None else model.region_ids
    records = [
        ate(s.base_score, model.region(region_id), tau, mode, model, thresholds, occupation=s)
        for region_id in region_ids
        for tau in taus
        for s in scores
    ]
    logger.info(f"Computed {len(records)} ATE records ({len(region_ids)} regions x {len(taus)} time points)")
    return records


def reclassify(records: Sequence[AteRecord], thresholds: RiskThresholds) -> List[AteRecord]:
    """Re-derive risk classes under new thresholds; scores are untouched."""
    return [r.model_copy(update={"risk": thresholds.classify(r.ate)}) for r in records]


def risk_counts(records: Sequence[AteRecord]) -> Dict[RiskClass, int]:
    counts = {risk: 0 for risk in RiskClass}
    for record in records:
        counts[record.risk] += 1
    return counts


def rank_key(record: Union[AteRecord, OccupationScore]) -> Tuple[float, float, str, str]:
    """Descending ATE (or base score), ties broken by SOC code then title."""
    value = record.ate if isinstance(record, AteRecord) else record.base_score
    return (-value, -record.base_score, record.soc_code, record.title or "")


def select(records: Sequence[AteRecord], region_id: Optional[str] = None, tau: Optional[float] = None) -> List[AteRecord]:
    return [
        r for r in records if (region_id is None or r.region_id == region_id) and (tau is None or r.tau == float(tau))
    ]


def top_n(records: Sequence[AteRecord], n: int) -> List[AteRecord]:
    """The ``n`` highest-ATE records of one region-year."""
    if n < 0:
        raise InvariantError(f"n must be non-negative, got {n}", module="scoring")
    return sorted(records, key=rank_key)[:n]


def aggregate_share(records: Sequence[AteRecord], threshold: float) -> float:
    """Percentage of records with ATE at or above ``threshold``."""
    if not records:
        raise EmptyInputError("Cannot compute a share over no records", module="scoring")
    return 100.0 * sum(1 for r in records if r.ate >= threshold) / len(records)


class ShareRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    region_id: str
    major_group: str
    occupations: int
    crossing: int
    share_pct: float = Field(ge=0.0, le=100.0)
    mean_ate: float = Field(ge=0.0, le=1.0)


class ShareTable(BaseModel):
    """Per (region, major group) threshold-crossing shares and mean ATE."""

    model_config = ConfigDict(frozen=True)

    tau: float
    threshold: float
    rows: Tuple[ShareRow, ...]
    notes: Tuple[str, ...] = ()


def regional_share_table(
    records: Sequence[AteRecord],
    threshold: float = 0.35,
    region_ids: Optional[Sequence[str]] = None,
    groups: Optional[Sequence[str]] = None,
) -> ShareTable:
    """
    Share of occupations crossing ``threshold`` and unweighted mean ATE per region and major group.

    Args:
        records: Records of a single time point
        threshold: ATE cut, inclusive
        region_ids: Row order of regions (default: order of first appearance)
        groups: Major groups to report (default: every group present)

    Returns:
        ShareTable; (region, group) pairs without occupations are omitted and noted
    """
    taus = {r.tau for r in records}
    if len(taus) > 1:
        raise InvariantError(f"Share table needs a single time point, got {sorted(taus)}", module="scoring")

    cells: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    seen_regions: List[str] = []
    for record in records:
        cells[(record.region_id, record.major_group)].append(record.ate)
        if record.region_id not in seen_regions:
            seen_regions.append(record.region_id)

    region_order = list(region_ids) if region_ids is not None else seen_regions
    group_order = list(groups) if groups is not None else sorted({r.major_group for r in records})

    rows: List[ShareRow] = []
    notes: List[str] = []
    for region_id in region_order:
        for group in group_order:
            values = cells.get((region_id, group), [])
            if not values:
                notes.append(f"no occupations in group {group} for region {region_id}")
                continue
            crossing = sum(1 for v in values if v >= threshold)
            rows.append(
                ShareRow(
                    region_id=region_id,
                    major_group=group,
                    occupations=len(values),
                    crossing=crossing,
                    share_pct=100.0 * crossing / len(values),
                    mean_ate=float(np.mean(values)),
                )
            )
    for note in notes:
        logger.warning(f"Share table: {note}")
    return ShareTable(tau=taus.pop() if taus else 0.0, threshold=threshold, rows=tuple(rows), notes=tuple(notes))


class HistogramBin(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    count: int = Field(ge=0)


def histogram(records: Sequence[AteRecord], bin_width: float = 0.05) -> List[HistogramBin]:
    """
    Left-closed, right-open ATE bins aligned to multiples of ``bin_width``.

    Bins run from the lowest to the highest occupied bin, empty ones included.
    """
    if bin_width <= 0:
        raise InvariantError(f"Bin width must be positive, got {bin_width}", module="scoring")
    if not records:
        return []
    # snap values within float noise of an edge onto that edge
    indices = [math.floor(round(r.ate / bin_width, 9)) for r in records]
    counts: Dict[int, int] = defaultdict(int)
    for index in indices:
        counts[index] += 1
    return [
        HistogramBin(lower=round(i * bin_width, 10), upper=round((i + 1) * bin_width, 10), count=counts.get(i, 0))
        for i in range(min(indices), max(indices) + 1)
    ]


def write_occupation_scores(scores: Sequence[OccupationScore], out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Persist base scores and their audit components.

    Floats are written with ``repr`` so re-reading gives identical values.
    """
    out_dir = Path(out_dir)
    occupations = pd.DataFrame(
        [[s.soc_code, s.title or "", s.major_group, repr(s.base_score), "1" if s.shared_soc else "0"] for s in scores],
        columns=["soc_code", "title", "major_group", "base_score", "shared_soc"],
    )
    components = pd.DataFrame(
        [
            [s.soc_code, s.title or "", c.task_id, repr(c.w), repr(c.cap), repr(c.cov)]
            for s in scores
            for c in s.components
        ],
        columns=["soc_code", "title", "task_id", "w", "cap", "cov"],
    )
    return {
        "occupations": write_frame(occupations, out_dir / "occupations.tsv"),
        "components": write_frame(components, out_dir / "components.tsv"),
    }


def read_occupation_scores(out_dir: Union[str, Path]) -> List[OccupationScore]:
    """Load base scores written by ``write_occupation_scores``; components are attached when present."""
    out_dir = Path(out_dir)
    frame = read_table(out_dir / "occupations.tsv")
    attached: Dict[Tuple[str, str], List[TaskComponent]] = defaultdict(list)
    components_path = out_dir / "components.tsv"
    if components_path.exists():
        for row in read_table(components_path).to_dict("records"):
            attached[(row["soc_code"], row["title"])].append(
                TaskComponent(task_id=row["task_id"], w=float(row["w"]), cap=float(row["cap"]), cov=float(row["cov"]))
            )
    return [
        OccupationScore(
            soc_code=row["soc_code"],
            title=row["title"] or None,
            major_group=row["major_group"],
            base_score=float(row["base_score"]),
            components=tuple(attached.get((row["soc_code"], row["title"]), ())),
            shared_soc=row["shared_soc"] == "1",
        )
        for row in frame.to_dict("records")
    ]

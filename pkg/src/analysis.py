"""
Sensitivity suites, rank-correlation validation and reinstatement arithmetic.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy import stats

from .adoption import TIERS, AdoptionModel, TierParams, logistic_v
from .capmodel import AbilityCategory, shift_category
from .covmodel import relax_multipliers
from .exceptions import EmptyInputError, InvariantError, PerturbationError
from .ingest import Source, TaskRecord, base_soc, read_table
from .scoring import OccupationScore, ScoringInputs, score_corpus

logger = logging.getLogger(__name__)

OAT_PARAMETERS = ("k", "tau0", "L", "tier", "cov_multipliers", "cap_uniform")
CURVE_PARAMETERS = ("k", "tau0", "L", "tier")


class ScenarioSpec(BaseModel):
    """A named set of per-tier growth rates; every other parameter stays at its default."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    k: Dict[int, float]
    note: str = ""

    @field_validator("k")
    @classmethod
    def _valid_rates(cls, k: Dict[int, float]) -> Dict[int, float]:
        for tier, rate in k.items():
            if tier not in TIERS:
                raise ValueError(f"unknown tier {tier}")
            if rate <= 0:
                raise ValueError(f"growth rate for tier {tier} must be positive, got {rate}")
        return dict(sorted(k.items()))


DEFAULT_SCENARIOS = (
    ScenarioSpec(name="conservative", k={1: 0.40, 2: 0.30, 3: 0.23}, note="tau0, L and base scores held at defaults"),
    ScenarioSpec(name="baseline", k={1: 0.85, 2: 0.62, 3: 0.48}, note="calibrated values"),
    ScenarioSpec(name="aggressive", k={1: 1.20, 2: 0.85, 3: 0.65}, note="tau0, L and base scores held at defaults"),
)


def _ranking(scores: Sequence[OccupationScore], velocity: float) -> List[Tuple[str, str]]:
    ordered = sorted(scores, key=lambda s: (-(s.base_score * velocity), -s.base_score, s.soc_code, s.title or ""))
    return [s.key for s in ordered]


class OatResult(BaseModel):
    """Before/after report of a one-at-a-time perturbation in one region and year."""

    model_config = ConfigDict(frozen=True)

    parameter: str
    delta: float
    region_id: str
    tau: float
    v_before: float
    v_after: float
    top_soc: str = ""
    top_title: Optional[str] = None
    top_ate_before: float = 0.0
    top_ate_after: float = 0.0
    rank_changed: bool = False

    @property
    def v_change_pct(self) -> float:
        return 100.0 * (self.v_after / self.v_before - 1.0)


def _perturbed_tier(params: TierParams, parameter: str, delta: float) -> TierParams:
    values = params.model_dump()
    if parameter == "k":
        values["k"] = params.k * (1.0 + delta)
    elif parameter == "L":
        values["L"] = params.L * (1.0 + delta)
    else:
        values["tau0"] = params.tau0 + delta
    try:
        return TierParams(**values)
    except ValidationError as e:
        raise PerturbationError(f"Perturbing {parameter} by {delta:+g} leaves the valid range: {e.errors()[0]['msg']}") from e


def oat_sensitivity(
    parameter: str,
    delta: float,
    model: AdoptionModel,
    scores: Sequence[OccupationScore],
    region_id: str,
    tau: float,
    corpus: Sequence[TaskRecord] = (),
    inputs: Optional[ScoringInputs] = None,
    category: Union[str, AbilityCategory] = AbilityCategory.COGNITIVE,
    parallelism: Optional[int] = None,
) -> OatResult:
    """
    Perturb one parameter and report the effect on V, the top occupation's ATE and the ranking.

    Args:
        parameter: "k" and "L" (relative delta), "tau0" (absolute delta in
            years), "tier" (delta is the region's new tier), "cov_multipliers"
            (delta is the fraction by which every multiplier moves toward 1)
            or "cap_uniform" (relative shift of one ability category's scores)
        delta: Perturbation size, as above
        model: Baseline adoption model
        scores: Baseline occupation scores
        region_id: Region the comparison is made in
        tau: Decimal year
        corpus: Task corpus, needed to rescore for cov_multipliers/cap_uniform
        inputs: Scoring inputs, needed to rescore
        category: Ability category shifted by cap_uniform

    Returns:
        OatResult
    """
    if parameter not in OAT_PARAMETERS:
        raise PerturbationError(f"Unknown sensitivity parameter '{parameter}'")
    if not scores:
        raise EmptyInputError("Sensitivity needs at least one scored occupation", module="analysis")

    region = model.region(region_id)
    v_before = model.residence_velocity(region_id, tau)
    after_scores: Sequence[OccupationScore] = scores
    v_after = v_before

    if parameter in ("k", "L", "tau0"):
        perturbed = _perturbed_tier(model.tiers[region.tier], parameter, delta)
        v_after = logistic_v(perturbed, tau)
    elif parameter == "tier":
        tier = int(delta)
        if tier not in TIERS or tier != delta:
            raise PerturbationError(f"Tier reassignment target must be one of {TIERS}, got {delta}")
        v_after = model.with_region_tier(region_id, tier).residence_velocity(region_id, tau)
    else:
        if inputs is None or not corpus:
            raise PerturbationError(f"Perturbing {parameter} needs the task corpus and scoring inputs")
        try:
            if parameter == "cov_multipliers":
                changed = ScoringInputs(
                    inputs.ability_map, relax_multipliers(inputs.rubric, delta), inputs.profiles, inputs.rules, inputs.drop_unmapped
                )
            else:
                changed = ScoringInputs(
                    shift_category(inputs.ability_map, category, 1.0 + delta),
                    inputs.rubric,
                    inputs.profiles,
                    inputs.rules,
                    inputs.drop_unmapped,
                )
        except InvariantError as e:
            raise PerturbationError(f"Perturbing {parameter} by {delta:+g} is invalid: {e.message}") from e
        after_scores = score_corpus(corpus, changed, parallelism)

    before_order = _ranking(scores, v_before)
    after_order = _ranking(after_scores, v_after)
    top_key = before_order[0]
    top_before = next(s for s in scores if s.key == top_key)
    top_after = next((s for s in after_scores if s.key == top_key), top_before)

    result = OatResult(
        parameter=parameter,
        delta=delta,
        region_id=region_id,
        tau=tau,
        v_before=v_before,
        v_after=v_after,
        top_soc=top_before.soc_code,
        top_title=top_before.title,
        top_ate_before=top_before.base_score * v_before,
        top_ate_after=top_after.base_score * v_after,
        rank_changed=before_order != after_order,
    )
    logger.info(
        f"OAT {parameter} {delta:+g} in {region_id} @ {tau}: V {v_before:.4f} -> {v_after:.4f} "
        f"({result.v_change_pct:+.1f}%), rank changed: {result.rank_changed}"
    )
    return result


class StressCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    tier: int
    scenario: str
    year: float
    share_pct: float = Field(ge=0.0, le=100.0)


class StressGrid(BaseModel):
    """Share of occupations crossing a threshold per (tier, scenario, year)."""

    model_config = ConfigDict(frozen=True)

    threshold: float
    scenarios: Tuple[str, ...]
    years: Tuple[float, ...]
    cells: Tuple[StressCell, ...]

    def value(self, tier: int, scenario: str, year: float) -> float:
        for cell in self.cells:
            if cell.tier == tier and cell.scenario == scenario and cell.year == float(year):
                return cell.share_pct
        raise KeyError((tier, scenario, year))


def k_stress(
    base_scores: Sequence[Union[OccupationScore, float]],
    scenarios: Sequence[ScenarioSpec] = DEFAULT_SCENARIOS,
    years: Sequence[float] = (2025, 2027, 2030),
    threshold: float = 0.35,
    tiers: Optional[Mapping[int, TierParams]] = None,
    parallelism: Optional[int] = None,
) -> StressGrid:
    """
    Growth-rate stress test.

    Every occupation's base score is multiplied by each tier's velocity under
    each scenario's k (tau0 and L at their defaults); a cell reports the
    percentage of occupations at or above ``threshold``. Cells are emitted in
    tier, scenario, year order.
    """
    if not base_scores:
        raise EmptyInputError("Stress test needs at least one base score", module="analysis")
    tiers = dict(tiers) if tiers is not None else AdoptionModel().tiers
    bases = np.array([s.base_score if isinstance(s, OccupationScore) else float(s) for s in base_scores])
    specs = [(tier, scenario, float(year)) for tier in TIERS for scenario in scenarios for year in years]

    def _cell(spec: Tuple[int, ScenarioSpec, float]) -> StressCell:
        tier, scenario, year = spec
        params = tiers[tier].model_copy(update={"k": scenario.k.get(tier, tiers[tier].k)})
        crossing = int(np.count_nonzero(bases * logistic_v(params, year) >= threshold))
        return StressCell(tier=tier, scenario=scenario.name, year=year, share_pct=100.0 * crossing / len(bases))

    if parallelism and parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            cells = list(pool.map(_cell, specs))
    else:
        cells = [_cell(spec) for spec in specs]
    return StressGrid(
        threshold=threshold,
        scenarios=tuple(s.name for s in scenarios),
        years=tuple(float(y) for y in years),
        cells=tuple(cells),
    )


def tier_ordering_holds(grid: StressGrid) -> Dict[Tuple[str, float], bool]:
    """Whether Tier 1 >= Tier 2 >= Tier 3 holds in every (scenario, year) column."""
    return {
        (scenario, year): grid.value(1, scenario, year) >= grid.value(2, scenario, year) >= grid.value(3, scenario, year)
        for scenario in grid.scenarios
        for year in grid.years
    }


class SpearmanResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float = Field(ge=-1.0, le=1.0)
    p_value: Optional[float] = None
    n: int


def spearman(x: Sequence[float], y: Sequence[float]) -> SpearmanResult:
    """
    Spearman rank correlation with midranks for ties.

    rho is the product-moment correlation of the two rank vectors; the
    two-sided p-value uses the t approximation with n - 2 degrees of freedom
    (None when n < 3).
    """
    if len(x) != len(y):
        raise InvariantError(f"Length mismatch: {len(x)} vs {len(y)}", module="analysis")
    n = len(x)
    if n < 2:
        raise InvariantError(f"Rank correlation needs at least 2 pairs, got {n}", module="analysis")

    rx = stats.rankdata(np.asarray(x, dtype=float), method="average")
    ry = stats.rankdata(np.asarray(y, dtype=float), method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise InvariantError("Rank correlation is undefined for a constant vector", module="analysis")

    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    rho = min(1.0, max(-1.0, rho))

    p_value: Optional[float] = None
    if n > 2:
        if abs(rho) >= 1.0:
            p_value = 0.0
        else:
            t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
            p_value = float(2.0 * stats.t.sf(abs(t), n - 2))
    return SpearmanResult(rho=rho, p_value=p_value, n=n)


class RankDivergence(BaseModel):
    model_config = ConfigDict(frozen=True)

    soc_code: str
    engine_rank: float
    index_rank: float

    @property
    def shift(self) -> float:
        return self.engine_rank - self.index_rank


class ValidationResult(BaseModel):
    """Agreement between engine base scores and an external exposure index."""

    model_config = ConfigDict(frozen=True)

    index_name: str
    matched: int
    engine_codes: int
    correlation: SpearmanResult
    divergences: Tuple[RankDivergence, ...] = ()


def validate_against_index(
    scores: Sequence[OccupationScore], index: Mapping[str, float], name: str, top_k: int = 10
) -> ValidationResult:
    """
    Spearman correlation between engine scores and an external index.

    Occupations are joined on the six-digit SOC code; engine scores of
    several occupations sharing a code are averaged. Ranks are descending
    (rank 1 is the most exposed) and the ``top_k`` largest rank shifts are
    reported.
    """
    collected: Dict[str, List[float]] = {}
    for s in scores:
        collected.setdefault(base_soc(s.soc_code), []).append(s.base_score)
    engine = {soc: float(np.mean(values)) for soc, values in collected.items()}
    codes = sorted(set(engine) & set(index))
    if len(codes) < 2:
        raise EmptyInputError(f"Index '{name}' matches {len(codes)} occupation codes; need at least 2", module="analysis")

    engine_values = [engine[c] for c in codes]
    index_values = [float(index[c]) for c in codes]
    correlation = spearman(engine_values, index_values)

    engine_ranks = stats.rankdata([-v for v in engine_values], method="average")
    index_ranks = stats.rankdata([-v for v in index_values], method="average")
    divergences = sorted(
        (RankDivergence(soc_code=c, engine_rank=float(e), index_rank=float(i)) for c, e, i in zip(codes, engine_ranks, index_ranks)),
        key=lambda d: (-abs(d.shift), d.soc_code),
    )[:top_k]

    logger.info(f"Validation against '{name}': rho={correlation.rho:.3f} on {len(codes)} matched codes")
    return ValidationResult(
        index_name=name,
        matched=len(codes),
        engine_codes=len(engine),
        correlation=correlation,
        divergences=tuple(divergences),
    )


class ReinstatementScenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str = ""
    base_workers: int = Field(ge=0)
    conversion: float = Field(ge=0.0, le=1.0)
    reinstatement_low: float = Field(default=0.5, ge=0.0, le=1.0)
    reinstatement_high: float = Field(default=0.8, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered(self) -> "ReinstatementScenario":
        if self.reinstatement_low > self.reinstatement_high:
            raise ValueError("reinstatement_low must not exceed reinstatement_high")
        return self


class ReinstatementResult(BaseModel):
    """Displaced and reinstated positions at full precision; round at emission."""

    model_config = ConfigDict(frozen=True)

    label: str = ""
    conversion: float
    displaced: float
    reinstated_low: float
    reinstated_high: float

    def rounded(self) -> Tuple[int, int, int]:
        return (round_thousand(self.displaced), round_thousand(self.reinstated_low), round_thousand(self.reinstated_high))


def round_thousand(value: float) -> int:
    """Nearest multiple of 1,000, halves rounding up."""
    return int(math.floor(value / 1000.0 + 0.5)) * 1000


def reinstatement_bounds(scenario: ReinstatementScenario) -> ReinstatementResult:
    displaced = scenario.base_workers * scenario.conversion
    return ReinstatementResult(
        label=scenario.label,
        conversion=scenario.conversion,
        displaced=displaced,
        reinstated_low=displaced * scenario.reinstatement_low,
        reinstated_high=displaced * scenario.reinstatement_high,
    )


def reinstatement_table(
    base_workers: int = 580_000,
    conversions: Optional[Mapping[str, float]] = None,
    reinstatement_low: float = 0.5,
    reinstatement_high: float = 0.8,
) -> List[ReinstatementResult]:
    """One result per labelled conversion rate (default Low/Medium/High = 10/20/30%)."""
    conversions = conversions if conversions is not None else {"Low": 0.10, "Medium": 0.20, "High": 0.30}
    try:
        scenarios = [
            ReinstatementScenario(
                label=label,
                base_workers=base_workers,
                conversion=rate,
                reinstatement_low=reinstatement_low,
                reinstatement_high=reinstatement_high,
            )
            for label, rate in conversions.items()
        ]
    except ValidationError as e:
        raise InvariantError(f"Invalid reinstatement scenario: {e.errors()[0]['msg']}", module="analysis") from e
    return [reinstatement_bounds(s) for s in scenarios]


class EmergingRole(BaseModel):
    model_config = ConfigDict(frozen=True)

    cluster: str = Field(min_length=1)
    role: str = Field(min_length=1)


def load_emerging_roles(source: Union[Source, Path]) -> List[EmergingRole]:
    """Load the emerging-role catalog (cluster, role), keeping file order."""
    frame = read_table(source)
    try:
        roles = [EmergingRole(cluster=row["cluster"].strip(), role=row["role"].strip()) for row in frame.to_dict("records")]
    except (KeyError, ValidationError) as e:
        raise InvariantError(f"Invalid emerging-role catalog: {e}", module="analysis") from e
    logger.info(f"Loaded {len(roles)} emerging roles in {len({r.cluster for r in roles})} clusters")
    return roles

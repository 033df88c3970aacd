"""
Run configuration and the parameter ledger.

Precedence, lowest first: shipped defaults, the YAML config file, the
ATE_OUTPUT_DIR environment variable (output directory only), command-line
flags. Relative paths in a config file resolve against the file's directory.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .adoption import RegionConfig, TierParams, VelocityMode, parse_tau
from .analysis import ScenarioSpec
from .capmodel import AbilityCategory
from .exceptions import AteError, ConfigError
from .scoring import RiskThresholds

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULTS_DIR = REPO_ROOT / "data" / "defaults"
DEFAULT_LEDGER = DEFAULTS_DIR / "parameters.yaml"
OUTPUT_DIR_ENV = "ATE_OUTPUT_DIR"


class ReportSettings(BaseModel):
    top_n: int = Field(default=20, ge=1)
    top_n_region: str = "sf_bay"
    rank_year: float = 2027
    table_years: Tuple[float, ...] = (2025, 2027, 2030)
    share_years: Tuple[float, ...] = (2027, 2030)
    share_threshold: float = Field(default=0.35, ge=0.0, le=1.0)
    histogram_year: float = 2027
    histogram_bin_width: float = Field(default=0.05, gt=0.0)


class ReclassifySettings(BaseModel):
    region: str = "seattle"
    tier: int = Field(default=1, ge=1, le=3)


class SensitivitySettings(BaseModel):
    region: str = "sf_bay"
    year: float = 2027
    k_relative: float = 0.20
    L_relative: float = 0.10
    tau0_absolute: float = 0.5
    cov_relax_fraction: float = 0.5
    cap_relative: float = 0.10
    cap_category: AbilityCategory = AbilityCategory.COGNITIVE
    reclassify: ReclassifySettings = Field(default_factory=ReclassifySettings)


class ReinstatementSettings(BaseModel):
    base_workers: int = Field(default=580_000, ge=0)
    conversions: Dict[str, float] = Field(default_factory=lambda: {"Low": 0.10, "Medium": 0.20, "High": 0.30})
    reinstatement_low: float = 0.5
    reinstatement_high: float = 0.8


class ParameterLedger(BaseModel):
    """Versioned calibration values stamped into every emitted table."""

    model_config = ConfigDict(frozen=True)

    version: str
    quarter_offset: float = 0.125
    tiers: Dict[int, TierParams]
    regions: Tuple[RegionConfig, ...]
    thresholds: RiskThresholds = Field(default_factory=RiskThresholds)
    major_groups: Dict[str, str] = Field(default_factory=dict)
    grid_years: Tuple[float, ...] = (2025, 2026, 2027, 2030)
    report: ReportSettings = Field(default_factory=ReportSettings)
    scenarios: Tuple[ScenarioSpec, ...] = ()
    stress_years: Tuple[float, ...] = (2025, 2027, 2030)
    stress_threshold: float = 0.35
    sensitivity: SensitivitySettings = Field(default_factory=SensitivitySettings)
    reinstatement: ReinstatementSettings = Field(default_factory=ReinstatementSettings)

    @property
    def region_ids(self) -> List[str]:
        return [r.region_id for r in self.regions]


def _first_error(error: ValidationError, prefix: str) -> ConfigError:
    detail = error.errors()[0]
    location = ".".join(str(part) for part in detail.get("loc", ()))
    field = f"{prefix}.{location}" if location else prefix
    return ConfigError(field, detail.get("msg", "invalid value"))


def _read_yaml(path: Path, field: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError(field, f"file not found: {path}")
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(field, f"Failed to read {path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(field, f"{path} does not contain a mapping")
    return document


def load_ledger(path: Union[str, Path] = DEFAULT_LEDGER) -> ParameterLedger:
    """Load the parameter ledger; time points may be written as 2027 or "2025Q1"."""
    path = Path(path)
    document = _read_yaml(path, "ledger")
    offset = float(document.get("quarter_offset", 0.125))
    for key in ("grid_years", "stress_years"):
        if key in document:
            document[key] = [parse_tau(y, offset) for y in document[key]]
    report = document.get("report", {})
    for key in ("table_years", "share_years"):
        if key in report:
            report[key] = [parse_tau(y, offset) for y in report[key]]
    try:
        ledger = ParameterLedger(**document)
    except ValidationError as e:
        raise _first_error(e, "ledger") from e
    logger.info(f"Loaded parameter ledger {ledger.version} from {path}")
    return ledger


class DataPaths(BaseModel):
    """Input files; corpus inputs are optional in fixture mode."""

    task_corpus: Optional[Path] = None
    ability_profiles: Optional[Path] = None
    employment: Optional[Path] = None
    # O*NET exports: Task Ratings for a Task Statements corpus, Occupation Data for titles
    task_ratings: Optional[Path] = None
    occupations: Optional[Path] = None
    ability_map: Path = DEFAULTS_DIR / "ability_map.tsv"
    modifiers: Path = DEFAULTS_DIR / "text_modifiers.tsv"
    rubric: Path = DEFAULTS_DIR / "cov_rubric.yaml"
    semantic_rubric: Path = DEFAULTS_DIR / "cov_rubric_semantic.yaml"
    telework: Path = DEFAULTS_DIR / "telework.tsv"
    tier_shares: Path = DEFAULTS_DIR / "tier_shares.tsv"
    annotations: Path = DEFAULTS_DIR / "annotations.tsv"
    emerging_roles: Path = DEFAULTS_DIR / "emerging_roles.tsv"
    external_indices: Dict[str, Path] = Field(default_factory=dict)


CORPUS_FIELDS = ("task_corpus", "ability_profiles", "employment")
OPTIONAL_CORPUS_FIELDS = ("task_ratings", "occupations")
CALIBRATION_FIELDS = (
    "ability_map",
    "modifiers",
    "rubric",
    "semantic_rubric",
    "telework",
    "tier_shares",
    "annotations",
    "emerging_roles",
)


class FixtureSettings(BaseModel):
    enabled: bool = False
    seed: int = 7
    n_occupations: int = Field(default=36, ge=1)
    tasks_per_occ: int = Field(default=12, ge=1)


class Overrides(BaseModel):
    """Ledger values replaced for one run."""

    tiers: Dict[int, Dict[str, float]] = Field(default_factory=dict)
    thresholds: Dict[str, float] = Field(default_factory=dict)
    years: Optional[List[Union[str, float]]] = None
    scenarios: Optional[List[Dict[str, Any]]] = None


class RunConfig(BaseModel):
    ledger: Path = DEFAULT_LEDGER
    paths: DataPaths = Field(default_factory=DataPaths)
    fixture: FixtureSettings = Field(default_factory=FixtureSettings)
    overrides: Overrides = Field(default_factory=Overrides)
    velocity_mode: VelocityMode = VelocityMode.RESIDENCE
    output_dir: Path = Path("output")
    parallelism: Optional[int] = Field(default=None, ge=1)
    drop_unmapped: bool = False
    index_score_column: str = "score"
    render_format: str = "delimited"
    oews_areas: Dict[str, str] = Field(default_factory=dict)

    @field_validator("oews_areas", mode="before")
    @classmethod
    def _area_codes_as_text(cls, value: Any) -> Any:
        # YAML reads bare area codes such as 42660 as integers
        if isinstance(value, Mapping):
            return {str(area): region for area, region in value.items()}
        return value

    @property
    def normalized_dir(self) -> Path:
        return self.output_dir / "normalized"

    @property
    def scores_dir(self) -> Path:
        return self.output_dir / "scores"

    @property
    def analysis_dir(self) -> Path:
        return self.output_dir / "analysis"

    @property
    def reports_dir(self) -> Path:
        return self.output_dir / "reports"

    def validate_paths(self) -> None:
        """Every referenced file must exist; corpus files may be absent in fixture mode."""
        for name in CALIBRATION_FIELDS:
            path = getattr(self.paths, name)
            if not path.exists():
                raise ConfigError(f"paths.{name}", f"file not found: {path}")
        if self.fixture.enabled:
            return
        for name in CORPUS_FIELDS:
            path = getattr(self.paths, name)
            if path is None:
                raise ConfigError(f"paths.{name}", "not set and fixture mode is disabled")
            if not path.exists():
                raise ConfigError(f"paths.{name}", f"file not found: {path}")
        for name in OPTIONAL_CORPUS_FIELDS:
            path = getattr(self.paths, name)
            if path is not None and not path.exists():
                raise ConfigError(f"paths.{name}", f"file not found: {path}")


def _resolve(value: Any, base: Path) -> Any:
    if isinstance(value, str) and value and not Path(value).is_absolute():
        return str((base / value).resolve())
    return value


def _deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = _deep_merge(dict(current) if isinstance(current, Mapping) else {}, value)
        elif value is not None:
            merged[key] = value
    return merged


def load_run_config(
    config_path: Optional[Union[str, Path]] = None,
    flags: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Build the run configuration.

    Args:
        config_path: Optional YAML config file
        flags: Command-line values (nested mappings merge into sections;
            None values are ignored)
        env: Environment (default: os.environ)

    Returns:
        Validated RunConfig; paths are not checked here (see validate_paths)
    """
    env = os.environ if env is None else env
    document: Dict[str, Any] = {}
    if config_path is not None:
        config_path = Path(config_path)
        document = _read_yaml(config_path, "config")
        base = config_path.resolve().parent
        if "ledger" in document:
            document["ledger"] = _resolve(document["ledger"], base)
        if "output_dir" in document:
            document["output_dir"] = _resolve(document["output_dir"], base)
        paths = dict(document.get("paths") or {})
        for key, value in paths.items():
            if key == "external_indices":
                paths[key] = {name: _resolve(p, base) for name, p in (value or {}).items()}
            else:
                paths[key] = _resolve(value, base)
        document["paths"] = paths

    if env.get(OUTPUT_DIR_ENV):
        document["output_dir"] = env[OUTPUT_DIR_ENV]
    document = _deep_merge(document, flags or {})

    try:
        config = RunConfig(**document)
    except ValidationError as e:
        raise _first_error(e, "config") from e
    logger.debug(f"Run configuration: {config.model_dump(mode='json')}")
    return config


def apply_overrides(ledger: ParameterLedger, overrides: Overrides) -> ParameterLedger:
    """Ledger with run overrides applied and re-validated."""
    update: Dict[str, Any] = {}
    try:
        if overrides.tiers:
            tiers = dict(ledger.tiers)
            for tier, values in overrides.tiers.items():
                if tier not in tiers:
                    raise ConfigError(f"overrides.tiers.{tier}", "unknown tier")
                try:
                    tiers[tier] = TierParams(**{**tiers[tier].model_dump(), **values})
                except ValidationError as e:
                    raise _first_error(e, f"overrides.tiers.{tier}") from e
            update["tiers"] = tiers
        if overrides.thresholds:
            try:
                update["thresholds"] = RiskThresholds(**{**ledger.thresholds.model_dump(), **overrides.thresholds})
            except ValidationError as e:
                raise _first_error(e, "overrides.thresholds") from e
        if overrides.years is not None:
            update["grid_years"] = tuple(parse_tau(y, ledger.quarter_offset) for y in overrides.years)
        if overrides.scenarios is not None:
            try:
                update["scenarios"] = tuple(ScenarioSpec(**s) for s in overrides.scenarios)
            except ValidationError as e:
                raise _first_error(e, "overrides.scenarios") from e
    except ConfigError:
        raise
    except AteError as e:
        raise ConfigError("overrides", e.message) from e
    if update:
        logger.info(f"Applied overrides: {', '.join(sorted(update))}")
    return ledger.model_copy(update=update)

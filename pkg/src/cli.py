"""
Command-line pipeline.

    python -m src.cli --config run.yaml ingest
    python -m src.cli --config run.yaml score
    python -m src.cli --config run.yaml analyze
    python -m src.cli --config run.yaml report
    python -m src.cli fixture --seed 7 --out fixture_data

Each subcommand reads what the previous one wrote under the output
directory, so re-running any of them on unchanged inputs reproduces the
same bytes.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click

from . import __version__
from .adoption import AdoptionModel, VelocityMode, velocity_table
from .analysis import (
    DEFAULT_SCENARIOS,
    OatResult,
    ValidationResult,
    k_stress,
    load_emerging_roles,
    oat_sensitivity,
    reinstatement_table,
    tier_ordering_holds,
    validate_against_index,
)
from .capmodel import AbilityMap, TextModifierRule, load_ability_map, load_modifier_rules
from .config import ParameterLedger, RunConfig, apply_overrides, load_ledger, load_run_config
from .covmodel import CovRubric, load_rubric, pilot_compare
from .exceptions import AteError, ConfigError, PerturbationError
from .ingest import (
    MAX_FIXTURE_OCCUPATIONS,
    AbilityProfile,
    RejectReport,
    Source,
    TaskRecord,
    TeleworkTable,
    TierShareTable,
    adapt_oews,
    adapt_onet_abilities,
    adapt_onet_tasks,
    dump_normalized,
    generate_fixture_corpus,
    parse_ability_profiles,
    parse_employment,
    parse_external_index,
    parse_task_corpus,
    parse_telework,
    parse_tier_shares,
    source_layout,
    write_reject_report,
)
from .report import (
    Annotation,
    Provenance,
    emerging_roles_artifact,
    file_digest,
    histogram_artifact,
    k_stress_artifact,
    load_annotations,
    pilot_artifact,
    regional_shares_artifact,
    reinstatement_artifact,
    remote_deltas_artifact,
    scores_artifact,
    sensitivity_artifact,
    telework_artifact,
    tier_params_artifact,
    tier_shares_artifact,
    top_n_artifact,
    validation_artifact,
    velocity_artifact,
    write_artifact,
)
from .scoring import (
    AteRecord,
    OccupationScore,
    RiskClass,
    ScoringInputs,
    histogram,
    read_occupation_scores,
    regional_share_table,
    risk_counts,
    score_corpus,
    score_grid,
    select,
    write_occupation_scores,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Calibration:
    ability_map: AbilityMap
    rules: Sequence[TextModifierRule]
    rubric: CovRubric
    semantic_rubric: CovRubric
    telework: TeleworkTable
    tier_shares: TierShareTable
    annotations: Dict[str, Annotation]


@dataclass(frozen=True)
class Workspace:
    """Everything a subcommand needs besides the corpus."""

    config: RunConfig
    ledger: ParameterLedger
    calibration: Calibration
    provenance: Provenance

    def adoption_model(self) -> AdoptionModel:
        return AdoptionModel(self.ledger.tiers, self.ledger.regions, self.calibration.telework, self.calibration.tier_shares)

    @property
    def mode(self) -> VelocityMode:
        return self.config.velocity_mode


def _corpus_digests(config: RunConfig) -> Dict[str, str]:
    if config.fixture.enabled:
        f = config.fixture
        return {"corpus": f"fixture:seed={f.seed},occupations={f.n_occupations},tasks={f.tasks_per_occ}"}
    names = ("task_corpus", "ability_profiles", "employment", "task_ratings", "occupations")
    return {name: file_digest(getattr(config.paths, name)) for name in names if getattr(config.paths, name) is not None}


def open_workspace(config: RunConfig) -> Workspace:
    """Validate paths, load the ledger (with overrides) and the calibration files."""
    config.validate_paths()
    ledger = apply_overrides(load_ledger(config.ledger), config.overrides)
    paths = config.paths
    calibration = Calibration(
        ability_map=load_ability_map(paths.ability_map),
        rules=load_modifier_rules(paths.modifiers),
        rubric=load_rubric(paths.rubric),
        semantic_rubric=load_rubric(paths.semantic_rubric),
        telework=parse_telework(paths.telework),
        tier_shares=parse_tier_shares(paths.tier_shares),
        annotations=load_annotations(paths.annotations),
    )
    inputs = {
        "ledger": file_digest(config.ledger),
        **{name: file_digest(getattr(paths, name)) for name in ("ability_map", "modifiers", "rubric", "semantic_rubric", "telework", "tier_shares")},
        **_corpus_digests(config),
    }
    provenance = Provenance(engine_version=__version__, ledger_version=ledger.version, inputs=inputs)
    return Workspace(config, ledger, calibration, provenance)


def _load_normalized(config: RunConfig) -> Tuple[List[TaskRecord], List[AbilityProfile]]:
    tasks_path = config.normalized_dir / "tasks.tsv"
    profiles_path = config.normalized_dir / "ability_profiles.tsv"
    if not tasks_path.exists() or not profiles_path.exists():
        raise ConfigError("output_dir", f"no normalized data under {config.normalized_dir}; run ingest first")
    tasks, _ = parse_task_corpus(tasks_path)
    profiles, _ = parse_ability_profiles(profiles_path)
    return tasks, profiles


def _load_scores(config: RunConfig) -> List[OccupationScore]:
    if not (config.scores_dir / "occupations.tsv").exists():
        raise ConfigError("output_dir", f"no scores under {config.scores_dir}; run score first")
    return read_occupation_scores(config.scores_dir)


def _scoring_inputs(ws: Workspace, profiles: Sequence[AbilityProfile]) -> ScoringInputs:
    return ScoringInputs(
        ability_map=ws.calibration.ability_map,
        rubric=ws.calibration.rubric,
        profiles={p.soc_code: p for p in profiles},
        rules=ws.calibration.rules,
        drop_unmapped=ws.config.drop_unmapped,
    )


def _corpus_sources(config: RunConfig) -> Tuple[Source, Source, Source]:
    """Task, ability and employment sources, with O*NET and OEWS exports mapped onto the normalized schema."""
    paths = config.paths
    tasks: Source = paths.task_corpus
    if source_layout(paths.task_corpus) == "onet":
        if paths.task_ratings is None:
            raise ConfigError("paths.task_ratings", "required when paths.task_corpus is an O*NET Task Statements file")
        tasks = adapt_onet_tasks(paths.task_corpus, paths.task_ratings, paths.occupations)
        logger.info(f"{paths.task_corpus}: O*NET task statements, ratings from {paths.task_ratings}")

    profiles: Source = paths.ability_profiles
    if source_layout(paths.ability_profiles) == "onet":
        profiles = adapt_onet_abilities(paths.ability_profiles)
        logger.info(f"{paths.ability_profiles}: O*NET abilities")

    employment: Source = paths.employment
    if source_layout(paths.employment) == "oews":
        if not config.oews_areas:
            raise ConfigError("oews_areas", "required when paths.employment is an OEWS export")
        employment = adapt_oews(paths.employment, config.oews_areas)
        logger.info(f"{paths.employment}: OEWS export, {len(config.oews_areas)} mapped areas")
    return tasks, profiles, employment


def cmd_ingest(config: RunConfig) -> Tuple[Dict[str, Path], List[RejectReport]]:
    """Parse (or generate) the corpus and write the normalized dump plus a reject report."""
    ws = open_workspace(config)
    if config.fixture.enabled:
        f = config.fixture
        corpus = generate_fixture_corpus(f.seed, f.n_occupations, f.tasks_per_occ)
        tasks, profiles, employment = list(corpus.tasks), list(corpus.profiles), list(corpus.employment)
        reports = [RejectReport(source="fixture", input_rows=len(tasks))]
    else:
        task_source, profile_source, employment_source = _corpus_sources(config)
        tasks, task_report = parse_task_corpus(task_source)
        profiles, profile_report = parse_ability_profiles(profile_source)
        employment, employment_report = parse_employment(employment_source)
        reports = [task_report, profile_report, employment_report]

    written = dump_normalized(
        config.normalized_dir, tasks, profiles, employment, ws.calibration.telework, ws.calibration.tier_shares
    )
    written["rejects"] = write_reject_report(reports, config.normalized_dir / "rejects.tsv")
    return written, reports


def cmd_score(config: RunConfig) -> List[AteRecord]:
    """Score every occupation for every configured region and time point."""
    ws = open_workspace(config)
    tasks, profiles = _load_normalized(config)
    scores = score_corpus(tasks, _scoring_inputs(ws, profiles), config.parallelism)
    records = score_grid(scores, ws.adoption_model(), ws.ledger.grid_years, ws.ledger.region_ids, ws.mode, ws.ledger.thresholds)
    write_occupation_scores(scores, config.scores_dir)
    write_artifact(scores_artifact(records, ws.provenance, ws.mode), config.scores_dir, config.render_format)
    return records


def _sensitivity_runs(ws: Workspace) -> List[Tuple[str, float, str]]:
    s = ws.ledger.sensitivity
    runs = [
        ("k", -s.k_relative, s.region),
        ("k", s.k_relative, s.region),
        ("L", -s.L_relative, s.region),
        ("L", s.L_relative, s.region),
        ("tau0", -s.tau0_absolute, s.region),
        ("tau0", s.tau0_absolute, s.region),
        ("cov_multipliers", s.cov_relax_fraction, s.region),
        ("cap_uniform", -s.cap_relative, s.region),
        ("cap_uniform", s.cap_relative, s.region),
        ("tier", float(s.reclassify.tier), s.reclassify.region),
    ]
    return runs


def cmd_analyze(config: RunConfig) -> Dict[str, Path]:
    """Stress grid, one-at-a-time sensitivities, rubric pilot, validation, reinstatement and role catalog."""
    ws = open_workspace(config)
    ledger = ws.ledger
    scores = _load_scores(config)
    tasks, profiles = _load_normalized(config)
    inputs = _scoring_inputs(ws, profiles)
    model = ws.adoption_model()
    out = config.analysis_dir
    fmt = config.render_format
    written: Dict[str, Path] = {}

    grid = k_stress(scores, ledger.scenarios or DEFAULT_SCENARIOS, ledger.stress_years, ledger.stress_threshold, ledger.tiers, config.parallelism)
    written["k_stress"] = write_artifact(k_stress_artifact(grid, ws.provenance, tier_ordering_holds(grid)), out, fmt)

    results: List[OatResult] = []
    skipped: List[str] = []
    for parameter, delta, region_id in _sensitivity_runs(ws):
        try:
            results.append(
                oat_sensitivity(
                    parameter,
                    delta,
                    model,
                    scores,
                    region_id,
                    ledger.sensitivity.year,
                    corpus=tasks,
                    inputs=inputs,
                    category=ledger.sensitivity.cap_category,
                    parallelism=config.parallelism,
                )
            )
        except PerturbationError as e:
            logger.warning(f"Sensitivity {parameter} {delta:+g} skipped: {e.message}")
            skipped.append(f"{parameter} {delta:+g}: {e.message}")
    written["sensitivity"] = write_artifact(sensitivity_artifact(results, ws.provenance, skipped), out, fmt)

    pilot = pilot_compare(tasks, ws.calibration.rubric, ws.calibration.semantic_rubric)
    written["pilot"] = write_artifact(pilot_artifact(pilot, ws.provenance), out, fmt)

    validations: List[ValidationResult] = []
    notices: List[str] = []
    if not config.paths.external_indices:
        notices.append("no external indices configured")
    for name, path in sorted(config.paths.external_indices.items()):
        if not path.exists():
            notices.append(f"{name}: file not found ({path.name})")
            continue
        try:
            index = parse_external_index(path, config.index_score_column)
            validations.append(validate_against_index(scores, index, name))
        except AteError as e:
            notices.append(f"{name}: {e.message}")
    for notice in notices:
        logger.warning(f"Validation skipped: {notice}")
    written["validation"] = write_artifact(validation_artifact(validations, ws.provenance, notices), out, fmt)

    r = ledger.reinstatement
    reinstatement = reinstatement_table(r.base_workers, r.conversions, r.reinstatement_low, r.reinstatement_high)
    written["reinstatement"] = write_artifact(reinstatement_artifact(reinstatement, ws.provenance), out, fmt)

    roles = load_emerging_roles(config.paths.emerging_roles)
    written["emerging_roles"] = write_artifact(emerging_roles_artifact(roles, ws.provenance), out, fmt)

    years = sorted(set(ledger.grid_years) | set(ledger.stress_years))
    written["velocity"] = write_artifact(velocity_artifact(velocity_table(ledger.tiers, years), ws.provenance), out, fmt)
    return written


def cmd_report(config: RunConfig) -> Dict[str, Path]:
    """Score-derived tables: top-N, regional shares, histogram, remote deltas and the parameter tables."""
    ws = open_workspace(config)
    ledger = ws.ledger
    settings = ledger.report
    scores = _load_scores(config)
    model = ws.adoption_model()
    labels = ledger.major_groups
    out = config.reports_dir
    fmt = config.render_format
    written: Dict[str, Path] = {}

    years = sorted(set(settings.table_years) | set(settings.share_years) | {settings.rank_year, settings.histogram_year})
    records = score_grid(scores, model, years, ledger.region_ids, ws.mode, ledger.thresholds)

    written["top_n"] = write_artifact(
        top_n_artifact(
            records,
            settings.top_n_region,
            settings.rank_year,
            settings.table_years,
            settings.top_n,
            ws.provenance,
            labels,
            ws.calibration.annotations,
            ws.mode,
        ),
        out,
        fmt,
    )
    for year in settings.share_years:
        table = regional_share_table(select(records, tau=year), settings.share_threshold, ledger.region_ids, list(labels) or None)
        written[f"regional_shares_{year:g}"] = write_artifact(regional_shares_artifact(table, ws.provenance, labels, ws.mode), out, fmt)

    bins = histogram(select(records, settings.top_n_region, settings.histogram_year), settings.histogram_bin_width)
    written["histogram"] = write_artifact(
        histogram_artifact(bins, settings.top_n_region, settings.histogram_year, ws.provenance, ws.mode), out, fmt
    )

    groups = [g for g in labels if g in ws.calibration.telework.rates and g in ws.calibration.tier_shares.shares]
    written["remote_deltas"] = write_artifact(
        remote_deltas_artifact(model, groups, settings.rank_year, ws.provenance, ledger.region_ids, labels), out, fmt
    )
    written["tier_params"] = write_artifact(tier_params_artifact(ledger.tiers, ledger.regions, ws.provenance), out, fmt)
    written["telework"] = write_artifact(telework_artifact(ws.calibration.telework, ws.provenance, labels), out, fmt)
    written["tier_shares"] = write_artifact(tier_shares_artifact(ws.calibration.tier_shares, ws.provenance, labels), out, fmt)
    return written


def cmd_fixture(seed: int, n_occupations: int, tasks_per_occ: int, out_dir: Path) -> Dict[str, Path]:
    """Write a generated corpus in the normalized format."""
    corpus = generate_fixture_corpus(seed, n_occupations, tasks_per_occ)
    return dump_normalized(out_dir, corpus.tasks, corpus.profiles, corpus.employment)


_TIER_FLAG = re.compile(r"^([1-3])\.(k|tau0|L)=(.+)$")


def _tier_overrides(values: Sequence[str]) -> Dict[int, Dict[str, float]]:
    overrides: Dict[int, Dict[str, float]] = {}
    for value in values:
        match = _TIER_FLAG.match(value.strip())
        if not match:
            raise ConfigError("--tiers", f"expected TIER.PARAM=VALUE (e.g. 1.k=0.9), got '{value}'")
        try:
            number = float(match.group(3))
        except ValueError:
            raise ConfigError("--tiers", f"'{match.group(3)}' is not a number")
        overrides.setdefault(int(match.group(1)), {})[match.group(2)] = number
    return overrides


def _flags(options: Dict[str, Any]) -> Dict[str, Any]:
    """Translate global options into a nested override mapping for load_run_config."""
    thresholds = {
        key: options[flag]
        for key, flag in (("moderate", "threshold_moderate"), ("high", "threshold_high"))
        if options.get(flag) is not None
    }
    flags: Dict[str, Any] = {
        "output_dir": options.get("output_dir"),
        "parallelism": options.get("parallelism"),
        "render_format": options.get("render_format"),
        "overrides": {"thresholds": thresholds, "tiers": _tier_overrides(options.get("tiers") or ())},
    }
    if options.get("velocity_mode"):
        flags["velocity_mode"] = VelocityMode.parse(options["velocity_mode"]).value
    if options.get("years"):
        flags["overrides"]["years"] = [y.strip() for y in options["years"].split(",") if y.strip()]
    if options.get("fixture_seed") is not None:
        flags["fixture"] = {"enabled": True, "seed": options["fixture_seed"]}
    return flags


def _run(ctx: click.Context, action: Callable[[RunConfig], Any]) -> Any:
    try:
        config = load_run_config(ctx.obj["config_path"], _flags(ctx.obj))
        return action(config)
    except (AteError, FileNotFoundError) as e:
        click.echo(f"Error: {e}", err=True)
        raise SystemExit(1) from e


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML run configuration.")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Output directory (overrides $ATE_OUTPUT_DIR).")
@click.option(
    "--parallelism",
    type=click.IntRange(min=1),
    help="Worker threads (default: CPU count). Scoring holds the GIL, so more threads do not shorten a run.",
)
@click.option(
    "--velocity-mode",
    type=click.Choice(["residence", "remote-adjusted", "remote_adjusted"]),
    help="Residence velocity or remote-work adjusted velocity.",
)
@click.option("--fixture-seed", type=int, help="Use a generated fixture corpus with this seed.")
@click.option("--threshold-moderate", type=float, help="Lower bound of the moderate risk class.")
@click.option("--threshold-high", type=float, help="Lower bound of the high risk class.")
@click.option("--tiers", multiple=True, help="Tier parameter override TIER.PARAM=VALUE, repeatable (e.g. 1.k=0.9).")
@click.option("--years", help="Comma-separated time points for the scoring grid (e.g. 2025Q1,2027,2030).")
@click.option("--format", "render_format", type=click.Choice(["delimited", "aligned"]), help="Table format.")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.version_option(__version__)
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], verbose: bool, **options: Any):
    """Agentic Task Exposure engine."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )
    ctx.obj = {"config_path": config_path, **options}


@cli.command()
@click.pass_context
def ingest(ctx: click.Context):
    """Parse source files into the normalized dump."""
    written, reports = _run(ctx, cmd_ingest)
    rejected = sum(len(r.rejected) for r in reports)
    accepted = sum(r.accepted for r in reports)
    click.echo(f"Wrote {len(written)} files; {accepted} rows accepted, {rejected} rejected")


@cli.command()
@click.pass_context
def score(ctx: click.Context):
    """Compute ATE records for every occupation, region and time point."""
    records = _run(ctx, cmd_score)
    counts = risk_counts(records)
    click.echo(f"{len(records)} records: " + ", ".join(f"{risk.value} {counts[risk]}" for risk in RiskClass))


@cli.command()
@click.pass_context
def analyze(ctx: click.Context):
    """Sensitivity grids, rubric pilot, validation and reinstatement tables."""
    written = _run(ctx, cmd_analyze)
    click.echo(f"Wrote {len(written)} analysis tables")


@cli.command()
@click.pass_context
def report(ctx: click.Context):
    """Render score-derived tables."""
    written = _run(ctx, cmd_report)
    click.echo(f"Wrote {len(written)} report tables")


@cli.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option(
    "--occupations", "n_occupations", type=click.IntRange(min=1, max=MAX_FIXTURE_OCCUPATIONS), default=36, show_default=True
)
@click.option("--tasks-per-occ", type=click.IntRange(min=1), default=12, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def fixture(seed: int, n_occupations: int, tasks_per_occ: int, out_dir: str):
    """Write a synthetic corpus usable as task_corpus / ability_profiles / employment inputs."""
    try:
        written = cmd_fixture(seed, n_occupations, tasks_per_occ, Path(out_dir))
    except AteError as e:
        click.echo(f"Error: {e}", err=True)
        raise SystemExit(1) from e
    click.echo(f"Wrote fixture corpus (seed {seed}) to {out_dir}: {', '.join(sorted(written))}")


if __name__ == "__main__":
    cli()

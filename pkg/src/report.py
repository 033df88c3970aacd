"""
Table artifacts and their rendering.

Every artifact carries a provenance header (engine version, parameter
ledger version, input digests). The delimited format is tab-separated with
provenance lines prefixed by ``#`` so the body re-parses with any TSV
reader; the aligned format is a padded plain-text table for reading.
Rounding happens here and nowhere else.
"""

import hashlib
import io
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .adoption import AdoptionModel, RegionConfig, TierParams, VelocityMode
from .analysis import (
    EmergingRole,
    OatResult,
    ReinstatementResult,
    StressGrid,
    ValidationResult,
)
from .covmodel import PilotReport
from .exceptions import InvariantError, UnknownTableError
from .ingest import Source, TeleworkTable, TierShareTable, read_table
from .scoring import AteRecord, HistogramBin, ShareTable, select, top_n

logger = logging.getLogger(__name__)

Cell = Union[str, int, float, bool, None]


def tau_text(tau: float) -> str:
    """Decimal year without float noise: 2027, 2025.125."""
    return f"{tau:.10g}"


class TableId(str, Enum):
    TIER_PARAMS = "tier_params"
    TOP_N = "top_n"
    REGIONAL_SHARES = "regional_shares"
    TELEWORK = "telework"
    TIER_SHARES = "tier_shares"
    REMOTE_DELTAS = "remote_deltas"
    K_STRESS = "k_stress"
    HISTOGRAM = "histogram"
    PILOT = "pilot"
    REINSTATEMENT = "reinstatement"
    EMERGING_ROLES = "emerging_roles"
    VALIDATION = "validation"
    VELOCITY = "velocity"
    SENSITIVITY = "sensitivity"
    SCORES = "scores"


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    engine_version: str
    ledger_version: str
    inputs: Dict[str, str] = Field(default_factory=dict)

    def lines(self) -> List[str]:
        lines = [f"engine_version: {self.engine_version}", f"ledger_version: {self.ledger_version}"]
        lines.extend(f"input.{name}: {digest}" for name, digest in sorted(self.inputs.items()))
        return lines


class TableArtifact(BaseModel):
    """
    A renderable table.

    ``formats`` maps a column to a format spec applied to numeric cells
    (for example ``".2f"``); unformatted cells render with ``str``.
    """

    model_config = ConfigDict(frozen=True)

    table_id: str
    columns: Tuple[str, ...]
    rows: Tuple[Tuple[Cell, ...], ...] = ()
    formats: Dict[str, str] = Field(default_factory=dict)
    provenance: Provenance
    region_id: Optional[str] = None
    tau: Optional[float] = None
    mode: Optional[VelocityMode] = None
    notes: Tuple[str, ...] = ()

    def file_stem(self) -> str:
        parts = [self.table_id]
        if self.region_id:
            parts.append(self.region_id)
        if self.tau is not None:
            parts.append(tau_text(self.tau))
        if self.mode is not None:
            parts.append(self.mode.value)
        return "_".join(parts)


def file_digest(path: Union[str, Path]) -> str:
    """sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


def _clean(text: str) -> str:
    return " ".join(text.split())


def format_cell(value: Cell, spec: Optional[str] = None) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (int, float)) and spec:
        text = format(value, spec)
        # avoid "-0.00"
        return text[1:] if text.startswith("-") and float(text) == 0.0 else text
    return _clean(str(value))


def _formatted_rows(artifact: TableArtifact) -> List[List[str]]:
    specs = [artifact.formats.get(c) for c in artifact.columns]
    rows: List[List[str]] = []
    for row in artifact.rows:
        if len(row) != len(artifact.columns):
            raise InvariantError(
                f"{artifact.table_id}: row has {len(row)} cells for {len(artifact.columns)} columns", module="report"
            )
        rows.append([format_cell(v, s) for v, s in zip(row, specs)])
    return rows


def _header_lines(artifact: TableArtifact) -> List[str]:
    lines = [f"table: {artifact.table_id}"]
    lines.extend(artifact.provenance.lines())
    if artifact.region_id:
        lines.append(f"region: {artifact.region_id}")
    if artifact.tau is not None:
        lines.append(f"tau: {tau_text(artifact.tau)}")
    if artifact.mode is not None:
        lines.append(f"velocity_mode: {artifact.mode.value}")
    lines.extend(f"note: {_clean(n)}" for n in artifact.notes)
    return [f"# {line}" for line in lines]


def render(artifact: TableArtifact, fmt: str = "delimited") -> bytes:
    """
    Render an artifact to bytes.

    Args:
        artifact: Table to render
        fmt: "delimited" (tab-separated) or "aligned" (padded text)

    Returns:
        UTF-8 bytes, identical for identical artifacts
    """
    try:
        TableId(artifact.table_id)
    except ValueError:
        raise UnknownTableError(f"Unknown table id '{artifact.table_id}'")

    rows = _formatted_rows(artifact)
    lines = _header_lines(artifact)
    header = list(artifact.columns)

    if fmt == "delimited":
        lines.append("\t".join(header))
        lines.extend("\t".join(row) for row in rows)
    elif fmt in ("aligned", "aligned-text"):
        widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
        numeric = [artifact.columns[i] in artifact.formats for i in range(len(header))]

        def _line(cells: Sequence[str]) -> str:
            padded = [c.rjust(w) if num else c.ljust(w) for c, w, num in zip(cells, widths, numeric)]
            return "  ".join(padded).rstrip()

        lines.append(_line(header))
        lines.append("  ".join("-" * w for w in widths))
        lines.extend(_line(row) for row in rows)
    else:
        raise InvariantError(f"Unknown render format '{fmt}'", module="report")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_delimited(data: bytes) -> Tuple[List[str], List[List[str]]]:
    """Re-read a delimited rendering: (columns, rows of cell strings)."""
    body = "\n".join(line for line in data.decode("utf-8").splitlines() if not line.startswith("#"))
    frame = read_table(io.StringIO(body))
    return list(frame.columns), [list(row) for row in frame.itertuples(index=False, name=None)]


def write_artifact(artifact: TableArtifact, out_dir: Union[str, Path], fmt: str = "delimited") -> Path:
    """Write one artifact; the file name encodes table id, region, tau and velocity mode."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".tsv" if fmt == "delimited" else ".txt"
    path = out_dir / f"{artifact.file_stem()}{suffix}"
    path.write_bytes(render(artifact, fmt))
    logger.info(f"Wrote {artifact.table_id} table ({len(artifact.rows)} rows) to {path}")
    return path


class Annotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    soc_code: str
    marker: str
    note: str = ""


def load_annotations(source: Union[Source, Path]) -> Dict[str, Annotation]:
    """Footnote markers per SOC code (soc_code, marker, note)."""
    frame = read_table(source)
    try:
        return {
            row["soc_code"].strip(): Annotation(soc_code=row["soc_code"].strip(), marker=row["marker"].strip(), note=row.get("note", ""))
            for row in frame.to_dict("records")
        }
    except (KeyError, ValidationError) as e:
        raise InvariantError(f"Invalid annotation table: {e}", module="report") from e


def _year_column(prefix: str, tau: float) -> str:
    return f"{prefix}_{tau_text(tau)}"


def tier_params_artifact(
    tiers: Mapping[int, TierParams], regions: Sequence[RegionConfig], provenance: Provenance
) -> TableArtifact:
    rows = [
        (
            tier,
            params.k,
            params.tau0,
            params.L,
            ", ".join(r.name or r.region_id for r in regions if r.tier == tier),
        )
        for tier, params in sorted(tiers.items())
    ]
    return TableArtifact(
        table_id=TableId.TIER_PARAMS.value,
        columns=("tier", "k", "tau0", "L", "regions"),
        rows=tuple(rows),
        formats={"k": ".2f", "tau0": ".2f", "L": ".2f"},
        provenance=provenance,
    )


def top_n_artifact(
    records: Sequence[AteRecord],
    region_id: str,
    rank_year: float,
    table_years: Sequence[float],
    n: int,
    provenance: Provenance,
    labels: Optional[Mapping[str, str]] = None,
    annotations: Optional[Mapping[str, Annotation]] = None,
    mode: Optional[VelocityMode] = None,
) -> TableArtifact:
    """Top ``n`` occupations of a region ranked at ``rank_year``, with ATE at every table year."""
    labels = labels or {}
    annotations = annotations or {}
    regional = select(records, region_id=region_id)
    by_year = {float(y): {r.key: r for r in select(regional, tau=y)} for y in table_years}
    ranked = top_n(select(regional, tau=rank_year), n)

    rows = []
    notes = []
    for rank, record in enumerate(ranked, start=1):
        note = annotations.get(record.soc_code)
        if note and note.note and f"{note.marker} {note.note}" not in notes:
            notes.append(f"{note.marker} {note.note}")
        rows.append(
            (
                rank,
                record.soc_code,
                record.title or "",
                labels.get(record.major_group, record.major_group),
                *(by_year[float(y)][record.key].ate if record.key in by_year[float(y)] else None for y in table_years),
                record.risk.value,
                note.marker if note else "",
                record.shared_soc,
            )
        )
    if any(r.shared_soc for r in ranked):
        notes.append("shared_soc marks distinct occupation titles filed under one SOC code")

    year_columns = tuple(_year_column("ate", y) for y in table_years)
    return TableArtifact(
        table_id=TableId.TOP_N.value,
        columns=("rank", "soc_code", "title", "group", *year_columns, "risk", "marker", "shared_soc"),
        rows=tuple(rows),
        formats={c: ".2f" for c in year_columns},
        provenance=provenance,
        region_id=region_id,
        tau=float(rank_year),
        mode=mode,
        notes=tuple(notes),
    )


def regional_shares_artifact(
    table: ShareTable,
    provenance: Provenance,
    labels: Optional[Mapping[str, str]] = None,
    mode: Optional[VelocityMode] = None,
) -> TableArtifact:
    labels = labels or {}
    rows = [
        (r.region_id, r.major_group, labels.get(r.major_group, r.major_group), r.occupations, r.crossing, r.share_pct, r.mean_ate)
        for r in table.rows
    ]
    return TableArtifact(
        table_id=TableId.REGIONAL_SHARES.value,
        columns=("region_id", "major_group", "group", "occupations", "crossing", "share_pct", "mean_ate"),
        rows=tuple(rows),
        formats={"share_pct": ".1f", "mean_ate": ".2f"},
        provenance=provenance,
        tau=table.tau,
        mode=mode,
        notes=(f"threshold: ATE >= {table.threshold:g}", *table.notes),
    )


def telework_artifact(
    telework: TeleworkTable, provenance: Provenance, labels: Optional[Mapping[str, str]] = None
) -> TableArtifact:
    labels = labels or {}
    return TableArtifact(
        table_id=TableId.TELEWORK.value,
        columns=("major_group", "group", "r_o"),
        rows=tuple((g, labels.get(g, g), r) for g, r in sorted(telework.rates.items())),
        formats={"r_o": ".3f"},
        provenance=provenance,
    )


def tier_shares_artifact(
    tier_shares: TierShareTable, provenance: Provenance, labels: Optional[Mapping[str, str]] = None
) -> TableArtifact:
    labels = labels or {}
    return TableArtifact(
        table_id=TableId.TIER_SHARES.value,
        columns=("major_group", "group", "tier_1", "tier_2", "tier_3"),
        rows=tuple((g, labels.get(g, g), *pi) for g, pi in sorted(tier_shares.shares.items())),
        formats={"tier_1": ".3f", "tier_2": ".3f", "tier_3": ".3f"},
        provenance=provenance,
    )


def remote_deltas_artifact(
    model: AdoptionModel,
    groups: Sequence[str],
    tau: float,
    provenance: Provenance,
    region_ids: Optional[Sequence[str]] = None,
    labels: Optional[Mapping[str, str]] = None,
) -> TableArtifact:
    """Residence vs remote-adjusted velocity per major group and region."""
    labels = labels or {}
    rows = []
    for group in groups:
        for region_id in region_ids if region_ids is not None else model.region_ids:
            residence = model.residence_velocity(region_id, tau)
            remote = model.velocity(region_id, tau, group, VelocityMode.REMOTE_ADJUSTED)
            delta = model.remote_delta(group, region_id, tau)
            rows.append((group, labels.get(group, group), region_id, model.region(region_id).tier, residence, remote, delta))
    return TableArtifact(
        table_id=TableId.REMOTE_DELTAS.value,
        columns=("major_group", "group", "region_id", "tier", "v_residence", "v_eff", "delta_pct"),
        rows=tuple(rows),
        formats={"v_residence": ".3f", "v_eff": ".3f", "delta_pct": ".1f"},
        provenance=provenance,
        tau=float(tau),
        mode=VelocityMode.REMOTE_ADJUSTED,
    )


def k_stress_artifact(grid: StressGrid, provenance: Provenance, tier_ordering: Optional[Mapping] = None) -> TableArtifact:
    year_columns = tuple(_year_column("share", y) for y in grid.years)
    rows = [
        (tier, scenario, *(grid.value(tier, scenario, y) for y in grid.years))
        for tier in sorted({c.tier for c in grid.cells})
        for scenario in grid.scenarios
    ]
    notes = [f"threshold: ATE >= {grid.threshold:g}"]
    if tier_ordering is not None:
        broken = [f"{s} {y:g}" for (s, y), holds in tier_ordering.items() if not holds]
        notes.append("tier ordering holds in every column" if not broken else f"tier ordering broken: {', '.join(broken)}")
    return TableArtifact(
        table_id=TableId.K_STRESS.value,
        columns=("tier", "scenario", *year_columns),
        rows=tuple(rows),
        formats={c: ".1f" for c in year_columns},
        provenance=provenance,
        notes=tuple(notes),
    )


def histogram_artifact(
    bins: Sequence[HistogramBin], region_id: str, tau: float, provenance: Provenance, mode: Optional[VelocityMode] = None
) -> TableArtifact:
    total = sum(b.count for b in bins)
    rows = [(b.lower, b.upper, b.count, 100.0 * b.count / total if total else 0.0) for b in bins]
    return TableArtifact(
        table_id=TableId.HISTOGRAM.value,
        columns=("lower", "upper", "count", "share_pct"),
        rows=tuple(rows),
        formats={"lower": ".2f", "upper": ".2f", "share_pct": ".1f"},
        provenance=provenance,
        region_id=region_id,
        tau=float(tau),
        mode=mode,
    )


def pilot_artifact(report: PilotReport, provenance: Provenance) -> TableArtifact:
    labels = list(report.keyword_by_category)
    rows = [
        ("keyword", report.total_tasks, report.keyword_flagged, report.keyword_share, *(report.keyword_by_category[label] for label in labels)),
        ("semantic", report.total_tasks, report.semantic_flagged, report.semantic_share, *(report.semantic_by_category[label] for label in labels)),
    ]
    notes = [f"newly flagged {soc}: {','.join(ids)}" for soc, ids in sorted(report.newly_flagged.items())]
    return TableArtifact(
        table_id=TableId.PILOT.value,
        columns=("rubric", "tasks", "flagged", "share_pct", *labels),
        rows=tuple(rows),
        formats={"share_pct": ".1f"},
        provenance=provenance,
        notes=tuple(notes),
    )


def reinstatement_artifact(results: Sequence[ReinstatementResult], provenance: Provenance) -> TableArtifact:
    rows = [(r.label, 100.0 * r.conversion, *r.rounded()) for r in results]
    return TableArtifact(
        table_id=TableId.REINSTATEMENT.value,
        columns=("scenario", "conversion_pct", "displaced", "reinstated_low", "reinstated_high"),
        rows=tuple(rows),
        formats={"conversion_pct": ".0f"},
        provenance=provenance,
        notes=("positions rounded to the nearest 1,000",),
    )


def emerging_roles_artifact(roles: Sequence[EmergingRole], provenance: Provenance) -> TableArtifact:
    return TableArtifact(
        table_id=TableId.EMERGING_ROLES.value,
        columns=("cluster", "role"),
        rows=tuple((r.cluster, r.role) for r in roles),
        provenance=provenance,
    )


def validation_artifact(
    results: Sequence[ValidationResult], provenance: Provenance, skipped: Sequence[str] = ()
) -> TableArtifact:
    rows = [
        (r.index_name, r.matched, r.engine_codes, r.correlation.rho, r.correlation.p_value)
        for r in results
    ]
    notes = [f"skipped: {s}" for s in skipped]
    for r in results:
        notes.extend(
            f"{r.index_name} divergence {d.soc_code}: engine rank {d.engine_rank:g}, index rank {d.index_rank:g}"
            for d in r.divergences
        )
    return TableArtifact(
        table_id=TableId.VALIDATION.value,
        columns=("index", "matched", "engine_codes", "rho", "p_value"),
        rows=tuple(rows),
        formats={"rho": ".3f", "p_value": ".3g"},
        provenance=provenance,
        notes=tuple(notes),
    )


def velocity_artifact(table: Mapping[int, Mapping[float, float]], provenance: Provenance) -> TableArtifact:
    years = sorted({tau for row in table.values() for tau in row})
    columns = tuple(_year_column("v", y) for y in years)
    return TableArtifact(
        table_id=TableId.VELOCITY.value,
        columns=("tier", *columns),
        rows=tuple((tier, *(row.get(y) for y in years)) for tier, row in sorted(table.items())),
        formats={c: ".4f" for c in columns},
        provenance=provenance,
    )


def sensitivity_artifact(
    results: Sequence[OatResult], provenance: Provenance, skipped: Sequence[str] = ()
) -> TableArtifact:
    rows = [
        (
            r.parameter,
            r.delta,
            r.region_id,
            r.tau,
            r.v_before,
            r.v_after,
            r.v_change_pct,
            r.top_soc,
            r.top_ate_before,
            r.top_ate_after,
            r.rank_changed,
        )
        for r in results
    ]
    return TableArtifact(
        table_id=TableId.SENSITIVITY.value,
        columns=(
            "parameter",
            "delta",
            "region_id",
            "tau",
            "v_before",
            "v_after",
            "v_change_pct",
            "top_soc",
            "top_ate_before",
            "top_ate_after",
            "rank_changed",
        ),
        rows=tuple(rows),
        formats={
            "delta": "+g",
            "tau": ".10g",
            "v_before": ".4f",
            "v_after": ".4f",
            "v_change_pct": "+.1f",
            "top_ate_before": ".2f",
            "top_ate_after": ".2f",
        },
        provenance=provenance,
        notes=tuple(f"skipped: {s}" for s in skipped),
    )


def scores_artifact(
    records: Sequence[AteRecord], provenance: Provenance, mode: Optional[VelocityMode] = None
) -> TableArtifact:
    """Every ATE record of a run."""
    rows = [
        (r.soc_code, r.title or "", r.major_group, r.region_id, r.tau, r.velocity, r.base_score, r.ate, r.risk.value, r.shared_soc)
        for r in records
    ]
    return TableArtifact(
        table_id=TableId.SCORES.value,
        columns=("soc_code", "title", "major_group", "region_id", "tau", "velocity", "base_score", "ate", "risk", "shared_soc"),
        rows=tuple(rows),
        formats={"tau": ".10g", "velocity": ".4f", "base_score": ".4f", "ate": ".2f"},
        provenance=provenance,
        mode=mode,
    )


"""
Occupational data ingestion.

Parses delimiter-separated source files (tab or comma, detected from the
header row) into validated, immutable tables. Rows that fail validation are
collected into a reject report with their line numbers instead of being
dropped silently. Adapters map O*NET 30.2 and BLS OEWS export layouts onto
the normalized schema, and a seeded generator produces fixture corpora when
licensed data is not available locally.
"""

import csv
import io
import logging
import math
import re
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing_extensions import Annotated

from .exceptions import InvariantError, NormalizationError, SchemaError

logger = logging.getLogger(__name__)

Source = Union[str, Path, TextIO, pd.DataFrame]

SOC_PATTERN = re.compile(r"^\d{2}-\d{4}(\.\d{2})?$")
SHARE_TOLERANCE = 1e-6


def major_group(soc_code: str) -> str:
    """Two-digit SOC major group of a (possibly suffixed) SOC code."""
    return soc_code[:2]


def base_soc(soc_code: str) -> str:
    """Six-digit SOC code without the O*NET detail suffix."""
    return soc_code[:7]


def _check_soc(value: str) -> str:
    value = value.strip()
    if not SOC_PATTERN.match(value):
        raise ValueError(f"invalid SOC code '{value}'")
    return value


SocCode = Annotated[str, AfterValidator(_check_soc)]


class TaskRecord(BaseModel):
    """One occupational task statement with its O*NET ratings."""

    model_config = ConfigDict(frozen=True)

    soc_code: SocCode
    task_id: str = Field(min_length=1)
    text: str
    importance: float = Field(ge=1.0, le=5.0)
    relevance: float = Field(ge=0.0, le=100.0)
    title: Optional[str] = None

    @field_validator("text")
    @classmethod
    def _text_not_blank(cls, value: str) -> str:
        # tabs and line breaks would corrupt the normalized dump
        value = re.sub(r"[\t\r\n]+", " ", value).strip()
        if not value:
            raise ValueError("task text is empty")
        return value

    @field_validator("title")
    @classmethod
    def _title_blank_is_none(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return None
        value = value.strip()
        return value or None

    @property
    def major_group(self) -> str:
        return major_group(self.soc_code)


class AbilityProfile(BaseModel):
    """An occupation's ability importance ratings."""

    model_config = ConfigDict(frozen=True)

    soc_code: SocCode
    entries: Tuple[Tuple[str, float], ...]

    @field_validator("entries")
    @classmethod
    def _valid_entries(cls, entries: Tuple[Tuple[str, float], ...]) -> Tuple[Tuple[str, float], ...]:
        names = [name for name, _ in entries]
        if len(set(names)) != len(names):
            raise ValueError("ability names must be unique within a profile")
        for name, importance in entries:
            if not 1.0 <= importance <= 5.0:
                raise ValueError(f"importance {importance} for '{name}' outside [1, 5]")
        return entries


class EmploymentRecord(BaseModel):
    """Employment count for one occupation in one region."""

    model_config = ConfigDict(frozen=True)

    soc_code: SocCode
    region_id: str = Field(min_length=1)
    employment: int = Field(ge=0)


class TeleworkTable(BaseModel):
    """Telework proportion R_o per SOC major group."""

    model_config = ConfigDict(frozen=True)

    rates: Dict[str, float]

    @field_validator("rates")
    @classmethod
    def _rates_in_range(cls, rates: Dict[str, float]) -> Dict[str, float]:
        for group, rate in rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"telework rate {rate} for group {group} outside [0, 1]")
        return rates

    def rate(self, group: str) -> float:
        if group not in self.rates:
            raise InvariantError(f"No telework rate for SOC major group {group}", module="ingest")
        return self.rates[group]


class TierShareTable(BaseModel):
    """Employer tier shares (tiers 1..3) per SOC major group."""

    model_config = ConfigDict(frozen=True)

    shares: Dict[str, Tuple[float, float, float]]

    @model_validator(mode="after")
    def _shares_normalized(self) -> "TierShareTable":
        for group, pi in self.shares.items():
            if any(not 0.0 <= p <= 1.0 for p in pi):
                raise ValueError(f"tier share outside [0, 1] for group {group}")
            if abs(sum(pi) - 1.0) > SHARE_TOLERANCE:
                raise ValueError(f"tier shares for group {group} sum to {sum(pi)}, not 1")
        return self

    def pi(self, group: str) -> Tuple[float, float, float]:
        if group not in self.shares:
            raise InvariantError(f"No tier shares for SOC major group {group}", module="ingest")
        return self.shares[group]


class RejectedRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    line_number: int
    reason: str
    raw: Dict[str, str]


class RejectReport(BaseModel):
    """Rows a parser refused, with the total number of input rows."""

    source: str
    input_rows: int = 0
    rejected: List[RejectedRow] = Field(default_factory=list)

    @property
    def accepted(self) -> int:
        return self.input_rows - len(self.rejected)

    def add(self, line_number: int, reason: str, raw: Mapping[str, str]) -> None:
        self.rejected.append(RejectedRow(line_number=line_number, reason=reason, raw=dict(raw)))


class TaskSchema(BaseModel):
    """Column names of a task corpus source."""

    soc: str = "soc_code"
    id: str = "task_id"
    text: str = "text"
    importance: str = "importance"
    relevance: str = "relevance"
    title: Optional[str] = "title"


class AbilitySchema(BaseModel):
    soc: str = "soc_code"
    ability: str = "ability"
    importance: str = "importance"


class EmploymentSchema(BaseModel):
    soc: str = "soc_code"
    region: str = "region_id"
    employment: str = "employment"


MALFORMED_ATTR = "malformed_rows"
SOURCE_ATTR = "source"
_MALFORMED_MARKER = "\x00malformed:"


class MalformedRow(NamedTuple):
    """A source line with more fields than its header."""

    line_number: int
    expected: int
    fields: List[str]


def _read_keeping_malformed(text: str, sep: str, quoting: int) -> Tuple[pd.DataFrame, List[MalformedRow]]:
    """Re-read a table whose rows do not all fit the header, keeping the position of every row."""
    wide: List[List[str]] = []

    def hold_place(fields: List[str]) -> List[str]:
        wide.append([str(f) for f in fields])
        return [f"{_MALFORMED_MARKER}{len(wide) - 1}"]

    try:
        raw = pd.read_csv(
            io.StringIO(text),
            sep=sep,
            header=None,
            dtype=object,
            keep_default_na=False,
            na_filter=False,
            skip_blank_lines=False,
            quoting=quoting,
            engine="python",
            on_bad_lines=hold_place,
        )
    except pd.errors.ParserError as e:
        raise SchemaError(f"Unreadable table: {e}") from e

    raw = raw.fillna("")
    frame = raw.iloc[1:].copy()
    frame.columns = [str(c) for c in raw.iloc[0]]
    # row 0 was the header; shift so that index + 2 stays the source line
    frame.index = frame.index - 1

    first = frame.iloc[:, 0].astype(str)
    placeholders = first.str.startswith(_MALFORMED_MARKER)
    malformed = [
        MalformedRow(int(index) + 2, len(frame.columns), wide[int(value[len(_MALFORMED_MARKER):])])
        for index, value in first[placeholders].items()
    ]
    return frame.loc[~placeholders], malformed


def read_table(source: Source, keep_malformed: bool = False) -> pd.DataFrame:
    """
    Read a delimiter-separated table with a mandatory header row.

    The delimiter is tab when the header contains a tab, comma otherwise.
    All cells are read as strings; blank lines are dropped but the frame
    index keeps the original row position so that ``index + 2`` is the
    source line number.

    Rows with more fields than the header are malformed. By default they
    raise SchemaError; with ``keep_malformed`` they are left out of the
    frame and listed as MalformedRow entries in ``frame.attrs[MALFORMED_ATTR]``
    for the caller's reject report.

    Args:
        source: Path, open text stream, or an already loaded DataFrame
        keep_malformed: Collect over-wide rows instead of failing

    Returns:
        DataFrame of string cells
    """
    if isinstance(source, pd.DataFrame):
        frame = source.astype(str)
        frame.attrs[MALFORMED_ATTR] = list(source.attrs.get(MALFORMED_ATTR, []))
        return frame

    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"Source file not found: {path}")
        text = path.read_text(encoding="utf-8")
    else:
        text = source.read()

    text = text.lstrip("\ufeff")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError("Source has no header row")

    sep = "\t" if "\t" in lines[0] else ","
    quoting = csv.QUOTE_NONE if sep == "\t" else csv.QUOTE_MINIMAL
    frame: Optional[pd.DataFrame]
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            sep=sep,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            skip_blank_lines=False,
            quoting=quoting,
        )
    except pd.errors.ParserError as e:
        logger.debug(f"{_source_name(source)}: {e}; re-reading row by row")
        frame = None

    malformed: List[MalformedRow] = []
    # a first data row wider than the header turns into an implicit index
    if frame is None or not isinstance(frame.index, pd.RangeIndex):
        frame, malformed = _read_keeping_malformed(text, sep, quoting)

    if malformed and not keep_malformed:
        numbers = ", ".join(str(row.line_number) for row in malformed)
        raise SchemaError(f"{_source_name(source)}: more fields than the header on line(s) {numbers}")

    frame.columns = [str(c).strip() for c in frame.columns]
    frame = frame.fillna("")
    if len(frame):
        frame = frame[~(frame == "").all(axis=1)]
    frame.attrs[MALFORMED_ATTR] = malformed
    return frame


def source_layout(path: Union[str, Path]) -> str:
    """
    Layout of a source file judged by its header row.

    Returns:
        "onet" for O*NET exports, "oews" for BLS OEWS exports,
        "normalized" otherwise
    """
    with Path(path).open(encoding="utf-8") as f:
        header = f.readline().lstrip("\ufeff").rstrip("\r\n")
    sep = "\t" if "\t" in header else ","
    columns = {c.strip().strip('"') for c in header.split(sep)}
    if ONET_SOC in columns:
        return "onet"
    if OEWS_OCC in columns:
        return "oews"
    return "normalized"


def _open_report(frame: pd.DataFrame, source: Source) -> RejectReport:
    """Start a reject report that already holds the malformed rows read_table set aside."""
    malformed: List[MalformedRow] = frame.attrs.get(MALFORMED_ATTR, [])
    report = RejectReport(source=_source_name(source), input_rows=len(frame) + len(malformed))
    for row in malformed:
        report.add(
            row.line_number,
            f"expected {row.expected} fields, found {len(row.fields)}",
            {f"field_{i}": value for i, value in enumerate(row.fields, 1)},
        )
    return report


def _require_columns(frame: pd.DataFrame, columns: Iterable[str], what: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"{what}: missing mandatory column(s) {', '.join(missing)}")


def _source_name(source: Source) -> str:
    if isinstance(source, (str, Path)):
        return str(source)
    if isinstance(source, pd.DataFrame):
        return str(source.attrs.get(SOURCE_ATTR, "<dataframe>"))
    return getattr(source, "name", "<stream>")


def _number(raw: Mapping[str, str], column: str) -> float:
    value = str(raw[column]).strip()
    if value == "":
        raise ValueError(f"missing value in column '{column}'")
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"unparseable numeric '{value}' in column '{column}'")


def _first_error(error: ValidationError) -> str:
    detail = error.errors()[0]
    location = ".".join(str(part) for part in detail.get("loc", ()))
    return f"{location}: {detail.get('msg', 'invalid value')}" if location else detail.get("msg", "invalid")


def parse_task_corpus(source: Source, schema: Optional[TaskSchema] = None) -> Tuple[List[TaskRecord], RejectReport]:
    """
    Parse a task corpus into validated TaskRecords.

    Args:
        source: Delimiter-separated task table
        schema: Column mapping (default: normalized column names)

    Returns:
        Tuple of (records sorted by soc_code then task_id, reject report)
    """
    schema = schema or TaskSchema()
    frame = read_table(source, keep_malformed=True)
    _require_columns(frame, [schema.soc, schema.id, schema.text, schema.importance, schema.relevance], "task corpus")
    has_title = schema.title is not None and schema.title in frame.columns

    report = _open_report(frame, source)
    records: Dict[Tuple[str, str], TaskRecord] = {}

    for index, raw in zip(frame.index, frame.to_dict("records")):
        line = int(index) + 2
        try:
            record = TaskRecord(
                soc_code=raw[schema.soc],
                task_id=str(raw[schema.id]).strip(),
                text=raw[schema.text],
                importance=_number(raw, schema.importance),
                relevance=_number(raw, schema.relevance),
                title=raw[schema.title] if has_title else None,
            )
        except ValidationError as e:
            report.add(line, _first_error(e), raw)
            continue
        except ValueError as e:
            report.add(line, str(e), raw)
            continue

        key = (record.soc_code, record.task_id)
        if key in records:
            report.add(line, f"duplicate task {key[0]}/{key[1]}", raw)
            continue
        records[key] = record

    if report.rejected:
        logger.warning(f"{report.source}: rejected {len(report.rejected)} of {report.input_rows} task rows")
    logger.info(f"{report.source}: parsed {len(records)} task records")
    return [records[key] for key in sorted(records)], report


def parse_ability_profiles(
    source: Source, schema: Optional[AbilitySchema] = None
) -> Tuple[List[AbilityProfile], RejectReport]:
    """Parse long-format (soc, ability, importance) rows into one profile per SOC code."""
    schema = schema or AbilitySchema()
    frame = read_table(source, keep_malformed=True)
    _require_columns(frame, [schema.soc, schema.ability, schema.importance], "ability profiles")

    report = _open_report(frame, source)
    grouped: Dict[str, Dict[str, float]] = {}

    for index, raw in zip(frame.index, frame.to_dict("records")):
        line = int(index) + 2
        try:
            soc = _check_soc(str(raw[schema.soc]))
            ability = str(raw[schema.ability]).strip()
            if not ability:
                raise ValueError("missing ability name")
            importance = _number(raw, schema.importance)
            if not 1.0 <= importance <= 5.0:
                raise ValueError(f"importance {importance} outside [1, 5]")
        except ValueError as e:
            report.add(line, str(e), raw)
            continue
        entries = grouped.setdefault(soc, {})
        if ability in entries:
            report.add(line, f"duplicate ability '{ability}' for {soc}", raw)
            continue
        entries[ability] = importance

    profiles = [
        AbilityProfile(soc_code=soc, entries=tuple(sorted(entries.items())))
        for soc, entries in sorted(grouped.items())
    ]
    if report.rejected:
        logger.warning(f"{report.source}: rejected {len(report.rejected)} ability rows")
    logger.info(f"{report.source}: parsed {len(profiles)} ability profiles")
    return profiles, report


def parse_employment(
    source: Source, schema: Optional[EmploymentSchema] = None
) -> Tuple[List[EmploymentRecord], RejectReport]:
    """Parse employment counts by occupation and region."""
    schema = schema or EmploymentSchema()
    frame = read_table(source, keep_malformed=True)
    _require_columns(frame, [schema.soc, schema.region, schema.employment], "employment")

    report = _open_report(frame, source)
    records: Dict[Tuple[str, str], EmploymentRecord] = {}

    for index, raw in zip(frame.index, frame.to_dict("records")):
        line = int(index) + 2
        try:
            # OEWS writes thousands separators
            cleaned = {**raw, schema.employment: str(raw[schema.employment]).replace(",", "")}
            count = _number(cleaned, schema.employment)
            if not math.isfinite(count):
                raise ValueError(f"employment {count} is not a finite count")
            if count != int(count):
                raise ValueError(f"employment {count} is not a whole count")
            record = EmploymentRecord(soc_code=raw[schema.soc], region_id=str(raw[schema.region]).strip(), employment=int(count))
        except ValidationError as e:
            report.add(line, _first_error(e), raw)
            continue
        except ValueError as e:
            report.add(line, str(e), raw)
            continue
        key = (record.soc_code, record.region_id)
        if key in records:
            report.add(line, f"duplicate employment row {key[0]}/{key[1]}", raw)
            continue
        records[key] = record

    logger.info(f"{report.source}: parsed {len(records)} employment records")
    return [records[key] for key in sorted(records)], report


def parse_telework(source: Source) -> TeleworkTable:
    """Parse the telework table (soc_major_group, r_o)."""
    frame = read_table(source)
    _require_columns(frame, ["soc_major_group", "r_o"], "telework")
    rates: Dict[str, float] = {}
    for raw in frame.to_dict("records"):
        group = str(raw["soc_major_group"]).strip().zfill(2)
        if group in rates:
            raise InvariantError(f"Duplicate telework row for group {group}", module="ingest")
        rates[group] = _number(raw, "r_o")
    try:
        return TeleworkTable(rates=dict(sorted(rates.items())))
    except ValidationError as e:
        raise InvariantError(f"Invalid telework table: {_first_error(e)}", module="ingest") from e


def normalize_shares(shares: Sequence[float]) -> Tuple[float, float, float]:
    """Rescale a three-tier share vector to sum to one."""
    total = float(sum(shares))
    if len(shares) != 3 or total <= 0:
        raise NormalizationError(f"Cannot normalize tier shares {list(shares)}")
    return tuple(float(s) / total for s in shares)  # type: ignore[return-value]


def parse_tier_shares(source: Source) -> TierShareTable:
    """Parse employer tier shares; each row is normalized to sum to one on load."""
    frame = read_table(source)
    columns = ["soc_major_group", "tier_1", "tier_2", "tier_3"]
    _require_columns(frame, columns, "tier shares")
    shares: Dict[str, Tuple[float, float, float]] = {}
    for raw in frame.to_dict("records"):
        group = str(raw["soc_major_group"]).strip().zfill(2)
        if group in shares:
            raise InvariantError(f"Duplicate tier-share row for group {group}", module="ingest")
        pi = [_number(raw, c) for c in columns[1:]]
        if abs(sum(pi) - 1.0) > SHARE_TOLERANCE:
            logger.info(f"Tier shares for group {group} sum to {sum(pi):.4f}; normalizing")
        shares[group] = normalize_shares(pi)
    try:
        return TierShareTable(shares=dict(sorted(shares.items())))
    except ValidationError as e:
        raise InvariantError(f"Invalid tier-share table: {_first_error(e)}", module="ingest") from e


def parse_external_index(source: Source, score_column: str = "score") -> Dict[str, float]:
    """
    Parse an external exposure index keyed by six-digit SOC code.

    Detail suffixes are stripped; when several rows share a six-digit code
    their scores are averaged.
    """
    frame = read_table(source)
    _require_columns(frame, ["soc_code", score_column], "external index")
    collected: Dict[str, List[float]] = {}
    skipped = 0
    for raw in frame.to_dict("records"):
        try:
            soc = base_soc(_check_soc(str(raw["soc_code"])))
            score = _number(raw, score_column)
        except ValueError:
            skipped += 1
            continue
        collected.setdefault(soc, []).append(score)
    if skipped:
        logger.warning(f"{_source_name(source)}: skipped {skipped} unparseable index rows")
    return {soc: float(np.mean(values)) for soc, values in sorted(collected.items())}


# O*NET 30.2 text-file column names
ONET_SOC = "O*NET-SOC Code"
ONET_TASK_ID = "Task ID"
ONET_TASK = "Task"
ONET_TITLE = "Title"
ONET_SCALE = "Scale ID"
ONET_VALUE = "Data Value"
ONET_ELEMENT = "Element Name"

# BLS OEWS export column names
OEWS_AREA = "AREA"
OEWS_OCC = "OCC_CODE"
OEWS_EMPLOYMENT = "TOT_EMP"


def parse_titles(source: Source) -> Dict[str, str]:
    """
    Occupation titles keyed by SOC code.

    Accepts O*NET Occupation Data ("O*NET-SOC Code", "Title") or a
    normalized table (soc_code, title). Blank titles are skipped; for a
    repeated code the first title wins.
    """
    frame = read_table(source)
    if ONET_SOC in frame.columns:
        soc_column, title_column = ONET_SOC, ONET_TITLE
    else:
        soc_column, title_column = "soc_code", "title"
    _require_columns(frame, [soc_column, title_column], "occupation titles")

    titles: Dict[str, str] = {}
    for soc, title in zip(frame[soc_column], frame[title_column]):
        soc, title = soc.strip(), title.strip()
        if not title:
            continue
        if soc in titles and titles[soc] != title:
            logger.warning(f"{_source_name(source)}: {soc} has several titles, keeping '{titles[soc]}'")
            continue
        titles.setdefault(soc, title)
    return titles


def adapt_onet_tasks(statements: Source, ratings: Source, occupations: Optional[Source] = None) -> pd.DataFrame:
    """
    Map O*NET 30.2 Task Statements + Task Ratings onto the normalized task schema.

    Ratings are long-format; the IM (importance) and RT (relevance) scales are
    pivoted into columns. Tasks lacking a rating keep an empty cell so that
    ``parse_task_corpus`` rejects and reports them.
    """
    tasks = read_table(statements, keep_malformed=True)
    _require_columns(tasks, [ONET_SOC, ONET_TASK_ID, ONET_TASK], "O*NET task statements")
    rated = read_table(ratings)
    _require_columns(rated, [ONET_SOC, ONET_TASK_ID, ONET_SCALE, ONET_VALUE], "O*NET task ratings")

    rated = rated[rated[ONET_SCALE].isin(["IM", "RT"])]
    pivot = (
        rated.drop_duplicates([ONET_SOC, ONET_TASK_ID, ONET_SCALE])
        .pivot(index=[ONET_SOC, ONET_TASK_ID], columns=ONET_SCALE, values=ONET_VALUE)
        .reset_index()
    )
    for scale in ("IM", "RT"):
        if scale not in pivot.columns:
            pivot[scale] = ""

    merged = tasks[[ONET_SOC, ONET_TASK_ID, ONET_TASK]].merge(pivot, on=[ONET_SOC, ONET_TASK_ID], how="left")
    merged = merged.fillna("")
    merged.index = tasks.index
    normalized = pd.DataFrame(
        {
            "soc_code": merged[ONET_SOC],
            "task_id": merged[ONET_TASK_ID],
            "text": merged[ONET_TASK],
            "importance": merged["IM"],
            "relevance": merged["RT"],
        }
    )
    if occupations is not None:
        normalized["title"] = normalized["soc_code"].map(parse_titles(occupations)).fillna("")
    else:
        normalized["title"] = ""
    return _carry_source(normalized, tasks, statements)


def _carry_source(normalized: pd.DataFrame, frame: pd.DataFrame, source: Source) -> pd.DataFrame:
    """Keep source name and malformed rows of the export an adapted frame came from."""
    normalized.attrs[SOURCE_ATTR] = _source_name(source)
    normalized.attrs[MALFORMED_ATTR] = list(frame.attrs.get(MALFORMED_ATTR, []))
    return normalized


def adapt_onet_abilities(abilities: Source) -> pd.DataFrame:
    """Map O*NET 30.2 Abilities (IM scale rows) onto the normalized ability schema."""
    frame = read_table(abilities, keep_malformed=True)
    _require_columns(frame, [ONET_SOC, ONET_ELEMENT, ONET_SCALE, ONET_VALUE], "O*NET abilities")
    rows = frame[frame[ONET_SCALE] == "IM"]
    normalized = pd.DataFrame(
        {"soc_code": rows[ONET_SOC], "ability": rows[ONET_ELEMENT], "importance": rows[ONET_VALUE]}
    )
    return _carry_source(normalized, frame, abilities)


def adapt_oews(source: Source, area_to_region: Mapping[str, str]) -> pd.DataFrame:
    """
    Map a BLS OEWS metro export (AREA, OCC_CODE, TOT_EMP) onto the normalized employment schema.

    Areas outside ``area_to_region`` are dropped, as are summary rows when
    the export has an O_GROUP column; suppressed counts ("**") pass through
    and are rejected by ``parse_employment``.
    """
    frame = read_table(source, keep_malformed=True)
    _require_columns(frame, [OEWS_AREA, OEWS_OCC, OEWS_EMPLOYMENT], "OEWS export")
    areas = {str(area).strip(): region for area, region in area_to_region.items()}
    rows = frame[frame[OEWS_AREA].str.strip().isin(list(areas))]
    if "O_GROUP" in rows.columns:
        rows = rows[rows["O_GROUP"].str.strip().str.lower() == "detailed"]
    normalized = pd.DataFrame(
        {
            "soc_code": rows[OEWS_OCC],
            "region_id": rows[OEWS_AREA].str.strip().map(areas),
            "employment": rows[OEWS_EMPLOYMENT],
        }
    )
    return _carry_source(normalized, frame, source)


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, quoting=csv.QUOTE_NONE, lineterminator="\n", na_rep="")
    return path


def tasks_frame(tasks: Iterable[TaskRecord]) -> pd.DataFrame:
    rows = sorted(tasks, key=lambda t: (t.soc_code, t.task_id))
    return pd.DataFrame(
        [[t.soc_code, t.task_id, t.text, repr(t.importance), repr(t.relevance), t.title or ""] for t in rows],
        columns=["soc_code", "task_id", "text", "importance", "relevance", "title"],
    )


def dump_normalized(
    out_dir: Union[str, Path],
    tasks: Sequence[TaskRecord] = (),
    profiles: Sequence[AbilityProfile] = (),
    employment: Sequence[EmploymentRecord] = (),
    telework: Optional[TeleworkTable] = None,
    tier_shares: Optional[TierShareTable] = None,
) -> Dict[str, Path]:
    """
    Write parsed tables in the normalized format, one file per table.

    Rows are sorted by soc_code then the secondary key; floats are written
    at full precision so the files re-parse to identical records.

    Returns:
        Mapping of table name to written path
    """
    out_dir = Path(out_dir)
    written: Dict[str, Path] = {}

    written["tasks"] = write_frame(tasks_frame(tasks), out_dir / "tasks.tsv")

    ability_rows = sorted(
        (p.soc_code, name, repr(importance)) for p in profiles for name, importance in p.entries
    )
    written["ability_profiles"] = write_frame(
        pd.DataFrame(ability_rows, columns=["soc_code", "ability", "importance"]), out_dir / "ability_profiles.tsv"
    )

    employment_rows = sorted((e.soc_code, e.region_id, str(e.employment)) for e in employment)
    written["employment"] = write_frame(
        pd.DataFrame(employment_rows, columns=["soc_code", "region_id", "employment"]), out_dir / "employment.tsv"
    )

    if telework is not None:
        written["telework"] = write_frame(
            pd.DataFrame([[g, repr(r)] for g, r in sorted(telework.rates.items())], columns=["soc_major_group", "r_o"]),
            out_dir / "telework.tsv",
        )
    if tier_shares is not None:
        written["tier_shares"] = write_frame(
            pd.DataFrame(
                [[g, *(repr(p) for p in pi)] for g, pi in sorted(tier_shares.shares.items())],
                columns=["soc_major_group", "tier_1", "tier_2", "tier_3"],
            ),
            out_dir / "tier_shares.tsv",
        )

    logger.info(f"Wrote {len(written)} normalized tables to {out_dir}")
    return written


def write_reject_report(reports: Sequence[RejectReport], path: Union[str, Path]) -> Path:
    """Write all rejected rows of several parses into one table."""
    rows = [
        [Path(r.source).name, str(row.line_number), row.reason]
        for r in reports
        for row in sorted(r.rejected, key=lambda row: row.line_number)
    ]
    return write_frame(pd.DataFrame(rows, columns=["source", "line_number", "reason"]), Path(path))


# Fixture vocabulary. Every third task statement carries a coverage-rubric
# phrase so all penalty paths are exercised.
FIXTURE_GROUPS = ("13", "23", "29", "31", "41", "43")
FIXTURE_REGIONS = ("seattle", "sf_bay", "austin", "new_york", "boston")
FIXTURE_ABILITIES = (
    "Written Comprehension",
    "Written Expression",
    "Deductive Reasoning",
    "Information Ordering",
    "Mathematical Reasoning",
    "Memorization",
    "Speed of Closure",
    "Speech Recognition",
    "Near Vision",
    "Manual Dexterity",
    "Static Strength",
)
FIXTURE_VERBS = ("Review", "Prepare", "Analyze", "Maintain", "Record", "Coordinate", "Evaluate", "Update")
FIXTURE_OBJECTS = (
    "account statements",
    "client files",
    "loan documentation",
    "inventory records",
    "scheduling calendars",
    "billing summaries",
    "case summaries",
    "supply orders",
)
FIXTURE_CLAUSES = (
    "using automated systems",
    "for management review",
    "according to established procedures",
    "with spreadsheet software",
)
FIXTURE_PENALTY_PHRASES = (
    "negotiate terms with vendors",
    "counsel clients on options",
    "certify documents for regulatory compliance",
    "diagnose discrepancies in records",
    "lift and move heavy boxes",
    "perform field work at client sites",
    "respond to emergency requests",
    "escalate novel situation cases",
)
FIXTURE_MODIFIER_PHRASES = ("perform data entry of", "compile", "draft correspondence about")
FIXTURE_PENALTY_EVERY = 3
FIXTURE_FIRST_SERIAL = 1011
# four-digit SOC detail codes per major group
MAX_FIXTURE_OCCUPATIONS = len(FIXTURE_GROUPS) * (10000 - FIXTURE_FIRST_SERIAL)


class FixtureCorpus(BaseModel):
    """A generated task corpus with matching ability profiles and employment."""

    model_config = ConfigDict(frozen=True)

    tasks: Tuple[TaskRecord, ...]
    profiles: Tuple[AbilityProfile, ...]
    employment: Tuple[EmploymentRecord, ...]


def generate_fixture_corpus(
    seed: int,
    n_occupations: int,
    tasks_per_occ: int,
    abilities: Sequence[str] = FIXTURE_ABILITIES,
    regions: Sequence[str] = FIXTURE_REGIONS,
) -> FixtureCorpus:
    """
    Generate a deterministic fixture corpus.

    Args:
        seed: Random seed; identical arguments always give identical output
        n_occupations: Number of occupations (cycled over six SOC major groups,
            at most MAX_FIXTURE_OCCUPATIONS)
        tasks_per_occ: Task statements per occupation
        abilities: Ability names profiles draw from
        regions: Region ids employment rows are generated for

    Returns:
        FixtureCorpus satisfying every ingest type invariant
    """
    if n_occupations < 1 or tasks_per_occ < 1:
        raise InvariantError("Fixture sizes must be at least 1", module="ingest")
    if n_occupations > MAX_FIXTURE_OCCUPATIONS:
        raise InvariantError(
            f"Fixture corpus holds at most {MAX_FIXTURE_OCCUPATIONS} occupations, got {n_occupations}", module="ingest"
        )

    rng = np.random.default_rng(seed)
    tasks: List[TaskRecord] = []
    profiles: List[AbilityProfile] = []
    employment: List[EmploymentRecord] = []

    for occ in range(n_occupations):
        group = FIXTURE_GROUPS[occ % len(FIXTURE_GROUPS)]
        soc = f"{group}-{FIXTURE_FIRST_SERIAL + occ // len(FIXTURE_GROUPS):04d}"
        title = f"Fixture Occupation {occ + 1:03d}"

        for t in range(tasks_per_occ):
            verb = FIXTURE_VERBS[int(rng.integers(len(FIXTURE_VERBS)))]
            obj = FIXTURE_OBJECTS[int(rng.integers(len(FIXTURE_OBJECTS)))]
            clause = FIXTURE_CLAUSES[int(rng.integers(len(FIXTURE_CLAUSES)))]
            text = f"{verb} {obj} {clause}"
            if t % FIXTURE_PENALTY_EVERY == 0:
                phrase = FIXTURE_PENALTY_PHRASES[int(rng.integers(len(FIXTURE_PENALTY_PHRASES)))]
                text = f"{text} and {phrase}"
            elif rng.random() < 0.3:
                phrase = FIXTURE_MODIFIER_PHRASES[int(rng.integers(len(FIXTURE_MODIFIER_PHRASES)))]
                text = f"{text}; {phrase} {obj}"
            tasks.append(
                TaskRecord(
                    soc_code=soc,
                    task_id=f"{occ + 1:03d}-{t + 1:03d}",
                    text=text,
                    importance=round(float(rng.uniform(1.0, 5.0)), 2),
                    relevance=round(float(rng.uniform(5.0, 100.0)), 2),
                    title=title,
                )
            )

        count = int(rng.integers(3, min(6, len(abilities)) + 1))
        chosen = sorted(rng.choice(len(abilities), size=count, replace=False).tolist())
        profiles.append(
            AbilityProfile(
                soc_code=soc,
                entries=tuple(sorted((abilities[i], round(float(rng.uniform(1.0, 5.0)), 2)) for i in chosen)),
            )
        )
        for region in regions:
            employment.append(
                EmploymentRecord(soc_code=soc, region_id=region, employment=int(rng.integers(100, 20000)))
            )

    logger.debug(f"Generated fixture corpus seed={seed}: {len(tasks)} tasks, {len(profiles)} profiles")
    return FixtureCorpus(
        tasks=tuple(sorted(tasks, key=lambda r: (r.soc_code, r.task_id))),
        profiles=tuple(sorted(profiles, key=lambda p: p.soc_code)),
        employment=tuple(sorted(employment, key=lambda r: (r.soc_code, r.region_id))),
    )

"""Shared data model: project lists, outcomes and per-project metric vectors."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, TextIO
from urllib.parse import urlparse


class ParseError(ValueError):
    """Raised for malformed project-list or metric CSV input."""


class ProjectStatus(str, enum.Enum):
    GRADUATED = "graduated"
    RETIRED = "retired"
    INCUBATING = "incubating"

    @classmethod
    def parse(cls, token: str) -> "ProjectStatus":
        norm = token.strip().lower()
        for member in cls:
            if member.value == norm:
                return member
        raise ParseError(f"unknown project status {token!r}")

    @property
    def outcome(self) -> Optional[int]:
        """1 for graduated, 0 for retired, None for projects still incubating."""
        return {"graduated": 1, "retired": 0}.get(self.value)


def split_forge_url(url: str) -> tuple[str, str]:
    """Return ``(owner, repo)`` from a forge URL such as ``https://github.com/apache/foo``."""
    parsed = urlparse(url.strip())
    if not parsed.scheme or not parsed.netloc:
        raise ParseError(f"forge URL is not absolute: {url!r}")
    parts = [p for p in parsed.path.split("/") if p]
    if len(parts) < 2:
        raise ParseError(f"forge URL lacks owner/repository: {url!r}")
    owner, repo = parts[0], parts[1]
    if repo.endswith(".git"):
        repo = repo[:-4]
    if not owner or not repo:
        raise ParseError(f"forge URL lacks owner/repository: {url!r}")
    return owner, repo


@dataclass(frozen=True)
class ProjectRecord:
    name: str
    forge_url: str
    status: ProjectStatus
    local_clone_path: Optional[str] = None

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise ParseError("project name must be non-empty")
        split_forge_url(self.forge_url)

    @property
    def owner(self) -> str:
        return split_forge_url(self.forge_url)[0]

    @property
    def repo(self) -> str:
        return split_forge_url(self.forge_url)[1]


PROJECT_LIST_HEADER = ("project_name", "github_url", "status")


def parse_project_list(source: TextIO) -> list[ProjectRecord]:
    """Parse a project list CSV with header ``project_name,github_url,status``.

    An optional ``local_clone_path`` column is honoured when present.
    Row numbers in error messages count the header as row 1.
    """
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise ParseError("project list is empty (no header row)")
    fields = [f.strip() for f in reader.fieldnames]
    missing = [h for h in PROJECT_LIST_HEADER if h not in fields]
    if missing:
        raise ParseError(f"project list header missing column(s): {', '.join(missing)}")
    reader.fieldnames = fields

    records: list[ProjectRecord] = []
    seen: set[str] = set()
    for rowno, row in enumerate(reader, start=2):
        if None in row:
            raise ParseError(f"row {rowno}: too many fields")
        values = {}
        for col in PROJECT_LIST_HEADER:
            val = row.get(col)
            if val is None or not val.strip():
                raise ParseError(f"row {rowno}: missing value for field {col!r}")
            values[col] = val.strip()
        try:
            status = ProjectStatus.parse(values["status"])
        except ParseError as exc:
            raise ParseError(f"row {rowno}: field 'status': {exc}") from None
        try:
            split_forge_url(values["github_url"])
        except ParseError as exc:
            raise ParseError(f"row {rowno}: field 'github_url': {exc}") from None
        name = values["project_name"]
        if name in seen:
            raise ParseError(f"row {rowno}: duplicate project name {name!r}")
        seen.add(name)
        clone = (row.get("local_clone_path") or "").strip() or None
        records.append(ProjectRecord(name, values["github_url"], status, clone))
    return records


def format_project_list(records: Iterable[ProjectRecord]) -> str:
    records = list(records)
    with_clone = any(r.local_clone_path for r in records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(PROJECT_LIST_HEADER) + (["local_clone_path"] if with_clone else [])
    writer.writerow(header)
    for r in records:
        row = [r.name, r.forge_url, r.status.value]
        if with_clone:
            row.append(r.local_clone_path or "")
        writer.writerow(row)
    return buf.getvalue()


# Metric fields in canonical output order, with their allowed ranges.
GIT_METRICS = ("dimensionality_index", "additive_contribution_index", "logic_coupling_index")
FORGE_METRICS = (
    "frequency_index",
    "central_management_index",
    "pre_communication_index",
    "duplicate_pr_ratio",
    "hard_fork_present",
)
METRIC_FIELDS = (
    "frequency_index",
    "dimensionality_index",
    "additive_contribution_index",
    "logic_coupling_index",
    "central_management_index",
    "pre_communication_index",
    "duplicate_pr_ratio",
    "hard_fork_present",
)
UNIT_INTERVAL = {
    "additive_contribution_index",
    "logic_coupling_index",
    "central_management_index",
    "pre_communication_index",
    "duplicate_pr_ratio",
}
BINARY_METRICS = {"hard_fork_present"}

METRIC_LABELS = {
    "frequency_index": "Frequency Index",
    "dimensionality_index": "Dimensionality Index",
    "additive_contribution_index": "Additive Contribution Index",
    "logic_coupling_index": "Logic Coupling Index",
    "central_management_index": "Central Management Index",
    "pre_communication_index": "Pre-communication Index",
    "duplicate_pr_ratio": "Ratio of Duplicate PRs",
    "hard_fork_present": "Hard forks",
}

METRIC_CSV_HEADER = ("project", "status", "outcome") + METRIC_FIELDS


def check_metric_value(name: str, value: Optional[float]) -> None:
    """Raise ValueError if ``value`` violates the range of metric ``name``. None means MISSING."""
    if value is None:
        return
    if name not in METRIC_FIELDS:
        raise ValueError(f"unknown metric {name!r}")
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if name in BINARY_METRICS:
        if value not in (0, 1):
            raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    elif name in UNIT_INTERVAL:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    elif value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class MetricVector:
    """The eight metrics of one project; ``None`` marks a MISSING value."""

    project: str
    status: Optional[ProjectStatus] = None
    frequency_index: Optional[float] = None
    dimensionality_index: Optional[float] = None
    additive_contribution_index: Optional[float] = None
    logic_coupling_index: Optional[float] = None
    central_management_index: Optional[float] = None
    pre_communication_index: Optional[float] = None
    duplicate_pr_ratio: Optional[float] = None
    hard_fork_present: Optional[int] = None

    def __post_init__(self):
        for name in METRIC_FIELDS:
            check_metric_value(name, getattr(self, name))

    @property
    def outcome(self) -> Optional[int]:
        return None if self.status is None else self.status.outcome

    def get(self, metric: str) -> Optional[float]:
        return getattr(self, metric)

    def merged(self, other: "MetricVector", fields: Iterable[str]) -> "MetricVector":
        """Copy of self with ``fields`` taken from ``other``."""
        return replace(self, **{f: getattr(other, f) for f in fields})


@dataclass(frozen=True)
class AnalysisRow:
    metrics: MetricVector
    outcome: int


def to_analysis_rows(records: list[ProjectRecord], metrics: list[MetricVector]) -> list[AnalysisRow]:
    """Join metrics to records by name and attach the binary outcome.

    Incubating projects are dropped; a metric vector without a record is an error.
    """
    by_name = {r.name: r for r in records}
    rows = []
    for mv in metrics:
        rec = by_name.get(mv.project)
        if rec is None:
            raise KeyError(f"metric vector for unknown project {mv.project!r}")
        outcome = rec.status.outcome
        if outcome is None:
            continue
        if mv.status != rec.status:
            mv = replace(mv, status=rec.status)
        rows.append(AnalysisRow(mv, outcome))
    return rows


def _fmt_value(v: Optional[float]) -> str:
    if v is None:
        return ""
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    return repr(float(v))


def format_metric_csv(vectors: Iterable[MetricVector]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_CSV_HEADER)
    for mv in vectors:
        outcome = mv.outcome
        writer.writerow(
            [mv.project, mv.status.value if mv.status else "", "" if outcome is None else outcome]
            + [_fmt_value(mv.get(m)) for m in METRIC_FIELDS]
        )
    return buf.getvalue()


def parse_metric_csv(source: TextIO) -> list[MetricVector]:
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise ParseError("metric CSV is empty")
    missing = [h for h in METRIC_CSV_HEADER if h not in reader.fieldnames]
    if missing:
        raise ParseError(f"metric CSV header missing column(s): {', '.join(missing)}")
    out = []
    for rowno, row in enumerate(reader, start=2):
        status = ProjectStatus.parse(row["status"]) if row["status"].strip() else None
        values = {}
        for m in METRIC_FIELDS:
            raw = (row[m] or "").strip()
            if not raw:
                values[m] = None
                continue
            try:
                values[m] = int(raw) if m in BINARY_METRICS else float(raw)
            except ValueError:
                raise ParseError(f"row {rowno}: field {m!r}: not a number: {raw!r}") from None
        try:
            out.append(MetricVector(project=row["project"], status=status, **values))
        except ValueError as exc:
            raise ParseError(f"row {rowno}: {exc}") from None
    return out


@dataclass
class MetricTable:
    """Mutable accumulator of metric vectors in project-list order."""

    vectors: dict[str, MetricVector] = field(default_factory=dict)

    @classmethod
    def for_projects(cls, records: Iterable[ProjectRecord]) -> "MetricTable":
        return cls({r.name: MetricVector(project=r.name, status=r.status) for r in records})

    def update(self, mv: MetricVector, fields: Iterable[str]) -> None:
        base = self.vectors.get(mv.project, MetricVector(project=mv.project, status=mv.status))
        self.vectors[mv.project] = base.merged(mv, fields)

    def to_csv(self) -> str:
        return format_metric_csv(self.vectors.values())

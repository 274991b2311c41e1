"""Domain types, record validation and canonical record serialization."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Literal, Mapping

from .errors import MalformedRecord, SchemaViolation

logger = logging.getLogger(__name__)

METADATA_FIELDS = ("student_name", "student_id", "study_program", "semester", "academic_year")
DEFAULT_CODE_PATTERN = r"[A-Za-z]{2,4}[0-9]{3,4}"


@dataclass(frozen=True)
class TextSpan:
    text: str
    x0: float
    y0: float
    x1: float
    y1: float
    font_size: float

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"inverted bbox for span {self.text!r}")
        if not self.text.strip():
            raise ValueError("span text is blank")

    @property
    def cx(self) -> float:
        return (self.x0 + self.x1) / 2

    @property
    def cy(self) -> float:
        return (self.y0 + self.y1) / 2


@dataclass(frozen=True)
class Ruling:
    orientation: Literal["horizontal", "vertical"]
    position: float
    start: float
    end: float
    thickness: float = 1.0

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise ValueError(f"bad orientation {self.orientation!r}")
        if not self.start < self.end:
            raise ValueError("ruling start must precede end")
        if self.thickness <= 0:
            raise ValueError("ruling thickness must be positive")

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class PositionedPage:
    width: float
    height: float
    spans: tuple[TextSpan, ...] = ()
    rulings: tuple[Ruling, ...] = ()

    def __post_init__(self):
        tol = 1.0
        for s in self.spans:
            if s.x0 < -tol or s.y0 < -tol or s.x1 > self.width + tol or s.y1 > self.height + tol:
                raise ValueError(f"span {s.text!r} lies outside the page")


@dataclass(frozen=True)
class Metadata:
    """Header fields. ``None`` marks a field as absent."""

    student_name: str | None = None
    student_id: str | None = None
    study_program: str | None = None
    semester: str | None = None
    academic_year: str | None = None

    def items(self) -> Iterator[tuple[str, str | None]]:
        for name in METADATA_FIELDS:
            yield name, getattr(self, name)

    def missing(self) -> list[str]:
        return [name for name, value in self.items() if not value]

    def merged(self, other: Metadata) -> Metadata:
        """Fill this record's absent fields from ``other``."""
        return replace(self, **{k: v for k, v in other.items() if v and not getattr(self, k)})


@dataclass(frozen=True)
class CourseRow:
    index: int
    code: str
    name: str
    sks: int
    lecturer: str
    schedule: str = ""


@dataclass(frozen=True)
class KrsRecord:
    metadata: Metadata = field(default_factory=Metadata)
    courses: tuple[str, ...] = ()
    lecturers: tuple[str, ...] = ()
    rows: tuple[CourseRow, ...] | None = None

    @classmethod
    def from_rows(cls, metadata: Metadata, rows) -> KrsRecord:
        rows = tuple(rows)
        return cls(
            metadata=metadata,
            courses=tuple(r.name for r in rows),
            lecturers=tuple(r.lecturer for r in rows),
            rows=rows,
        )

    def without_rows(self) -> KrsRecord:
        return replace(self, rows=None)

    def is_empty(self) -> bool:
        return not self.courses and not self.lecturers and not any(v for _, v in self.metadata.items())


@dataclass(frozen=True)
class ValidationPolicy:
    max_rows: int = 15
    code_pattern: str = DEFAULT_CODE_PATTERN
    sks_range: tuple[int, int] = (1, 6)
    require_all_metadata: bool = True

    def __post_init__(self):
        if self.max_rows < 1:
            raise ValueError("max_rows must be >= 1")
        re.compile(self.code_pattern)


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.path}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


ValidationReport = list  # list[Violation]; empty means valid


@dataclass(frozen=True)
class Attempt:
    stage: str
    ok: bool
    reason: str = ""


@dataclass(frozen=True)
class ExtractionOutcome:
    record: KrsRecord
    metadata_route: Literal["regex", "llm"] | None
    table_route: Literal["lattice", "stream", "llm"] | None
    stage_timings: Mapping[str, float]
    attempts: tuple[Attempt, ...]
    doc_id: str = ""
    error: str | None = None

    @property
    def seconds(self) -> float:
        return sum(self.stage_timings.values())


def validate_record(record: KrsRecord, policy: ValidationPolicy = ValidationPolicy()) -> list[Violation]:
    """Return every rule the record breaks, sorted by path. Repeated lecturers are legal."""
    out: list[Violation] = []
    if policy.require_all_metadata:
        for name in record.metadata.missing():
            out.append(Violation(f"metadata.{name}", "missing"))
    for name, value in record.metadata.items():
        if value and ("\n" in value or "\r" in value):
            out.append(Violation(f"metadata.{name}", "line break"))

    if len(record.courses) != len(record.lecturers):
        out.append(Violation("courses", "count mismatch",
                             f"{len(record.courses)} courses vs {len(record.lecturers)} lecturers"))
    if len(record.courses) > policy.max_rows:
        out.append(Violation("courses", "overflow", f"{len(record.courses)} > {policy.max_rows}"))
    for i, name in enumerate(record.courses):
        if not name.strip():
            out.append(Violation(f"courses[{i}]", "empty"))
    for i, name in enumerate(record.lecturers):
        if not name.strip():
            out.append(Violation(f"lecturers[{i}]", "empty"))

    if record.rows is not None:
        if (tuple(r.name for r in record.rows) != record.courses
                or tuple(r.lecturer for r in record.rows) != record.lecturers):
            out.append(Violation("rows", "projection mismatch"))
        code_re = re.compile(policy.code_pattern)
        lo, hi = policy.sks_range
        for i, row in enumerate(record.rows):
            if row.index < 1:
                out.append(Violation(f"rows[{i}].index", "not positive", str(row.index)))
            if not code_re.fullmatch(row.code):
                out.append(Violation(f"rows[{i}].code", "pattern", repr(row.code)))
            if not lo <= row.sks <= hi:
                out.append(Violation(f"rows[{i}].sks", "range", str(row.sks)))
    return sorted(out, key=lambda v: (v.path, v.rule, v.detail))


# -- serialization -------------------------------------------------------------

def record_to_dict(record: KrsRecord) -> dict:
    return {
        "metadata": {name: value for name, value in record.metadata.items()},
        "courses": list(record.courses),
        "lecturers": list(record.lecturers),
    }


def serialize_record(record: KrsRecord) -> bytes:
    """Canonical UTF-8 JSON: fixed key order, two-space indent, trailing newline.

    ``rows`` is an in-memory detail and is not written.
    """
    text = json.dumps(record_to_dict(record), ensure_ascii=False, indent=2)
    return (text + "\n").encode("utf-8")


def _string_list(obj, key: str) -> tuple[str, ...]:
    value = obj[key]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaViolation(f"{key!r} must be an array of strings")
    return tuple(value)


def record_from_dict(obj) -> KrsRecord:
    if not isinstance(obj, dict):
        raise SchemaViolation("record must be a JSON object")
    for key in ("metadata", "courses", "lecturers"):
        if key not in obj:
            raise SchemaViolation(f"missing key {key!r}")
    for key in obj.keys() - {"metadata", "courses", "lecturers"}:
        logger.warning("ignoring unknown record key %r", key)
    meta = obj["metadata"]
    if not isinstance(meta, dict):
        raise SchemaViolation("'metadata' must be an object")
    values = {}
    for name in meta.keys() - set(METADATA_FIELDS):
        logger.warning("ignoring unknown metadata key %r", name)
    for name in METADATA_FIELDS:
        value = meta.get(name)
        if value is not None and not isinstance(value, str):
            raise SchemaViolation(f"metadata.{name} must be a string or null")
        values[name] = value
    return KrsRecord(
        metadata=Metadata(**values),
        courses=_string_list(obj, "courses"),
        lecturers=_string_list(obj, "lecturers"),
    )


def parse_record(data: bytes) -> KrsRecord:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedRecord(str(exc)) from exc
    return record_from_dict(obj)


"""Label-driven regex extraction of the five header fields."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Literal, Mapping

from .core import METADATA_FIELDS, Metadata
from .errors import ConfigError

Status = Literal["found", "missing", "ambiguous"]

DEFAULT_LABELS: dict[str, tuple[str, ...]] = {
    "student_name": ("Nama Mahasiswa", "Nama", "Name", "Student Name"),
    "student_id": ("NIM", "NPM", "Student ID", "Nomor Induk Mahasiswa"),
    "study_program": ("Program Studi", "Prodi", "Study Program", "Jurusan"),
    "semester": ("Semester",),
    "academic_year": ("Tahun Akademik", "Academic Year", "Tahun Ajaran", "T.A."),
}

ADVISOR_LABELS: tuple[str, ...] = ("Dosen Wali", "Dosen Pembimbing Akademik", "Pembimbing Akademik", "Advisor")


@dataclass(frozen=True)
class MetaPatternSet:
    """Per-field label alternatives; the value is the rest of the line after ``:``."""

    labels: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_LABELS))

    def __post_init__(self):
        for name in METADATA_FIELDS:
            if not self.labels.get(name):
                raise ConfigError(f"metadata field {name!r} has no label pattern")
        for name in self.labels:
            if name not in METADATA_FIELDS:
                raise ConfigError(f"unknown metadata field {name!r}")
        object.__setattr__(self, "_compiled", {
            name: [(label, re.compile(rf"^[ \t]*{re.escape(label)}[ \t]*:[ \t]*(.*?)[ \t]*$",
                                      re.IGNORECASE | re.MULTILINE))
                   for label in labels]
            for name, labels in self.labels.items()
        })

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, list[str]], extend: bool = True) -> MetaPatternSet:
        """Build from config; ``extend`` appends to the default labels instead of replacing."""
        labels = dict(DEFAULT_LABELS) if extend else {}
        for name, extra in mapping.items():
            if name not in METADATA_FIELDS:
                raise ConfigError(f"unknown key patterns.{name}")
            base = labels.get(name, ()) if extend else ()
            labels[name] = tuple(dict.fromkeys((*base, *extra)))
        return cls(labels)

    def all_labels(self) -> list[str]:
        return [label for labels in self.labels.values() for label in labels]


def extract_metadata(text: str, patterns: MetaPatternSet = MetaPatternSet()) -> tuple[Metadata, dict[str, Status]]:
    """Pull each header field from the first line that carries one of its labels.

    Conflicting values for one field come back ambiguous and the field stays
    absent; the caller decides whether to fall back.
    """
    values: dict[str, str | None] = {}
    status: dict[str, Status] = {}
    for name, compiled in patterns._compiled.items():
        hits = []  # (position, value)
        for _label, rx in compiled:
            for m in rx.finditer(text):
                if m.group(1):
                    hits.append((m.start(), m.group(1)))
        hits.sort()
        distinct = {v for _, v in hits}
        if not hits:
            values[name], status[name] = None, "missing"
        elif len(distinct) > 1:
            values[name], status[name] = None, "ambiguous"
        else:
            values[name], status[name] = hits[0][1], "found"
    return Metadata(**values), status

"""Row semantics shared by the lattice and stream extractors.

Both flavours hand over a matrix of cell strings; everything after that
(header mapping, continuation merge, advisor exclusion) happens here so the
two can only disagree on geometry.
"""

from __future__ import annotations

import re
from typing import Sequence

from .core import CourseRow
from .errors import EmptyTable, HeaderNotFound
from .meta import ADVISOR_LABELS
from .textnorm import comparison_key, normalize_value

ROLE_SYNONYMS: dict[str, tuple[str, ...]] = {
    "index": ("no", "nomor", "number", "num"),
    "code": ("coursecode", "kodematakuliah", "kodemk", "kode", "code"),
    "name": ("coursename", "namamatakuliah", "matakuliah", "namamk", "course", "subject"),
    "sks": ("creditssks", "credits", "credit", "sks"),
    "lecturer": ("lecturer", "dosenpengampu", "pengampu", "dosen", "instructor"),
    "schedule": ("daytime", "jadwal", "schedule", "hariwaktu", "waktu"),
}
REQUIRED_ROLES = ("name", "lecturer")

_INDEX = re.compile(r"^\s*(\d{1,3})\.?\s*$")


def _role_score(key: str, synonyms: Sequence[str]) -> int:
    best = 0
    for syn in synonyms:
        hit = key == syn if len(syn) <= 3 else syn in key
        if hit:
            best = max(best, len(syn))
    return best


def map_header(cells: Sequence[str]) -> dict[str, int]:
    """Assign column roles by comparison-key containment; longest synonym wins."""
    claims: dict[str, tuple[int, int]] = {}  # role -> (score, column)
    for col, text in enumerate(cells):
        key = comparison_key(text)
        if not key:
            continue
        scored = [(_role_score(key, syns), role) for role, syns in ROLE_SYNONYMS.items()]
        score, role = max(scored)
        if score == 0:
            continue
        if role not in claims or score > claims[role][0]:
            claims[role] = (score, col)
    return {role: col for role, (_, col) in claims.items()}


def _is_header(roles: dict[str, int]) -> bool:
    return all(r in roles for r in REQUIRED_ROLES) and len(roles) >= 3


def _leading_index(cells: Sequence[str]) -> bool:
    first = next((c for c in cells if c.strip()), "")
    return bool(_INDEX.match(first))


def _merge_into(target: list[str], cells: Sequence[str], join: str) -> None:
    for i, text in enumerate(cells):
        if text.strip():
            target[i] = f"{target[i]}{join}{text}" if target[i].strip() else text


def advisor_matcher(labels: Sequence[str] = ADVISOR_LABELS):
    words = sorted({*(lab.lower() for lab in labels), "wali", "advisor"}, key=len, reverse=True)
    rx = re.compile(r"\b(?:" + "|".join(re.escape(w) for w in words) + r")\b", re.IGNORECASE)
    return lambda text: bool(rx.search(text))


def parse_table(matrix: Sequence[Sequence[str]], line_join: str = " ",
                advisor_labels: Sequence[str] = ADVISOR_LABELS) -> list[CourseRow]:
    """Turn a cell matrix (top row first) into course rows."""
    is_advisor = advisor_matcher(advisor_labels)
    width = max((len(r) for r in matrix), default=0)
    rows = [list(r) + [""] * (width - len(r)) for r in matrix]

    header_at = roles = None
    for i, row in enumerate(rows):
        if len(map_header(row)) < 2:
            continue
        header = list(row)
        j = i + 1
        # header titles wrapped over several lines
        while j < len(rows) and not _leading_index(rows[j]) and not is_advisor(" ".join(rows[j])):
            _merge_into(header, rows[j], line_join)
            j += 1
        candidate = map_header(header)
        if _is_header(candidate):
            header_at, roles = j, candidate
            break
    if roles is None:
        raise HeaderNotFound("no row maps to course-name and lecturer columns")

    index_col = roles.get("index", 0)
    gathered: list[list[str]] = []
    in_advisor = False  # wrapped lines of an advisor row belong to it, not to the last course
    for row in rows[header_at:]:
        if not any(c.strip() for c in row):
            continue
        lecturer_col = roles["lecturer"]
        if is_advisor(" ".join(c for k, c in enumerate(row) if k != lecturer_col)):
            in_advisor = True
            continue
        if _INDEX.match(row[index_col]):
            in_advisor = False
            gathered.append(list(row))
        elif gathered and not in_advisor:
            _merge_into(gathered[-1], row, line_join)
    if not gathered:
        raise EmptyTable("header found but no data rows")

    def cell(row, role):
        col = roles.get(role)
        return normalize_value(row[col]) if col is not None else ""

    out = []
    for row in gathered:
        sks_text = cell(row, "sks")
        sks = int(sks_text) if sks_text.isdigit() else 0
        out.append(CourseRow(
            index=int(_INDEX.match(row[index_col]).group(1)),
            code=cell(row, "code"),
            name=cell(row, "name"),
            sks=sks,
            lecturer=cell(row, "lecturer"),
            schedule=cell(row, "schedule"),
        ))
    return out

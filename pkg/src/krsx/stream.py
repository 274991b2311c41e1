"""Borderless-table extraction from row clusters and vertical whitespace channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import CourseRow, TextSpan, ValidationPolicy
from .errors import ColumnsNotSeparable
from .meta import ADVISOR_LABELS
from .rows import parse_table


@dataclass(frozen=True)
class StreamOptions:
    row_tol: float = 2.0
    min_channel_width: float = 6.0
    min_channel_support: float = 0.8

    def __post_init__(self):
        if self.row_tol <= 0 or self.min_channel_width <= 0:
            raise ValueError("row_tol and min_channel_width must be positive")
        if not 0 < self.min_channel_support <= 1:
            raise ValueError("min_channel_support must lie in (0, 1]")


def group_rows(spans: Sequence[TextSpan], options: StreamOptions = StreamOptions()) -> list[list[TextSpan]]:
    """Cluster spans whose vertical centers lie within ``row_tol``; top row first."""
    ordered = sorted(spans, key=lambda s: (-s.cy, s.x0, s.x1, s.text))
    rows: list[list[TextSpan]] = []
    anchor = None
    for s in ordered:
        if anchor is not None and anchor - s.cy <= options.row_tol:
            rows[-1].append(s)
        else:
            rows.append([s])
            anchor = s.cy
    return [sorted(r, key=lambda s: (s.x0, s.x1, s.text)) for r in rows]


def whitespace_channels(rows: Sequence[Sequence[TextSpan]],
                        options: StreamOptions = StreamOptions()) -> list[tuple[float, float]]:
    """Interior x-intervals left clear by enough rows, left to right."""
    spans = [s for row in rows for s in row]
    if not spans:
        return []
    left = min(s.x0 for s in spans)
    right = max(s.x1 for s in spans)
    cuts = sorted({left, right, *(s.x0 for s in spans), *(s.x1 for s in spans)})
    need = options.min_channel_support * len(rows)
    runs: list[list[float]] = []
    for a, b in zip(cuts, cuts[1:]):
        mid = (a + b) / 2
        clear = sum(1 for row in rows if not any(s.x0 < mid < s.x1 for s in row))
        if clear >= need:
            if runs and runs[-1][1] == a:
                runs[-1][1] = b
            else:
                runs.append([a, b])
    return [(a, b) for a, b in runs
            if a > left and b < right and b - a >= options.min_channel_width]


def infer_columns(rows: Sequence[Sequence[TextSpan]],
                  options: StreamOptions = StreamOptions()) -> list[tuple[float, float]]:
    """Column x-intervals between whitespace channels, left to right."""
    if len(rows) < 2:
        raise ColumnsNotSeparable("need at least two rows to infer columns")
    spans = [s for row in rows for s in row]
    channels = whitespace_channels(rows, options)
    if not channels:
        raise ColumnsNotSeparable("no whitespace channel separates the rows")
    bounds = [min(s.x0 for s in spans)]
    for a, b in channels:
        bounds += [a, b]
    bounds.append(max(s.x1 for s in spans))
    return [(bounds[i], bounds[i + 1]) for i in range(0, len(bounds), 2)]


def column_of(span: TextSpan, columns: Sequence[tuple[float, float]]) -> int:
    for i, (a, b) in enumerate(columns):
        if a <= span.cx <= b:
            return i
    return min(range(len(columns)),
               key=lambda i: min(abs(span.cx - columns[i][0]), abs(span.cx - columns[i][1])))


def stream_matrix(rows: Sequence[Sequence[TextSpan]], columns: Sequence[tuple[float, float]]) -> list[list[str]]:
    matrix = []
    for row in rows:
        cells: list[list[str]] = [[] for _ in columns]
        for span in row:
            cells[column_of(span, columns)].append(span.text)
        matrix.append([" ".join(c) for c in cells])
    return matrix


def parse_stream_table(rows: Sequence[Sequence[TextSpan]], columns: Sequence[tuple[float, float]],
                       policy: ValidationPolicy = ValidationPolicy(),
                       advisor_labels: Sequence[str] = ADVISOR_LABELS) -> list[CourseRow]:
    return parse_table(stream_matrix(rows, columns), " ", advisor_labels)


def extract_stream(spans: Sequence[TextSpan], policy: ValidationPolicy = ValidationPolicy(),
                   options: StreamOptions = StreamOptions(),
                   advisor_labels: Sequence[str] = ADVISOR_LABELS) -> list[CourseRow]:
    rows = group_rows(spans, options)
    return parse_stream_table(rows, infer_columns(rows, options), policy, advisor_labels)

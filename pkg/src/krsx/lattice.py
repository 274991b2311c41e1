"""Ruled-table extraction: grid from ruling lines, spans into cells, cells into rows."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .core import CourseRow, Ruling, TextSpan, ValidationPolicy
from .errors import DegenerateGrid, NoGrid, OrphanOverflow
from .ingest import group_lines
from .meta import ADVISOR_LABELS
from .rows import parse_table


@dataclass(frozen=True)
class LatticeOptions:
    snap_tol: float = 2.0
    min_col_width: float = 12.0
    line_join: str = " "
    min_edge_coverage: float = 0.8
    max_orphan_fraction: float = 0.2

    def __post_init__(self):
        if self.snap_tol < 0:
            raise ValueError("snap_tol must be >= 0")
        if self.min_col_width <= 0:
            raise ValueError("min_col_width must be > 0")


@dataclass(frozen=True)
class CellGrid:
    col_edges: tuple[float, ...]   # ascending x
    row_edges: tuple[float, ...]   # descending y
    texts: tuple[tuple[str, ...], ...] | None = None
    orphans: tuple[TextSpan, ...] = ()

    def __post_init__(self):
        if len(self.col_edges) < 2 or len(self.row_edges) < 2:
            raise ValueError("grid needs at least two edges each way")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_edges) - 1, len(self.col_edges) - 1

    def cell_bbox(self, row: int, col: int) -> tuple[float, float, float, float]:
        return (self.col_edges[col], self.row_edges[row + 1],
                self.col_edges[col + 1], self.row_edges[row])


def _cluster(items: list[tuple[float, float, float]], tol: float) -> list[tuple[float, list]]:
    """Group ``(position, start, end)`` by position; each cluster is ``(mean, [(start, end)])``."""
    clusters: list[list[tuple[float, float, float]]] = []
    for item in sorted(items):
        if clusters and item[0] - clusters[-1][-1][0] <= tol:
            clusters[-1].append(item)
        else:
            clusters.append([item])
    return [(sum(p for p, _, _ in c) / len(c), [(s, e) for _, s, e in c]) for c in clusters]


def _coverage(extents: list[tuple[float, float]], lo: float, hi: float) -> float:
    covered, reach = 0.0, lo
    for s, e in sorted(extents):
        s, e = max(s, reach), min(e, hi)
        if e > s:
            covered += e - s
            reach = e
    return covered / (hi - lo) if hi > lo else 0.0


def detect_grid(rulings: Sequence[Ruling], options: LatticeOptions = LatticeOptions()) -> CellGrid:
    """Cluster ruling positions into row and column edges.

    An edge counts only if its segments cover most of the grid's perpendicular
    extent. A column narrower than ``min_col_width`` (borders drawn too close)
    makes the grid degenerate.
    """
    hs = _cluster([(r.position, r.start, r.end) for r in rulings if r.orientation == "horizontal"],
                  options.snap_tol)
    vs = _cluster([(r.position, r.start, r.end) for r in rulings if r.orientation == "vertical"],
                  options.snap_tol)
    for _ in range(4):
        if len(hs) < 2 or len(vs) < 2:
            break
        x_lo, x_hi = vs[0][0], vs[-1][0]
        y_lo, y_hi = hs[0][0], hs[-1][0]
        tol = options.snap_tol
        keep_h = [c for c in hs if _coverage(c[1], x_lo + tol, x_hi - tol) >= options.min_edge_coverage]
        keep_v = [c for c in vs if _coverage(c[1], y_lo + tol, y_hi - tol) >= options.min_edge_coverage]
        if len(keep_h) == len(hs) and len(keep_v) == len(vs):
            break
        hs, vs = keep_h, keep_v
    if len(hs) < 2 or len(vs) < 2:
        raise NoGrid(f"{len(hs)} row edges, {len(vs)} column edges")
    if len(hs) == 2 and len(vs) == 2:
        raise NoGrid("single enclosing box, no interior structure")
    col_edges = tuple(round(p, 3) for p, _ in vs)
    row_edges = tuple(round(p, 3) for p, _ in reversed(hs))
    widths = [b - a for a, b in zip(col_edges, col_edges[1:])]
    narrow = min(widths)
    if narrow < options.min_col_width:
        raise DegenerateGrid(f"column {widths.index(narrow)} is {narrow:.1f} pt wide")
    return CellGrid(col_edges, row_edges)


def _locate(edges: Sequence[float], value: float, descending: bool) -> int | None:
    """Index of the band holding ``value``; a value on a border goes to the earlier band."""
    for i in range(len(edges) - 1):
        a, b = edges[i], edges[i + 1]
        if (b <= value <= a) if descending else (a <= value <= b):
            return i
    return None


def assign_spans(grid: CellGrid, spans: Sequence[TextSpan],
                 options: LatticeOptions = LatticeOptions()) -> CellGrid:
    """Place each span in the cell containing its center and join multi-line cell text."""
    n_rows, n_cols = grid.shape
    buckets: list[list[list[TextSpan]]] = [[[] for _ in range(n_cols)] for _ in range(n_rows)]
    orphans = []
    for span in spans:
        col = _locate(grid.col_edges, span.cx, descending=False)
        row = _locate(grid.row_edges, span.cy, descending=True)
        if col is None or row is None:
            orphans.append(span)
        else:
            buckets[row][col].append(span)
    if spans and len(orphans) > options.max_orphan_fraction * len(spans):
        raise OrphanOverflow(f"{len(orphans)} of {len(spans)} spans fall outside the grid")
    texts = tuple(
        tuple(options.line_join.join(" ".join(s.text for s in line) for line in group_lines(cell))
              for cell in row)
        for row in buckets
    )
    return replace(grid, texts=texts, orphans=tuple(orphans))


def parse_rows(grid: CellGrid, policy: ValidationPolicy = ValidationPolicy(),
               options: LatticeOptions = LatticeOptions(),
               advisor_labels: Sequence[str] = ADVISOR_LABELS) -> list[CourseRow]:
    """Map the header, merge continuation rows and drop advisor rows.

    ``policy`` is not enforced here; over-long tables are parsed in full and
    left for record validation to reject.
    """
    if grid.texts is None:
        raise ValueError("assign spans before parsing rows")
    return parse_table(grid.texts, options.line_join, advisor_labels)


def extract_lattice(rulings: Sequence[Ruling], spans: Sequence[TextSpan],
                    policy: ValidationPolicy = ValidationPolicy(),
                    options: LatticeOptions = LatticeOptions(),
                    advisor_labels: Sequence[str] = ADVISOR_LABELS) -> list[CourseRow]:
    grid = assign_spans(detect_grid(rulings, options), spans, options)
    return parse_rows(grid, policy, options, advisor_labels)

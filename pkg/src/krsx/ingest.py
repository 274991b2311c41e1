"""PDF page ingestion: positioned text spans, ruling lines, reading-order text."""

from __future__ import annotations

import logging
import math
import re
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import PositionedPage, Ruling, TextSpan
from .errors import IngestError, NoTextContent, NotAPdf, RegionNotFound, UnsupportedFeature
from .fonts import SimpleFont
from .pdfsyntax import Document, Stream, decode_stream, iter_content
from .textnorm import fold_ligatures

logger = logging.getLogger(__name__)

IDENTITY = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


def _mul(m, n):
    """Matrix product ``m x n`` in PDF's row-vector convention."""
    a, b, c, d, e, f = m
    A, B, C, D, E, F = n
    return (a * A + b * C, a * B + b * D,
            c * A + d * C, c * B + d * D,
            e * A + f * C + E, e * B + f * D + F)


def _apply(m, x, y):
    return m[0] * x + m[2] * y + m[4], m[1] * x + m[3] * y + m[5]


@dataclass(frozen=True)
class IngestOptions:
    merge_tol: float = 1.0
    ruling_min_len: float = 10.0

    def __post_init__(self):
        if self.merge_tol < 0:
            raise ValueError("merge_tol must be >= 0")
        if self.ruling_min_len <= 0:
            raise ValueError("ruling_min_len must be > 0")


@dataclass(frozen=True)
class Region:
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, span: TextSpan) -> bool:
        return self.x0 <= span.cx <= self.x1 and self.y0 <= span.cy <= self.y1

    def holds(self, r: Ruling, tol: float = 0.0) -> bool:
        if r.orientation == "horizontal":
            return (self.y0 - tol <= r.position <= self.y1 + tol
                    and r.start >= self.x0 - tol and r.end <= self.x1 + tol)
        return (self.x0 - tol <= r.position <= self.x1 + tol
                and r.start >= self.y0 - tol and r.end <= self.y1 + tol)


@dataclass
class _Glyph:
    ch: str
    x0: float
    x1: float


@dataclass
class _Run:
    glyphs: list
    baseline: float
    size: float
    ascent: float
    descent: float


class _Interpreter:
    """Walks a content stream collecting glyph runs and axis-aligned path segments."""

    def __init__(self, doc: Document, options: IngestOptions):
        self.doc = doc
        self.options = options
        self.runs: list[_Run] = []
        self.segments: list[tuple[float, float, float, float, float]] = []
        self.text_ops = 0
        self._fonts: dict[int, SimpleFont] = {}

    def font(self, resources: dict, name: str) -> SimpleFont | None:
        fonts = self.doc.resolve(resources.get("Font")) or {}
        ref = fonts.get(name)
        font_dict = self.doc.resolve(ref)
        if not isinstance(font_dict, dict):
            return None
        key = id(font_dict)
        if key not in self._fonts:
            self._fonts[key] = SimpleFont(self.doc, font_dict)
        return self._fonts[key]

    def run(self, data: bytes, resources: dict, ctm=IDENTITY, depth: int = 0) -> None:
        if depth > 8:
            raise UnsupportedFeature("form XObjects nested too deeply")
        stack = []
        tm = tlm = IDENTITY
        font = None
        size = char_sp = word_sp = rise = leading = 0.0
        hscale = 1.0
        line_width = 1.0
        path: list[tuple[float, float, float, float]] = []
        rects: list[tuple[float, float, float, float]] = []
        cur = start = None

        def show(items):
            nonlocal tm
            if font is None:
                return
            self.text_ops += 1
            trm = _mul(tm, ctm)
            eff = size * math.hypot(trm[2], trm[3]) or size
            glyphs = []
            for item in items:
                if isinstance(item, (int, float)):
                    dx = -item / 1000 * size * hscale
                    if dx > 0.2 * size and glyphs and glyphs[-1].ch != " ":
                        x_before, _ = _apply(_mul(tm, ctm), 0, rise)
                        tm = (tm[0], tm[1], tm[2], tm[3], tm[4] + dx * tm[0], tm[5] + dx * tm[1])
                        x_after, _ = _apply(_mul(tm, ctm), 0, rise)
                        if dx > 1.0 * size:
                            glyphs.append(_Glyph("\x00", x_before, x_after))  # hard break
                        else:
                            glyphs.append(_Glyph(" ", x_before, x_after))
                    else:
                        tm = (tm[0], tm[1], tm[2], tm[3], tm[4] + dx * tm[0], tm[5] + dx * tm[1])
                    continue
                for ch, w, is_space in font.decode(item):
                    adv = (w / 1000 * size + char_sp + (word_sp if is_space else 0.0)) * hscale
                    m = _mul(tm, ctm)
                    x0, _ = _apply(m, 0, rise)
                    tm = (tm[0], tm[1], tm[2], tm[3], tm[4] + adv * tm[0], tm[5] + adv * tm[1])
                    x1, _ = _apply(_mul(tm, ctm), 0, rise)
                    glyphs.append(_Glyph(ch, min(x0, x1), max(x0, x1)))
            _, base = _apply(trm, 0, rise)
            if glyphs:
                self.runs.append(_Run(glyphs, base, eff, font.ascent, font.descent))

        def flush_path(paint: bool):
            nonlocal path, rects
            if paint:
                lw = line_width * math.hypot(ctm[0], ctm[1]) or 1.0
                for x0, y0, x1, y1 in path:
                    self.segments.append((x0, y0, x1, y1, lw))
                for rx0, ry0, rx1, ry1 in rects:
                    w, h = rx1 - rx0, ry1 - ry0
                    if min(w, h) <= 3.0:
                        # thin filled bar drawn as a line
                        if w >= h:
                            self.segments.append((rx0, (ry0 + ry1) / 2, rx1, (ry0 + ry1) / 2, max(h, 0.1)))
                        else:
                            self.segments.append(((rx0 + rx1) / 2, ry0, (rx0 + rx1) / 2, ry1, max(w, 0.1)))
                    else:
                        for seg in ((rx0, ry0, rx1, ry0), (rx0, ry1, rx1, ry1),
                                    (rx0, ry0, rx0, ry1), (rx1, ry0, rx1, ry1)):
                            self.segments.append((*seg, lw))
            path, rects = [], []

        for op, args in iter_content(data):
            try:
                if op == "q":
                    stack.append((ctm, line_width))
                elif op == "Q":
                    if stack:
                        ctm, line_width = stack.pop()
                elif op == "cm" and len(args) == 6:
                    ctm = _mul(tuple(float(a) for a in args), ctm)
                elif op == "w" and args:
                    line_width = float(args[0])
                elif op == "BT":
                    tm = tlm = IDENTITY
                elif op == "Tf" and len(args) == 2:
                    font = self.font(resources, args[0])
                    size = float(args[1])
                elif op == "Tc" and args:
                    char_sp = float(args[0])
                elif op == "Tw" and args:
                    word_sp = float(args[0])
                elif op == "Tz" and args:
                    hscale = float(args[0]) / 100
                elif op == "TL" and args:
                    leading = float(args[0])
                elif op == "Ts" and args:
                    rise = float(args[0])
                elif op in ("Td", "TD") and len(args) == 2:
                    tx, ty = float(args[0]), float(args[1])
                    if op == "TD":
                        leading = -ty
                    tlm = _mul((1, 0, 0, 1, tx, ty), tlm)
                    tm = tlm
                elif op == "Tm" and len(args) == 6:
                    tm = tlm = tuple(float(a) for a in args)
                elif op == "T*":
                    tlm = _mul((1, 0, 0, 1, 0, -leading), tlm)
                    tm = tlm
                elif op == "Tj" and args:
                    show([args[0]])
                elif op == "TJ" and args:
                    show(args[0])
                elif op == "'" and args:
                    tlm = _mul((1, 0, 0, 1, 0, -leading), tlm)
                    tm = tlm
                    show([args[0]])
                elif op == '"' and len(args) == 3:
                    word_sp, char_sp = float(args[0]), float(args[1])
                    tlm = _mul((1, 0, 0, 1, 0, -leading), tlm)
                    tm = tlm
                    show([args[2]])
                elif op == "m" and len(args) == 2:
                    cur = start = _apply(ctm, float(args[0]), float(args[1]))
                elif op == "l" and len(args) == 2 and cur is not None:
                    nxt = _apply(ctm, float(args[0]), float(args[1]))
                    path.append((*cur, *nxt))
                    cur = nxt
                elif op in ("c", "v", "y") and len(args) >= 4:
                    cur = _apply(ctm, float(args[-2]), float(args[-1]))
                elif op == "h" and cur is not None and start is not None:
                    if cur != start:
                        path.append((*cur, *start))
                    cur = start
                elif op == "re" and len(args) == 4:
                    x, y, w, h = (float(a) for a in args)
                    corners = [_apply(ctm, px, py) for px, py in ((x, y), (x + w, y + h))]
                    (ax, ay), (bx, by) = corners
                    rects.append((min(ax, bx), min(ay, by), max(ax, bx), max(ay, by)))
                    cur = start = corners[0]
                elif op in ("S", "s", "f", "F", "f*", "B", "B*", "b", "b*"):
                    if op in ("s", "b", "b*") and cur is not None and start is not None and cur != start:
                        path.append((*cur, *start))
                    flush_path(True)
                elif op == "n":
                    flush_path(False)
                elif op == "Do" and args:
                    self._xobject(resources, args[0], ctm, depth)
            except (TypeError, ValueError, IndexError) as exc:
                logger.debug("skipping malformed %s operator: %s", op, exc)

    def _xobject(self, resources: dict, name: str, ctm, depth: int) -> None:
        xobjects = self.doc.resolve(resources.get("XObject")) or {}
        xobj = self.doc.resolve(xobjects.get(name))
        if not isinstance(xobj, Stream) or xobj.dict.get("Subtype") != "Form":
            return
        matrix = tuple(float(v) for v in (xobj.dict.get("Matrix") or IDENTITY))
        res = self.doc.resolve(xobj.dict.get("Resources")) or resources
        self.run(decode_stream(xobj, self.doc), res, _mul(matrix, ctm), depth + 1)


def _runs_to_spans(runs: Sequence[_Run], merge_tol: float, width: float, height: float) -> list[TextSpan]:
    pieces = []  # (glyphs, run) chunks split at hard breaks
    for run in runs:
        chunk: list[_Glyph] = []
        for g in run.glyphs:
            if g.ch == "\x00":
                if chunk:
                    pieces.append((chunk, run))
                chunk = []
            else:
                chunk.append(g)
        if chunk:
            pieces.append((chunk, run))

    merged: list[tuple[list, _Run]] = []
    for glyphs, run in pieces:
        if merged:
            prev_glyphs, prev = merged[-1]
            gap = glyphs[0].x0 - prev_glyphs[-1].x1
            if (abs(prev.baseline - run.baseline) < 0.5 and abs(prev.size - run.size) < 0.1
                    and -merge_tol <= gap <= merge_tol):
                merged[-1] = (prev_glyphs + glyphs, prev)
                continue
        merged.append((list(glyphs), run))

    spans = []
    for glyphs, run in merged:
        while glyphs and not glyphs[0].ch.strip():
            glyphs = glyphs[1:]
        while glyphs and not glyphs[-1].ch.strip():
            glyphs = glyphs[:-1]
        if not glyphs:
            continue
        text = "".join(g.ch for g in glyphs)
        x0 = min(g.x0 for g in glyphs)
        x1 = max(g.x1 for g in glyphs)
        y0 = run.baseline + run.descent * run.size
        y1 = run.baseline + run.ascent * run.size
        if x1 < -1 or x0 > width + 1 or y1 < -1 or y0 > height + 1:
            logger.debug("dropping off-page span %r", text)
            continue
        spans.append(TextSpan(text, max(x0, 0.0), max(y0, 0.0), min(x1, width), min(y1, height), run.size))
    return spans


def _segments_to_rulings(segments, options: IngestOptions) -> list[Ruling]:
    horizontal, vertical = [], []
    for x0, y0, x1, y1, lw in segments:
        if abs(y1 - y0) <= 0.5 and abs(x1 - x0) >= options.ruling_min_len:
            horizontal.append(((y0 + y1) / 2, min(x0, x1), max(x0, x1), lw))
        elif abs(x1 - x0) <= 0.5 and abs(y1 - y0) >= options.ruling_min_len:
            vertical.append(((x0 + x1) / 2, min(y0, y1), max(y0, y1), lw))
    out = []
    for orientation, segs in (("horizontal", horizontal), ("vertical", vertical)):
        out.extend(merge_collinear(orientation, segs, options.merge_tol))
    return out


def merge_collinear(orientation: str, segs, tol: float) -> list[Ruling]:
    """Join segments lying on one line (within ``tol``) whose extents touch or overlap."""
    rulings = []
    pending = sorted(segs)
    while pending:
        pos, start, end, lw = pending.pop(0)
        changed = True
        while changed:
            changed = False
            rest = []
            for p, s, e, w in pending:
                if abs(p - pos) <= tol and s <= end + tol and e >= start - tol:
                    start, end, lw = min(start, s), max(end, e), max(lw, w)
                    changed = True
                else:
                    rest.append((p, s, e, w))
            pending = rest
        rulings.append(Ruling(orientation, round(pos, 3), round(start, 3), round(end, 3), max(lw, 0.01)))
    return rulings


def load_page(data: bytes, options: IngestOptions = IngestOptions()) -> PositionedPage:
    """Decode the first page of a text-based PDF into spans and rulings."""
    try:
        doc = Document(data)
        pages = doc.pages()
    except IngestError:
        raise
    except (EOFError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise NotAPdf(f"unreadable PDF structure: {exc}") from exc
    if not pages:
        raise NotAPdf("document has no pages")
    if len(pages) > 1:
        logger.warning("document has %d pages; only the first is read", len(pages))
    page = pages[0]
    box = [float(doc.resolve(v)) for v in (doc.resolve(page.get("MediaBox")) or [0, 0, 612, 792])]
    if page.get("Rotate", 0) not in (0, None):
        raise UnsupportedFeature("rotated pages")
    resources = doc.resolve(page.get("Resources")) or {}
    contents = doc.resolve(page.get("Contents"))
    parts = contents if isinstance(contents, list) else [contents]
    stream_data = b""
    for part in parts:
        part = doc.resolve(part)
        if isinstance(part, Stream):
            stream_data += decode_stream(part, doc) + b"\n"

    interp = _Interpreter(doc, options)
    shift = (1.0, 0.0, 0.0, 1.0, -box[0], -box[1])
    interp.run(stream_data, resources, shift)
    width, height = box[2] - box[0], box[3] - box[1]
    spans = _runs_to_spans(interp.runs, options.merge_tol, width, height)
    if interp.text_ops == 0 or not spans:
        raise NoTextContent("page has no text; scanned or image-only documents are out of scope")
    rulings = _segments_to_rulings(interp.segments, options)
    return PositionedPage(width, height, tuple(spans), tuple(rulings))


# -- reading order ------------------------------------------------------------------

def group_lines(spans: Iterable[TextSpan]) -> list[list[TextSpan]]:
    """Cluster spans into top-to-bottom lines; each line sorted left to right."""
    spans = sorted(spans, key=lambda s: (-s.cy, s.x0, s.text))
    if not spans:
        return []
    threshold = 0.5 * statistics.median(s.font_size for s in spans)
    lines: list[list[TextSpan]] = []
    anchor = None
    for s in spans:
        if anchor is None or abs(anchor - s.cy) >= threshold:
            lines.append([s])
            anchor = s.cy
        else:
            lines[-1].append(s)
    return [sorted(line, key=lambda s: (s.x0, s.text)) for line in lines]


def line_text(line: Sequence[TextSpan]) -> str:
    return fold_ligatures(" ".join(s.text for s in line))


def plain_text(page: PositionedPage) -> str:
    return "\n".join(line_text(line) for line in group_lines(page.spans))


# -- table region ---------------------------------------------------------------------

_GENERIC_LABEL = re.compile(r"^\s*[A-Za-z][A-Za-z.'/()\- ]{0,40}?\s*:(?:\s|$)")


def _is_label_line(text: str, labels: Sequence[str] | None) -> bool:
    if labels:
        return any(re.match(rf"\s*{re.escape(lab)}\s*:", text, re.I) for lab in labels)
    m = _GENERIC_LABEL.match(text)
    return bool(m) and len(m.group().split()) <= 5


def _connected(a: Ruling, b: Ruling, tol: float) -> bool:
    if a.orientation == b.orientation:
        return (abs(a.position - b.position) <= tol
                and a.start <= b.end + tol and b.start <= a.end + tol)
    h, v = (a, b) if a.orientation == "horizontal" else (b, a)
    return (h.start - tol <= v.position <= h.end + tol
            and v.start - tol <= h.position <= v.end + tol)


def ruling_components(rulings: Sequence[Ruling], tol: float = 2.0) -> list[list[Ruling]]:
    rulings = sorted(rulings, key=lambda r: (r.orientation, r.position, r.start, r.end))
    parent = list(range(len(rulings)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(rulings)):
        for j in range(i + 1, len(rulings)):
            if _connected(rulings[i], rulings[j], tol):
                parent[find(i)] = find(j)
    groups: dict[int, list[Ruling]] = {}
    for i, r in enumerate(rulings):
        groups.setdefault(find(i), []).append(r)
    return list(groups.values())


def table_region(page: PositionedPage, labels: Sequence[str] | None = None,
                 pad: float = 2.0, gap_factor: float = 3.2) -> Region:
    """Locate the course table band.

    A connected ruling grid wins when present. Otherwise the band starts below
    the first block of ``Label : value`` lines and ends at the first large
    vertical gap or the next label line.
    """
    grids = [c for c in ruling_components(page.rulings)
             if sum(r.orientation == "horizontal" for r in c) >= 2
             and sum(r.orientation == "vertical" for r in c) >= 2]
    if grids:
        best = max(grids, key=lambda c: (len(c), -min(r.position for r in c)))
        xs = [r.position for r in best if r.orientation == "vertical"]
        xs += [v for r in best if r.orientation == "horizontal" for v in (r.start, r.end)]
        ys = [r.position for r in best if r.orientation == "horizontal"]
        ys += [v for r in best if r.orientation == "vertical" for v in (r.start, r.end)]
        return Region(min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad)

    lines = group_lines(page.spans)
    is_label = [_is_label_line(line_text(line), labels) for line in lines]
    if True not in is_label:
        raise RegionNotFound("no ruling grid and no metadata label lines")
    i = is_label.index(True)
    while i + 1 < len(lines) and is_label[i + 1]:
        i += 1
    body = lines[i + 1:]
    if not body:
        raise RegionNotFound("nothing below the metadata block")
    size = statistics.median(s.font_size for s in page.spans)
    limit = gap_factor * size
    table = [body[0]]
    for prev, line, label in zip(body, body[1:], is_label[i + 2:]):
        if label or prev[0].cy - line[0].cy > limit:
            break
        table.append(line)
    spans = [s for line in table for s in line]
    top_of_block = min(s.y0 for s in lines[i])
    return Region(min(s.x0 for s in spans) - pad, min(s.y0 for s in spans) - pad,
                  max(s.x1 for s in spans) + pad, min(top_of_block, max(s.y1 for s in spans) + pad))

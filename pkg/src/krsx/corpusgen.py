"""Seeded generator of study-plan-card PDFs with construction-time ground truth.

Every page is hand-assembled: one uncompressed content stream, standard
Helvetica faces, no timestamps, so the same seed always yields the same bytes.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Literal, Sequence

from . import _afm
from .core import CourseRow, KrsRecord, Metadata, ValidationPolicy, serialize_record, validate_record
from .errors import InvalidSpec, LayoutOverflow

LayoutKind = Literal["ruled", "borderless", "pathological"]
ROUTE_OF: dict[str, str] = {"ruled": "lattice", "borderless": "stream", "pathological": "llm"}
KNOBS = ("multi_line_course", "ligature_injection", "duplicate_lecturer", "advisor_row", "long_name")

PAGE_W, PAGE_H = 595.0, 842.0
MARGIN = 25.0
LIG_CODES = {"fi": 0x1E, "fl": 0x1F}


# -- pools ---------------------------------------------------------------------------

PROGRAMS = {
    "Informatika": ("Informatika", "IF"),
    "PWK": ("Perencanaan Wilayah dan Kota", "PL"),
    "T. Elektro": ("Teknik Elektro", "EL"),
    "T. Sipil": ("Teknik Sipil", "SI"),
}

COURSES = {
    "IF": ("Calculus I", "Database", "Web Programming II", "Algorithms and Data Structures",
           "Artificial Intelligence", "Operating Systems", "Computer Networks", "Software Engineering",
           "Discrete Mathematics", "Object Oriented Programming", "Human Computer Interaction",
           "Information Security", "Machine Learning", "Compiler Design", "Mobile Programming",
           "Data Mining", "Computer Graphics", "Distributed Systems", "Cloud Computing", "Numerical Methods"),
    "PL": ("Urban Planning Studio", "Regional Economics", "Land Use Planning", "Spatial Analysis",
           "Transportation Planning", "Environmental Planning", "Urban Design", "Housing and Settlements",
           "Planning Theory", "Geographic Information Systems", "Demography", "Infrastructure Planning",
           "Coastal Zone Management", "Rural Development", "Landscape Planning", "Flood Risk Management"),
    "EL": ("High Voltage Engineering", "Power Systems Practicum", "Electric Circuits", "Control Systems",
           "Digital Electronics", "Signals and Systems", "Electromagnetic Fields", "Power Electronics",
           "Microprocessors", "Electrical Machines", "Telecommunication Systems", "Instrumentation",
           "Renewable Energy Systems", "Embedded Systems", "Antenna and Propagation",
           "Digital Signal Processing", "Field Theory"),
    "SI": ("Structural Analysis", "Soil Mechanics", "Fluid Mechanics", "Reinforced Concrete",
           "Steel Structures", "Hydrology", "Highway Engineering", "Construction Management",
           "Engineering Surveying", "Foundation Engineering", "Traffic Engineering", "Building Materials",
           "Engineering Mechanics", "Water Resources Engineering", "Bridge Engineering",
           "Irrigation Engineering"),
}

LONG_COURSES = {
    "IF": ("Software Requirements Specification and Verification",
           "Information Systems Analysis and Design Laboratory",
           "Scientific Computing and Numerical Simulation"),
    "PL": ("Resource Analysis and Environmental Geology",
           "Participatory Planning and Community Development",
           "Regional Development Financing and Fiscal Policy"),
    "EL": ("Electric Power Distribution and Protection Systems",
           "Analog Electronic Circuits Laboratory Practicum",
           "Fiber Optic Communication Systems Laboratory"),
    "SI": ("Earthquake Resistant Building Structure Design",
           "Construction Project Scheduling and Cost Estimation",
           "Flexible Pavement Design and Rehabilitation"),
}

FIRST_NAMES = ("Budi", "Siti", "Agus", "Dewi", "Rina", "Fitri", "Rafli", "Taufik", "Afifah", "Syafira",
               "Ahmad", "Muhammad", "Nur", "Putri", "Rizky", "Dian", "Eko", "Joko", "Wahyu", "Yusuf",
               "Indah", "Fajar", "Ayu", "Bayu", "Citra", "Gilang", "Hendra", "Intan", "Kurnia", "Mega",
               "Nabila", "Pratiwi", "Reza", "Sari", "Utami", "Vina", "Wulan", "Yoga", "Zahra", "Rindi",
               "Juju", "Diana", "Nabiel", "Mochamad", "Rafif", "Fikri", "Saiful", "Arif", "Fahmi",
               "Luthfi", "Zulfikar", "Harold", "Jimmy", "Taryo", "Sulfiana", "Alfian")
LAST_NAMES = ("Wulandari", "Juhaeriyah", "Saputra", "Pratama", "Hidayat", "Nugroho", "Setiawan",
              "Kurniawan", "Wijaya", "Santoso", "Lestari", "Permana", "Gunawan", "Firmansyah", "Hakim",
              "Maulana", "Rahman", "Syafitri", "Utomo", "Susanto", "Rahmawati", "Anggraini", "Purnama",
              "Siregar", "Nasution", "Hutapea", "Simanjuntak", "Harahap", "Haarits", "Fadillah",
              "Rafiqah", "Afliani")
SUFFIXES = ("S.T., M.T.", "S.T.,M.T.", "S.Kom., M.Kom.", "S.ST., M.Si.", "ST., MT.", "S.T., M.Eng.",
            "S.Pd., M.Pd.", "S.Si., M.Sc.", "M.T., Ph.D.", "S.T., M.Sc.")
PREFIXES = ("", "", "", "", "Dr. ", "Ir. ", "Dr. Ir. ")

DAYS = {"en": ("Mon", "Tue", "Wed", "Thu", "Fri"), "id": ("Senin", "Selasa", "Rabu", "Kamis", "Jumat")}

LABELS = {
    "en": {"student_name": "Student Name", "student_id": "Student ID", "study_program": "Study Program",
           "semester": "Semester", "academic_year": "Academic Year", "advisor": "Advisor"},
    "id": {"student_name": "Nama Mahasiswa", "student_id": "NIM", "study_program": "Program Studi",
           "semester": "Semester", "academic_year": "Tahun Akademik", "advisor": "Dosen Wali"},
}
HEADERS = {
    "en": ("No", "Course Code", "Course Name", "Credits (SKS)", "Lecturer", "Day/Time"),
    "id": ("No", "Kode MK", "Nama Mata Kuliah", "SKS", "Dosen Pengampu", "Jadwal"),
}
TITLES = {"en": "STUDY PLAN CARD (KRS)", "id": "KARTU RENCANA STUDI (KRS)"}
UNIVERSITY = "UNIVERSITAS NUSANTARA RAYA"


# -- spec and items ------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusSpec:
    n_docs: int = 140
    programs: tuple[str, ...] = tuple(PROGRAMS)
    route_mix: tuple[float, float, float] = (0.93, 0.06, 0.01)
    multi_line_course: float = 0.3
    ligature_injection: float = 0.3
    duplicate_lecturer: float = 0.3
    advisor_row: float = 0.5
    long_name: float = 0.1
    course_count_range: tuple[int, int] = (1, 15)
    over_limit: float = 0.0
    seed: int = 0

    def check(self) -> None:
        if self.n_docs < 1:
            raise InvalidSpec("n_docs must be >= 1")
        if not self.programs:
            raise InvalidSpec("at least one program is required")
        if len(self.route_mix) != 3 or any(f < 0 for f in self.route_mix):
            raise InvalidSpec("route_mix needs three non-negative fractions")
        if abs(sum(self.route_mix) - 1.0) > 1e-9:
            raise InvalidSpec(f"route_mix sums to {sum(self.route_mix)}, not 1")
        for name in (*KNOBS, "over_limit"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidSpec(f"{name}={p} is not a probability")
        lo, hi = self.course_count_range
        if not 1 <= lo <= hi <= 15:
            raise InvalidSpec("course_count_range must lie within [1, 15]")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")

    def to_obj(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Layout:
    kind: LayoutKind = "ruled"
    language: Literal["en", "id"] = "en"
    ruling_style: Literal["lines", "cells"] = "lines"
    font_size: float = 9.0
    ligatures: bool = False
    advisor: str | None = None
    advisor_placement: Literal["caption", "row"] = "caption"
    col_widths: tuple[float, ...] = (30, 62, 160, 45, 140, 108)


@dataclass
class CorpusItem:
    doc_id: str
    pdf_bytes: bytes
    ground_truth: KrsRecord
    labels: dict = field(default_factory=dict)


def apportion(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder split of ``n``; ties go to the earlier class."""
    exact = [Fraction(f).limit_denominator(10 ** 9) * n for f in fractions]
    counts = [int(q) for q in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:n - sum(counts)]:
        counts[i] += 1
    return counts


# -- text metrics --------------------------------------------------------------------

def text_width(text: str, size: float, bold: bool = False) -> float:
    table = _afm.HELVETICA_BOLD if bold else _afm.HELVETICA
    total = 0
    for ch in text:
        code = ord(ch)
        if not 32 <= code <= 126:
            raise ValueError(f"character {ch!r} has no width in the standard table")
        total += table[code - _afm.FIRST_CODE]
    return total * size / 1000


def wrap(text: str, width: float, size: float, bold: bool = False) -> list[str]:
    """Greedy wrap at single spaces; a word wider than ``width`` overflows."""
    lines: list[str] = []
    width += 1e-6  # auto-fitted cells are exactly as wide as their text
    for word in text.split(" "):
        if text_width(word, size, bold) > width:
            raise LayoutOverflow(f"word {word!r} does not fit a {width:.0f} pt cell")
        if lines and text_width(f"{lines[-1]} {word}", size, bold) <= width:
            lines[-1] = f"{lines[-1]} {word}"
        else:
            lines.append(word)
    return lines


# -- PDF assembly ----------------------------------------------------------------------

def pdf_string(text: str, ligatures: bool = False) -> bytes:
    data = bytearray()
    i = 0
    while i < len(text):
        pair = text[i:i + 2]
        if ligatures and pair in LIG_CODES:
            data += b"\\%03o" % LIG_CODES[pair]
            i += 2
            continue
        ch = text[i]
        if ch in "()\\":
            data += b"\\" + ch.encode("ascii")
        else:
            data += ch.encode("ascii")
        i += 1
    return b"(" + bytes(data) + b")"


def _font_object(base: str) -> bytes:
    table = _afm.HELVETICA_BOLD if "Bold" in base else _afm.HELVETICA
    ligs = _afm.HELVETICA_BOLD_LIGATURES if "Bold" in base else _afm.HELVETICA_LIGATURES
    widths = [ligs["fi"], ligs["fl"], *table]
    return (f"<< /Type /Font /Subtype /Type1 /BaseFont /{base} "
            f"/Encoding << /Type /Encoding /BaseEncoding /WinAnsiEncoding /Differences [30 /fi /fl] >> "
            f"/FirstChar 30 /LastChar 126 /Widths [{' '.join(map(str, widths))}] >>").encode("ascii")


def assemble_pdf(content: bytes, resources: bytes | None = None, extra: Sequence[bytes] = (),
                 media_box: tuple[float, float] = (PAGE_W, PAGE_H)) -> bytes:
    """Single-page PDF: catalog 1, pages 2, page 3, fonts 4/5, content 6, then ``extra`` from 7."""
    if resources is None:
        resources = b"<< /Font << /F1 4 0 R /F2 5 0 R >> >>"
    w, h = media_box
    objects = [
        b"<< /Type /Catalog /Pages 2 0 R >>",
        b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>",
        b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 %g %g] /Resources %s /Contents 6 0 R >>"
        % (w, h, resources),
        _font_object("Helvetica"),
        _font_object("Helvetica-Bold"),
        b"<< /Length %d >>\nstream\n%s\nendstream" % (len(content) + 1, content),
        *extra,
    ]
    out = bytearray(b"%PDF-1.4\n%\xe2\xe3\xcf\xd3\n")
    offsets = []
    for num, body in enumerate(objects, start=1):
        offsets.append(len(out))
        out += b"%d 0 obj\n%s\nendobj\n" % (num, body)
    xref_at = len(out)
    out += b"xref\n0 %d\n0000000000 65535 f \n" % (len(objects) + 1)
    for off in offsets:
        out += b"%010d 00000 n \n" % off
    out += b"trailer\n<< /Size %d /Root 1 0 R >>\nstartxref\n%d\n%%%%EOF\n" % (len(objects) + 1, xref_at)
    return bytes(out)


class Canvas:
    def __init__(self, ligatures: bool = False):
        self.ops: list[bytes] = []
        self.ligatures = ligatures

    def text(self, x: float, y: float, text: str, size: float, bold: bool = False) -> None:
        font = b"F2" if bold else b"F1"
        self.ops.append(b"BT /%s %g Tf 1 0 0 1 %.2f %.2f Tm %s Tj ET"
                        % (font, size, x, y, pdf_string(text, self.ligatures)))

    def line(self, x0: float, y0: float, x1: float, y1: float, width: float = 0.6) -> None:
        self.ops.append(b"%g w %.2f %.2f m %.2f %.2f l S" % (width, x0, y0, x1, y1))

    def rect(self, x: float, y: float, w: float, h: float, width: float = 0.6) -> None:
        self.ops.append(b"%g w %.2f %.2f %.2f %.2f re S" % (width, x, y, w, h))

    def content(self) -> bytes:
        return b"\n".join(self.ops)


# -- page layout -------------------------------------------------------------------------

def _cells(row: CourseRow) -> list[str]:
    return [str(row.index), row.code, row.name, str(row.sks), row.lecturer, row.schedule]


def _fit_widths(table: list[list[str]], size: float, pad: float) -> list[float]:
    return [max(text_width(t, size, bold=(r == 0)) for r, t in ((r, row[c]) for r, row in enumerate(table)))
            + 2 * pad for c in range(len(table[0]))]


def write_pdf(layout: Layout, record: KrsRecord) -> bytes:
    """Draw header, metadata lines and the course table for one record."""
    if record.rows is None:
        raise ValueError("write_pdf needs a record with rows")
    fs = layout.font_size
    lh = 1.25 * fs
    labels = LABELS[layout.language]
    canvas = Canvas(layout.ligatures)

    y = PAGE_H - 45
    for text, size in ((UNIVERSITY, 13.0), (TITLES[layout.language], 11.0)):
        canvas.text((PAGE_W - text_width(text, size, True)) / 2, y, text, size, bold=True)
        y -= size + 6
    canvas.line(MARGIN, y + 2, PAGE_W - MARGIN, y + 2, 1.0)
    y -= 18

    meta_size = fs + 1
    colon_x = MARGIN + 100
    meta_lines = [(labels[k], v) for k, v in record.metadata.items()]
    if layout.advisor and layout.advisor_placement == "caption":
        meta_lines.append((labels["advisor"], layout.advisor))
    for label, value in meta_lines:
        canvas.text(MARGIN, y, label, meta_size)
        canvas.text(colon_x, y, ":", meta_size)
        canvas.text(colon_x + 8, y, value or "", meta_size)
        y -= meta_size + 5
    y -= 10

    table = [list(HEADERS[layout.language])] + [_cells(r) for r in record.rows]
    advisor_row = None
    if layout.advisor and layout.advisor_placement == "row":
        advisor_row = ["", "", labels["advisor"], "", layout.advisor, ""]
        table.append(advisor_row)

    if layout.kind == "pathological":
        pad = 1.5
        widths = _fit_widths(table, fs, pad)
        x_start = MARGIN + 7.0  # a second border hugs the first one
    else:
        pad = 5.0 if layout.kind == "borderless" else 4.0
        widths = list(layout.col_widths)
        x_start = MARGIN
    edges = [x_start]
    for w in widths:
        edges.append(edges[-1] + w)
    if edges[-1] > PAGE_W - MARGIN + 0.01:
        raise LayoutOverflow(f"table is {edges[-1] - x_start:.0f} pt wide")

    vpad = 3.0
    row_edges = [y]
    for r, cells in enumerate(table):
        bold = r == 0
        wrapped = [wrap(t, widths[c] - 2 * pad, fs, bold) if t else [] for c, t in enumerate(cells)]
        n_lines = max(1, max(len(w) for w in wrapped))
        top = row_edges[-1]
        for c, lines in enumerate(wrapped):
            base = top - vpad - 0.75 * fs
            for line in lines:
                canvas.text(edges[c] + pad, base, line, fs, bold)
                base -= lh
        row_edges.append(top - n_lines * lh - 2 * vpad)
    bottom = row_edges[-1]
    if bottom - 70 < MARGIN:
        raise LayoutOverflow(f"table bottom at {bottom:.0f} pt leaves no room for the footer")

    if layout.kind in ("ruled", "pathological"):
        left, right = edges[0], edges[-1]
        if layout.kind == "pathological":
            left = MARGIN
        if layout.ruling_style == "cells" and layout.kind == "ruled":
            for top, low in zip(row_edges, row_edges[1:]):
                for a, b in zip(edges, edges[1:]):
                    canvas.rect(a, low, b - a, top - low)
        else:
            for ry in row_edges:
                canvas.line(left, ry, right, ry)
            for ex in ([MARGIN, *edges] if layout.kind == "pathological" else edges):
                canvas.line(ex, row_edges[0], ex, bottom)

    y = bottom - 45
    total = sum(r.sks for r in record.rows)
    canvas.text(MARGIN, y, f"Total SKS : {total}", fs)
    sign = "Mahasiswa," if layout.language == "id" else "Student,"
    canvas.text(PAGE_W - MARGIN - 150, y, sign, fs)
    canvas.text(PAGE_W - MARGIN - 150, y - 40, record.metadata.student_name or "", fs)
    return assemble_pdf(canvas.content())


# -- record synthesis ------------------------------------------------------------------

def _person(rng: random.Random, parts: int = 2) -> str:
    names = [rng.choice(FIRST_NAMES)] + [rng.choice(LAST_NAMES) for _ in range(parts - 1)]
    return " ".join(names)


def _lecturer(rng: random.Random) -> str:
    return f"{rng.choice(PREFIXES)}{_person(rng, rng.choice((1, 2, 2)))}, {rng.choice(SUFFIXES)}"


def _long_name(rng: random.Random) -> str:
    name = _person(rng, 2)
    while len(name) < 28:
        name += " " + rng.choice(LAST_NAMES)
    return name


def _schedule(rng: random.Random, language: str) -> str:
    day = rng.choice(DAYS[language])
    return (f"{rng.randint(1, 3)}.{rng.randint(10, 29)}.FT, "
            f"{day} {rng.choice((7, 8, 9, 10, 13, 14, 15))}:{rng.choice(('00', '20', '30', '50'))}:00")


def make_record(rng: random.Random, program: str, serial: int, n_courses: int, language: str,
                knobs: dict[str, bool]) -> KrsRecord:
    display, prefix = PROGRAMS.get(program, (program, "MK"))
    pool = list(COURSES.get(prefix, COURSES["IF"]))
    names = rng.sample(pool, min(n_courses, len(pool)))
    while len(names) < n_courses:
        names.append(f"{rng.choice(pool)} {len(names)}")
    if knobs["multi_line_course"]:
        names[rng.randrange(n_courses)] = rng.choice(LONG_COURSES.get(prefix, LONG_COURSES["IF"]))

    lecturers: list[str] = []
    while len(lecturers) < n_courses:
        cand = _lecturer(rng)
        if cand not in lecturers:
            lecturers.append(cand)
    if knobs["duplicate_lecturer"] and n_courses >= 2:
        a, b = rng.sample(range(n_courses), 2)
        lecturers[b] = lecturers[a]

    codes = rng.sample(range(101, 499), n_courses)
    rows = tuple(
        CourseRow(index=i + 1, code=f"{prefix}{codes[i]:04d}" if i % 3 == 0 else f"{prefix}{codes[i]}",
                  name=names[i], sks=rng.choice((1, 2, 2, 3, 3, 3, 4)), lecturer=lecturers[i],
                  schedule=_schedule(rng, language))
        for i in range(n_courses)
    )
    year = rng.randint(2019, 2023)
    student = _long_name(rng) if knobs["long_name"] else _person(rng, rng.choice((2, 2, 3)))
    meta = Metadata(
        student_name=student,
        student_id=f"{year}{list(PROGRAMS).index(program) + 1 if program in PROGRAMS else 9:02d}{serial:05d}",
        study_program=display,
        semester=str(rng.randint(1, 8)),
        academic_year=f"{year + 1}/{year + 2}",
    )
    return KrsRecord.from_rows(meta, rows)


def _knob_draws(rng: random.Random, spec: CorpusSpec) -> dict[str, bool]:
    return {name: rng.random() < getattr(spec, name) for name in KNOBS}


def make_item(spec: CorpusSpec, index: int, program: str, kind: LayoutKind) -> CorpusItem:
    rng = random.Random(f"krsx/{spec.seed}/{index}")
    knobs = _knob_draws(rng, spec)
    over_limit = rng.random() < spec.over_limit
    language = rng.choice(("en", "id"))
    if kind == "pathological":
        n_courses = rng.randint(1, 2)
        knobs["multi_line_course"] = knobs["advisor_row"] = False
    elif over_limit:
        n_courses = 16
    else:
        n_courses = rng.randint(*spec.course_count_range)
    if n_courses < 2:
        knobs["duplicate_lecturer"] = False
    if not spec.ligature_injection:
        knobs["ligature_injection"] = False
    record = make_record(rng, program, index, n_courses, language, knobs)
    knobs["ligature_injection"] = knobs["ligature_injection"] and any(
        "fi" in t or "fl" in t for t in (*record.courses, *record.lecturers, *(v for _, v in record.metadata.items())))

    jitter = rng.uniform(-10, 10)
    layout = Layout(
        kind=kind,
        language=language,
        ruling_style=rng.choice(("lines", "cells")),
        ligatures=knobs["ligature_injection"],
        advisor=_lecturer(rng) if knobs["advisor_row"] else None,
        advisor_placement=rng.choice(("caption", "row")),
        col_widths=(30, 62, 160 + jitter, 45, 140 - jitter, 108),
    )
    try:
        pdf = write_pdf(layout, record)
    except LayoutOverflow:
        layout = replace(layout, font_size=layout.font_size - 1.5)
        pdf = write_pdf(layout, record)

    labels = {
        "program": program,
        "layout": kind,
        "intended_route": ROUTE_OF[kind],
        "language": language,
        "ruling_style": layout.ruling_style if kind == "ruled" else None,
        "advisor_placement": layout.advisor_placement if layout.advisor else None,
        "font_size": layout.font_size,
        "n_courses": n_courses,
        "over_limit": over_limit,
        "knobs": knobs,
    }
    if not over_limit and validate_record(record, ValidationPolicy()):
        raise AssertionError(f"generated an invalid record for item {index}")
    return CorpusItem(f"krs-{index:04d}", pdf, record, labels)


def generate_corpus(spec: CorpusSpec) -> list[CorpusItem]:
    """Deterministic corpus; programs round-robin, layouts apportioned then shuffled."""
    spec.check()
    counts = apportion(spec.n_docs, spec.route_mix)
    kinds: list[LayoutKind] = ["ruled"] * counts[0] + ["borderless"] * counts[1] + ["pathological"] * counts[2]
    random.Random(f"krsx/{spec.seed}/layouts").shuffle(kinds)
    return [make_item(spec, i, spec.programs[i % len(spec.programs)], kinds[i]) for i in range(spec.n_docs)]


def manifest(spec: CorpusSpec, items: Sequence[CorpusItem]) -> dict:
    return {"spec": spec.to_obj(), "items": [{"doc_id": it.doc_id, **it.labels} for it in items]}


def write_corpus(spec: CorpusSpec, items: Sequence[CorpusItem], out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for it in items:
        (out / f"{it.doc_id}.pdf").write_bytes(it.pdf_bytes)
        (out / f"{it.doc_id}.gt.json").write_bytes(serialize_record(it.ground_truth))
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest(spec, items), indent=2) + "\n", encoding="utf-8")
    return path

import pytest

from krsx.core import CourseRow, KrsRecord, Metadata
from krsx.corpusgen import Layout, text_width, write_pdf
from krsx.errors import EncryptedPdf, NoTextContent, NotAPdf, RegionNotFound, UnsupportedFeature
from krsx.ingest import group_lines, load_page, plain_text, table_region
from krsx.pdfsyntax import Lexer, Name, Ref, Stream, decode_stream

from . import pdfkit

RECORD = KrsRecord.from_rows(
    Metadata("Diana Putri", "20210100001", "Informatika", "3", "2022/2023"),
    (CourseRow(1, "FTS242", "Calculus I", 3, "Diana, S.T.,M.T.", "2.24.FT, Mon 13:00:00"),
     CourseRow(2, "FTM344", "Artificial Intelligence", 2, "Rafli Hakim, S.T.,M.T.", "1.11.FT, Tue 13:01:00")),
)


def span(page, text):
    hits = [s for s in page.spans if s.text == text]
    assert hits, f"{text!r} not among {[s.text for s in page.spans]}"
    return hits[0]


def test_text_position_and_width():
    page = load_page(pdfkit.simple_page(b"BT /F1 12 Tf 1 0 0 1 72 100 Tm (Hello World) Tj ET"))
    s = span(page, "Hello World")
    assert s.x0 == pytest.approx(72)
    assert s.x1 == pytest.approx(72 + text_width("Hello World", 12), abs=1e-6)
    assert s.y0 == pytest.approx(100 - 0.207 * 12)
    assert s.font_size == pytest.approx(12)


def test_tj_kerning_splits_words_only_when_wide():
    page = load_page(pdfkit.simple_page(
        b"BT /F1 10 Tf 10 150 Td [(Da) -20 (ta)] TJ 0 -20 Td [(Day) -400 (Time)] TJ ET"))
    texts = [s.text for s in page.spans]
    assert "Data" in texts
    assert "Day Time" in texts


def test_td_and_tstar_lines():
    page = load_page(pdfkit.simple_page(b"BT /F1 10 Tf 14 TL 20 150 Td (one) Tj T* (two) Tj ET"))
    assert span(page, "one").y0 - span(page, "two").y0 == pytest.approx(14)


def test_cm_scales_text():
    page = load_page(pdfkit.simple_page(b"q 2 0 0 2 0 0 cm BT /F1 5 Tf 10 20 Td (big) Tj ET Q"))
    s = span(page, "big")
    assert s.font_size == pytest.approx(10)
    assert s.x0 == pytest.approx(20)


def test_rulings_from_lines_and_rectangles():
    page = load_page(pdfkit.simple_page(
        b"BT /F1 9 Tf 1 0 0 1 20 20 Tm (x) Tj ET 0.5 w 10 180 m 290 180 l S 10 100 100 50 re S 5 5 m 8 5 l S"))
    h = sorted((r.position, r.start, r.end) for r in page.rulings if r.orientation == "horizontal")
    v = sorted((r.position, r.start, r.end) for r in page.rulings if r.orientation == "vertical")
    assert h == [(100, 10, 110), (150, 10, 110), (180, 10, 290)]
    assert v == [(10, 100, 150), (110, 100, 150)]


def test_compressed_content_stream():
    page = load_page(pdfkit.simple_page(b"BT /F1 9 Tf 30 30 Td (packed) Tj ET", compress=True))
    assert span(page, "packed")


def test_xref_stream_and_object_stream():
    page = load_page(pdfkit.xref_stream_page(b"BT /F1 9 Tf 30 30 Td (modern xref) Tj ET"))
    assert span(page, "modern xref")


def test_escapes_and_octal_in_strings():
    page = load_page(pdfkit.simple_page(rb"BT /F1 9 Tf 30 30 Td (a\(b\)c \101) Tj ET"))
    assert span(page, "a(b)c A")


def test_generated_ligatures_decode_to_ligature_glyphs():
    pdf = write_pdf(Layout(ligatures=True), RECORD)
    page = load_page(pdf)
    joined = " ".join(s.text for s in page.spans)
    assert "Artiﬁcial" in joined
    assert "Raﬂi" in joined
    assert "Artificial Intelligence" in plain_text(page)


def test_generated_page_geometry_survives():
    page = load_page(write_pdf(Layout(), RECORD))
    assert (page.width, page.height) == (595, 842)
    region = table_region(page)
    assert region.contains(span(page, "Calculus I"))
    assert not region.contains(span(page, "Diana Putri"))


def test_borderless_region_from_labels():
    page = load_page(write_pdf(Layout(kind="borderless"), RECORD))
    region = table_region(page, ["Student Name", "Student ID", "Study Program", "Semester", "Academic Year"])
    inside = {s.text for s in page.spans if region.contains(s)}
    assert {"No", "Calculus I", "2.24.FT, Mon 13:00:00"} <= inside
    assert "Diana Putri" not in inside
    assert not any(t.startswith("Total SKS") for t in inside)


def test_region_not_found_without_grid_or_labels():
    page = load_page(pdfkit.simple_page(b"BT /F1 9 Tf 30 30 Td (just text) Tj ET"))
    with pytest.raises(RegionNotFound):
        table_region(page)


def test_group_lines_orders_top_down_left_right():
    page = load_page(pdfkit.simple_page(
        b"BT /F1 9 Tf 1 0 0 1 100 50 Tm (b) Tj 1 0 0 1 20 50 Tm (a) Tj 1 0 0 1 20 80 Tm (top) Tj ET"))
    assert [[s.text for s in line] for line in group_lines(page.spans)] == [["top"], ["a", "b"]]


def test_not_a_pdf():
    with pytest.raises(NotAPdf):
        load_page(b"hello, world")
    with pytest.raises(NotAPdf):
        load_page(pdfkit.simple_page(b"BT ET")[:60])


def test_encrypted():
    with pytest.raises(EncryptedPdf):
        load_page(pdfkit.simple_page(b"BT /F1 9 Tf (x) Tj ET", trailer_extra=b"/Encrypt << /Filter /Standard >> "))


def test_image_only_page_has_no_text():
    with pytest.raises(NoTextContent):
        load_page(pdfkit.image_only_page())


def test_composite_fonts_unsupported():
    font = b"<< /Type /Font /Subtype /Type0 /BaseFont /Foo /Encoding /Identity-H >>"
    with pytest.raises(UnsupportedFeature):
        load_page(pdfkit.simple_page(b"BT /F1 9 Tf 30 30 Td <0001> Tj ET", font=font))


def test_tounicode_overrides_encoding():
    cmap = b"begincmap 1 beginbfchar <41> <0042> endbfchar endcmap"
    font = b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /ToUnicode 6 0 R >>"
    pdf = pdfkit.classic([pdfkit.CATALOG, pdfkit.PAGES, pdfkit.PAGE, font,
                          pdfkit.stream(b"BT /F1 9 Tf 30 30 Td (A) Tj ET"), pdfkit.stream(cmap)])
    assert span(load_page(pdf), "B")


def test_differences_map_glyph_names():
    font = b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding << /Differences [65 /eacute] >> >>"
    assert span(load_page(pdfkit.simple_page(b"BT /F1 9 Tf 30 30 Td (A) Tj ET", font=font)), "é")


def test_lexer_objects():
    lex = Lexer(b"<< /A 1 /B [2 0 R (s) <6869>] /N#20x true >>")
    obj = lex.next_object()
    assert obj["A"] == 1
    assert obj["B"] == [Ref(2, 0), b"s", b"hi"]
    assert obj[Name("N x")] is True


@pytest.mark.parametrize("filt, raw", [
    (Name("ASCIIHexDecode"), b"48 65 6c6c 6f>"),
    (Name("ASCII85Decode"), b"87cURDZ~>"),
])
def test_ascii_filters(filt, raw):
    assert decode_stream(Stream({"Filter": filt}, raw)) == b"Hello"


def test_unknown_filter():
    with pytest.raises(UnsupportedFeature):
        decode_stream(Stream({"Filter": Name("JBIG2Decode")}, b""))


def test_reportlab_output_cross_check():
    canvas_mod = pytest.importorskip("reportlab.pdfgen.canvas")
    from reportlab.pdfbase.pdfmetrics import stringWidth
    import io

    buf = io.BytesIO()
    c = canvas_mod.Canvas(buf, pagesize=(400, 300))
    c.setFont("Helvetica", 11)
    c.drawString(40, 200, "Course Name")
    c.setFont("Helvetica-Bold", 9)
    c.drawString(150, 120, "Lecturer")
    c.line(30, 100, 370, 100)
    c.rect(30, 50, 200, 40)
    c.showPage()
    c.save()
    page = load_page(buf.getvalue())
    a, b = span(page, "Course Name"), span(page, "Lecturer")
    assert a.x1 - a.x0 == pytest.approx(stringWidth("Course Name", "Helvetica", 11), abs=0.01)
    assert b.x1 - b.x0 == pytest.approx(stringWidth("Lecturer", "Helvetica-Bold", 9), abs=0.01)
    assert (a.x0, b.x0) == (pytest.approx(40), pytest.approx(150))
    horizontal = sorted(r.position for r in page.rulings if r.orientation == "horizontal")
    assert horizontal == pytest.approx([50, 90, 100])

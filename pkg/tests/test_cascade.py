import pytest

from krsx.cascade import PipelineConfig, extract_corpus, extract_document, summarize
from krsx.core import KrsRecord, Metadata, record_to_dict
from krsx.corpusgen import CorpusSpec, Layout, make_item, write_pdf
from krsx.errors import IngestFailed
from krsx.llm import LlmClient, LlmConfig
from krsx.stub import Reply, StubRuntime, StubScript, script_from_records

SPEC = CorpusSpec(seed=3)


def item(kind, index=5):
    return make_item(SPEC, index, "Informatika", kind)


@pytest.fixture(scope="module")
def items():
    return {kind: item(kind) for kind in ("ruled", "borderless", "pathological")}


@pytest.fixture(scope="module")
def stub(items):
    script = script_from_records([(it.ground_truth.metadata.student_id, record_to_dict(it.ground_truth))
                                  for it in items.values()])
    with StubRuntime(script) as runtime:
        yield runtime


@pytest.fixture
def client(stub):
    with LlmClient(LlmConfig(endpoint_url=stub.url)) as c:
        yield c


@pytest.mark.parametrize("kind,route", [("ruled", "lattice"), ("borderless", "stream"), ("pathological", "llm")])
def test_cascade_routes(items, client, kind, route):
    it = items[kind]
    outcome = extract_document(it.pdf_bytes, PipelineConfig(), client, it.doc_id)
    assert outcome.table_route == route
    assert outcome.metadata_route == "regex"
    assert outcome.record.without_rows() == it.ground_truth.without_rows()
    assert outcome.error is None


def test_attempt_trail_for_fallback(items, client):
    outcome = extract_document(items["pathological"].pdf_bytes, PipelineConfig(), client)
    stages = [(a.stage, a.ok) for a in outcome.attempts]
    assert stages == [("ingest", True), ("regex", True), ("lattice", False), ("stream", False), ("llm", True)]
    assert set(outcome.stage_timings) == {"ingest", "regex", "lattice", "stream", "llm"}
    assert outcome.seconds == pytest.approx(sum(outcome.stage_timings.values()))


def test_ruled_doc_never_reaches_the_model(items, stub, client):
    before = len(stub.requests)
    extract_document(items["ruled"].pdf_bytes, PipelineConfig(), client)
    assert len(stub.requests) == before


def test_cascade_without_client_leaves_tables_empty(items):
    outcome = extract_document(items["pathological"].pdf_bytes, PipelineConfig())
    assert outcome.table_route is None
    assert outcome.record.courses == ()
    assert outcome.record.metadata == items["pathological"].ground_truth.metadata
    assert "llm disabled" in outcome.attempts[-1].reason


@pytest.mark.parametrize("kind", ["ruled", "borderless"])
def test_hybrid_sends_tables_to_the_model(items, client, kind):
    outcome = extract_document(items[kind].pdf_bytes, PipelineConfig(mode="hybrid"), client)
    assert outcome.table_route == "llm"
    assert outcome.metadata_route == "regex"
    assert [a.stage for a in outcome.attempts] == ["ingest", "regex", "llm"]
    assert outcome.record.without_rows() == items[kind].ground_truth.without_rows()


def test_llm_only_asks_for_everything(items, stub, client):
    outcome = extract_document(items["ruled"].pdf_bytes, PipelineConfig(mode="llm_only"), client)
    assert (outcome.metadata_route, outcome.table_route) == ("llm", "llm")
    assert '"metadata"' in stub.requests[-1]["prompt"]
    assert outcome.record.without_rows() == items["ruled"].ground_truth.without_rows()


def test_missing_metadata_falls_back_to_model():
    rec = item("ruled").ground_truth
    gappy = KrsRecord(Metadata(**{**dict(rec.metadata.items()), "semester": None}), rec.courses,
                      rec.lecturers, rec.rows)
    pdf = write_pdf(Layout(), gappy)
    script = StubScript(default=Reply(
        '{"metadata": {"semester": "Ganjil", "student_name": "Somebody Else"}, "courses": [], "lecturers": []}'))
    with StubRuntime(script) as runtime, LlmClient(LlmConfig(endpoint_url=runtime.url)) as c:
        outcome = extract_document(pdf, PipelineConfig(), c)
    assert outcome.metadata_route == "llm"
    assert outcome.record.metadata.semester == "Ganjil"
    assert outcome.record.metadata.student_name == rec.metadata.student_name
    assert outcome.table_route == "lattice"


def test_model_errors_are_recorded_not_raised(items):
    script = StubScript(default=Reply("down", status=503))
    with StubRuntime(script) as runtime, LlmClient(LlmConfig(endpoint_url=runtime.url)) as c:
        outcome = extract_document(items["pathological"].pdf_bytes, PipelineConfig(), c)
    assert outcome.record.courses == ()
    assert outcome.attempts[-1].reason.startswith("RuntimeFailure")


def test_unreadable_pdf_raises():
    with pytest.raises(IngestFailed):
        extract_document(b"not a pdf")


def test_corpus_run_keeps_order_and_survives_bad_files(tmp_path, items):
    paths = []
    for name, data in [("a", items["ruled"].pdf_bytes), ("b", b"garbage"), ("c", items["borderless"].pdf_bytes)]:
        p = tmp_path / f"{name}.pdf"
        p.write_bytes(data)
        paths.append(p)
    for workers in (1, 3):
        outcomes, summary = extract_corpus(paths, PipelineConfig(), workers)
        assert [o.doc_id for o in outcomes] == ["a", "b", "c"]
        assert outcomes[1].error.startswith("IngestFailed")
        assert [o.table_route for o in outcomes] == ["lattice", None, "stream"]
        assert summary["n"] == 3
        assert summary["routes"]["lattice"]["n"] == 1


def test_summarize_empty():
    assert summarize([]) == {"n": 0, "mean_s": 0.0, "median_s": 0.0, "routes": {}}


def test_invalid_mode():
    with pytest.raises(ValueError):
        PipelineConfig(mode="fast")

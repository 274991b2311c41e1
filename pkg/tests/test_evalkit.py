import csv
import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from krsx.core import Attempt, ExtractionOutcome, KrsRecord, Metadata
from krsx.errors import MissingLabel
from krsx.evalkit import (EvalConfig, ScoreCard, aggregate, score_document, score_field, score_lists, score_table,
                          throughput_report, throughput_table, to_csv, to_text)

LECTURERS = ("Rindi Wulandari, S.ST., M.Si.", "Taryo, ST., MT.", "Juju Juhaeriyah, S.ST., M.T.",
             "Diana, S.T.,M.T.", "Harold Doe, S.T.,M.T.")
GT = KrsRecord(Metadata("Alice Putri", "2021010001", "Informatika", "Ganjil", "2023/2024"),
               ("Calculus I", "Database", "Web Programming II", "Physics", "Statistics"), LECTURERS)


def test_paper_lecturer_example():
    em, ls = score_field("Juju Juhaeriyah, S.ST., M.T.", "Juju Juhaeriya, S.ST., M.T.")
    assert em == 0
    assert ls == pytest.approx(0.9474, abs=1e-4)


def test_trailing_punctuation_is_tolerated():
    assert score_field("Taryo, S.T., M.T.", "Taryo, S.T., M.T..") == (1, 1.0)


def test_below_threshold_is_zeroed():
    assert score_field("abcdefghij", "zzzzzzzzzz") == (0, 0.0)


def test_threshold_is_inclusive():
    assert score_field("mochamadnabielhaaritsfadillahh", "mochamadnabielhaarits") == (0, pytest.approx(0.7))
    assert score_field("mochamadnabielhaaritsfadillahh", "mochamadnabielhaarits",
                       EvalConfig(ls_threshold=0.71)) == (0, 0.0)


def test_both_empty_is_a_match():
    assert score_field("", "") == (1, 1.0)
    assert score_field(None, "  ..") == (1, 1.0)


def test_list_examples():
    assert score_lists(["A", "B"], ["A", "B"])[:2] == (1.0, 1.0)
    em, ls, details = score_lists(["A", "B", "C"], ["A", "B"])
    assert em == pytest.approx(2 / 3)
    assert [d.path for d in details] == ["[0]", "[1]", "[2]"]
    assert score_lists([], [])[:2] == (1.0, 1.0)


def test_lists_are_cut_at_max_slots():
    gt = [f"course {i}" for i in range(20)]
    pred = gt[:15] + ["wrong"] * 5
    assert score_lists(gt, pred)[:2] == (1.0, 1.0)
    assert score_lists(gt, pred, EvalConfig(max_slots=16))[0] == pytest.approx(15 / 16)


def test_both_empty_slots_are_skipped():
    assert score_lists(["A", "", "C"], ["A", "", "X"])[0] == 0.5


def test_identical_documents_score_one():
    card = score_document(GT, GT)
    assert card.em == card.ls == {"metadata": 1.0, "courses": 1.0, "lecturers": 1.0}


def test_empty_prediction_scores_zero():
    card = score_document(GT, KrsRecord())
    assert card.em == card.ls == {"metadata": 0.0, "courses": 0.0, "lecturers": 0.0}


def test_one_letter_in_one_of_five_lecturers():
    pred = KrsRecord(GT.metadata, GT.courses, LECTURERS[:2] + ("Juju Juhaeriya, S.ST., M.T.",) + LECTURERS[3:])
    card = score_document(GT, pred)
    assert card.em["lecturers"] == pytest.approx(0.8)
    # frozen from the brute-force reference scorer: (4 + 18/19) / 5
    assert card.ls["lecturers"] == pytest.approx(0.9894736842105264, abs=1e-12)
    assert card.em["courses"] == 1.0


def test_missing_metadata_field_counts_against():
    pred = KrsRecord(Metadata("Alice Putri", "2021010001", "Informatika", None, "2023/2024"), GT.courses, LECTURERS)
    assert score_document(GT, pred).em["metadata"] == pytest.approx(0.8)


def test_detail_paths():
    paths = [d.path for d in score_document(GT, GT).details]
    assert paths[:5] == [f"metadata.{n}" for n in ("student_name", "student_id", "study_program", "semester",
                                                     "academic_year")]
    assert "lecturers[4]" in paths


text = st.text(st.sampled_from("abcABC .,-fiﬁé"), max_size=12)


@given(text, text)
def test_field_invariants(a, b):
    em, ls = score_field(a, b)
    assert em <= ls <= 1.0
    if em:
        assert ls == 1.0
    assert score_field(b, a) == (em, ls)


def card(doc_id, em, labels):
    scores = {"metadata": em, "courses": em, "lecturers": em}
    return ScoreCard(doc_id, dict(scores), dict(scores), labels=labels)


def test_aggregate_groups():
    cards = [card("a", 1.0, {"program": "PWK"}), card("b", 0.5, {"program": "IF"}),
             card("c", 0.0, {"program": "IF"})]
    rows = aggregate(cards, ["program"])
    assert [(r.group, r.n, r.em["courses"]) for r in rows] == [(("IF",), 2, 0.25), (("PWK",), 1, 1.0)]


def test_aggregate_counts_per_program():
    cards = [card(str(i), 1.0, {"program": p}) for p in ("A", "B", "C", "D") for i in range(35)]
    rows = aggregate(cards, ["program"])
    assert [r.n for r in rows] == [35] * 4
    assert all(r.em["metadata"] == 1.0 for r in rows)


def test_aggregate_missing_label():
    with pytest.raises(MissingLabel):
        aggregate([card("x", 1.0, {})], ["program"])


@given(st.floats(0, 1), st.integers(1, 10))
def test_aggregate_of_identical_cards(score, n):
    rows = aggregate([card(str(i), score, {"g": "x"}) for i in range(n)], ["g"])
    assert rows[0].em["courses"] == pytest.approx(score)


def outcome(route, seconds, error=None):
    return ExtractionOutcome(KrsRecord(), "regex", route, {"ingest": seconds}, (Attempt("ingest", True),),
                             error=error)


def test_throughput_arithmetic():
    rows = throughput_report([outcome("lattice", 2.0) for _ in range(10)])
    assert rows[0].mean_s == 2.0 and rows[0].per_min == 30.0 and rows[0].n == 10


def test_throughput_separates_first_sample():
    rows = throughput_report([outcome("llm", 10.0), outcome("llm", 2.0), outcome("llm", 4.0)])
    assert rows[0].mean_s == 3.0
    assert rows[0].mean_with_first_s == pytest.approx(16 / 3)


def test_throughput_counts_and_errors():
    outs = ([outcome("lattice", 0.1)] * 799 + [outcome("stream", 0.1)] * 52 + [outcome("llm", 1)] * 9
            + [outcome(None, 0.0, error="IngestFailed")])
    assert [(r.route, r.n) for r in throughput_report(outs)] == [("lattice", 799), ("llm", 9), ("stream", 52)]


def test_renderers():
    header, body = score_table(aggregate([card("a", 1.0, {"program": "IF"})], ["program"]), ["program"])
    assert header[:4] == ["Program", "EM Metadata", "EM Courses", "EM Lecturers"]
    assert list(csv.reader(io.StringIO(to_csv(header, body))))[1][:2] == ["IF", "1.000"]
    lines = to_text(header, body).splitlines()
    assert len(lines) == 3 and set(lines[1]) <= {"-", " "}
    theader, tbody = throughput_table(throughput_report([outcome("lattice", 2.0)]))
    assert theader[1] == "Throughput (sec/PDF)"
    assert tbody == [["lattice", "2.0000", "30.00", "1", "2.0000"]]


def test_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(ls_threshold=1.5)
    with pytest.raises(ValueError):
        EvalConfig(max_slots=0)

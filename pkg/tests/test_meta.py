import pytest
from hypothesis import given
from hypothesis import strategies as st

from krsx.errors import ConfigError
from krsx.meta import DEFAULT_LABELS, MetaPatternSet, extract_metadata

PAGE = """UNIVERSITAS NUSANTARA RAYA
KARTU RENCANA STUDI (KRS)
Nama Mahasiswa : Mochamad Nabiel Haarits Fadillah
NIM : 20210100001
Program Studi : Teknik Elektro
Semester : 5
Tahun Akademik : 2023/2024
Dosen Wali : Taryo, ST., MT.
No Kode MK Nama Mata Kuliah"""


def test_indonesian_labels():
    meta, status = extract_metadata(PAGE)
    assert meta.student_name == "Mochamad Nabiel Haarits Fadillah"
    assert meta.student_id == "20210100001"
    assert meta.study_program == "Teknik Elektro"
    assert (meta.semester, meta.academic_year) == ("5", "2023/2024")
    assert set(status.values()) == {"found"}


def test_english_labels_and_spacing():
    text = "Student Name:Ana\n  Student ID   :   42\nStudy Program : PWK\nSemester : 1\nAcademic Year : 2020/2021"
    meta, status = extract_metadata(text)
    assert (meta.student_name, meta.student_id) == ("Ana", "42")
    assert all(v == "found" for v in status.values())


def test_missing_field():
    meta, status = extract_metadata("NIM : 1\n")
    assert status["student_name"] == "missing"
    assert meta.student_name is None


def test_conflicting_values_are_ambiguous():
    meta, status = extract_metadata("NIM : 1\nStudent ID : 2\n")
    assert status["student_id"] == "ambiguous"
    assert meta.student_id is None


def test_repeated_identical_value_is_found():
    _, status = extract_metadata("NIM : 1\nNIM : 1\n")
    assert status["student_id"] == "found"


def test_label_must_start_the_line():
    # the advisor caption mentions no field label, and a label mid-line is not a label
    _, status = extract_metadata("Keterangan Semester : 3\n")
    assert status["semester"] == "missing"


def test_short_label_does_not_swallow_longer_one():
    meta, _ = extract_metadata("Nama Mahasiswa : Budi\n")
    assert meta.student_name == "Budi"


def test_empty_value_is_missing():
    _, status = extract_metadata("Semester :\n")
    assert status["semester"] == "missing"


def test_extra_labels_from_config():
    patterns = MetaPatternSet.from_mapping({"semester": ["Periode"]})
    meta, _ = extract_metadata("Periode : Ganjil\n", patterns)
    assert meta.semester == "Ganjil"
    assert "Semester" in patterns.labels["semester"]


def test_replacing_labels_requires_every_field():
    with pytest.raises(ConfigError):
        MetaPatternSet.from_mapping({"semester": ["Periode"]}, extend=False)


def test_unknown_field_rejected():
    with pytest.raises(ConfigError):
        MetaPatternSet.from_mapping({"advisor": ["Dosen Wali"]})


value = st.text(st.sampled_from("abcdefghij ABCDEF0123456789/.,-"), min_size=1, max_size=30).map(str.strip).filter(bool)


@given(st.fixed_dictionaries({k: value for k in DEFAULT_LABELS}), st.sampled_from([0, 1]))
def test_round_trip_of_labelled_lines(values, which):
    lines = [f"{DEFAULT_LABELS[k][min(which, len(DEFAULT_LABELS[k]) - 1)]} : {v}" for k, v in values.items()]
    meta, status = extract_metadata("\n".join(lines))
    assert dict(meta.items()) == values
    assert set(status.values()) == {"found"}

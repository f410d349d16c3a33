import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecgsvm.ingest import (
    AnnotatedRecord,
    Annotation,
    RecordFormatError,
    RhythmLabel,
    extract_labeled_runs,
    label_array,
    load_record,
    load_records,
    write_record,
)


def _write(tmp_path, name, body, ann):
    p = tmp_path / f"{name}.txt"
    p.write_text(body, encoding="utf-8")
    (tmp_path / f"{name}.ann").write_text(ann, encoding="utf-8")
    return p


def _body(fs, n, rid="r1"):
    return f"#fs={fs}\n#id={rid}\n" + "\n".join(str(0.001 * i) for i in range(n)) + "\n"


def test_load_vf_record(tmp_path):
    p = _write(tmp_path, "r1", _body(250, 2500), "0 2500 VF\n")
    rec = load_record(p)
    assert rec.fs == 250
    assert rec.record_id == "r1"
    assert rec.samples.size == 2500
    assert rec.duration_s == 10.0
    assert rec.annotations == (Annotation(0, 2500, RhythmLabel.VF),)


def test_annotation_out_of_range(tmp_path):
    p = _write(tmp_path, "r1", _body(250, 2500), "0 3000 VF\n")
    with pytest.raises(RecordFormatError) as exc:
        load_record(p)
    assert exc.value.line == 1
    assert "out of range" in str(exc.value)


def test_unknown_label(tmp_path):
    p = _write(tmp_path, "r1", _body(250, 100), "0 50 SR\n50 100 AF\n")
    with pytest.raises(RecordFormatError) as exc:
        load_record(p)
    assert exc.value.line == 2
    assert "AF" in str(exc.value)


def test_non_numeric_sample_reports_line(tmp_path):
    body = "#fs=100\n#id=x\n0.1\n0.2\nabc\n0.3\n"
    p = _write(tmp_path, "x", body, "")
    with pytest.raises(RecordFormatError) as exc:
        load_record(p)
    assert exc.value.line == 5


@pytest.mark.parametrize(
    "body, line",
    [
        ("fs=250\n#id=a\n1.0\n", 1),
        ("#fs=abc\n#id=a\n1.0\n", 1),
        ("#fs=200\n#id=a\n1.0\n", 1),
        ("#fs=250\nid=a\n1.0\n", 2),
    ],
)
def test_malformed_header(tmp_path, body, line):
    p = _write(tmp_path, "a", body, "")
    with pytest.raises(RecordFormatError) as exc:
        load_record(p)
    assert exc.value.line == line


def test_overlapping_annotations_rejected(tmp_path):
    p = _write(tmp_path, "a", _body(100, 100), "0 60 SR\n50 100 VT\n")
    with pytest.raises(RecordFormatError):
        load_record(p)


def test_missing_sidecar(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text(_body(100, 10), encoding="utf-8")
    with pytest.raises(FileNotFoundError):
        load_record(p)


def test_empty_sidecar_gives_no_annotations(tmp_path):
    rec = load_record(_write(tmp_path, "a", _body(100, 10), ""))
    assert rec.annotations == ()
    assert extract_labeled_runs(rec) == []


def test_runs_two_annotations():
    rec = AnnotatedRecord("r", 100, np.arange(300.0), ((0, 100, "SR"), (150, 290, "VT")))
    runs = extract_labeled_runs(rec)
    assert [len(r) for r, _ in runs] == [100, 140]
    assert [lab for _, lab in runs] == [RhythmLabel.SR, RhythmLabel.VT]
    np.testing.assert_array_equal(runs[1][0], np.arange(150.0, 290.0))


def test_runs_full_vt_record():
    rec = AnnotatedRecord("r", 250, np.zeros(2500), ((0, 2500, "VT"),))
    (run, lab), = extract_labeled_runs(rec)
    assert run.size == 2500 and lab is RhythmLabel.VT


def test_record_invariants():
    with pytest.raises(ValueError):
        AnnotatedRecord("r", 100, np.array([]))
    with pytest.raises(ValueError):
        AnnotatedRecord("r", 0, np.zeros(3))
    with pytest.raises(ValueError):
        AnnotatedRecord("r", 100, np.zeros(10), ((5, 8, "SR"), (2, 4, "VT")))
    rec = AnnotatedRecord("r", 100, np.zeros(3))
    with pytest.raises(ValueError):
        rec.samples[0] = 1.0


def test_load_records_sorted(tmp_path):
    _write(tmp_path, "b", _body(100, 5, "b"), "")
    _write(tmp_path, "a", _body(100, 5, "a"), "")
    assert [r.record_id for r in load_records(tmp_path)] == ["a", "b"]
    with pytest.raises(FileNotFoundError):
        load_records(tmp_path / "nothing")


def test_label_array():
    out = label_array([RhythmLabel.SR, "VF"])
    assert out.tolist() == ["SR", "VF"]
    with pytest.raises(ValueError):
        label_array(["AF"])


_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@st.composite
def records(draw):
    n = draw(st.integers(1, 60))
    samples = draw(st.lists(_floats, min_size=n, max_size=n))
    cuts = sorted(set(draw(st.lists(st.integers(0, n), max_size=6))))
    anns = []
    for a, b in zip(cuts[::2], cuts[1::2]):
        if b > a:
            anns.append((a, b, draw(st.sampled_from(["SR", "VT", "VF"]))))
    fs = draw(st.sampled_from([100, 250, 360]))
    return AnnotatedRecord(draw(st.from_regex(r"[A-Za-z0-9_]{1,8}", fullmatch=True)), fs, samples, anns)


@given(records())
def test_round_trip_bit_exact(tmp_path_factory, rec):
    path = tmp_path_factory.mktemp("rt") / "rec.txt"
    back = load_record(write_record(rec, path))
    assert back.record_id == rec.record_id and back.fs == rec.fs
    assert back.samples.tobytes() == rec.samples.tobytes()
    assert back.annotations == rec.annotations
    assert sum(len(r) for r, _ in extract_labeled_runs(back)) <= back.samples.size

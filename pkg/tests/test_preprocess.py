import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal as sps

from ecgsvm.ingest import AnnotatedRecord, Annotation, RhythmLabel
from ecgsvm.preprocess import (
    CleanRecord,
    LabeledSegment,
    balance_classes,
    class_counts,
    condition,
    highpass05,
    highpass_taps,
    lowpass49,
    lowpass_taps,
    normalize_energy,
    remap_annotations,
    resample_to_100,
    segment,
    segments_to_arrays,
    window_samples,
)


def _sine(f, fs, seconds, phase=0.3):
    t = np.arange(int(seconds * fs)) / fs
    return np.sin(2 * np.pi * f * t + phase)


def _gain_db(y, x, trim):
    core = slice(trim, -trim)
    return 20 * np.log10(np.sqrt(np.mean(y[core] ** 2)) / np.sqrt(np.mean(x[core] ** 2)))


def _tap_gain_db(taps, f, fs):
    _, h = sps.freqz(taps, worN=[f], fs=fs)
    return 20 * np.log10(abs(h[0]))


@pytest.mark.parametrize("fs", [250, 360])
def test_lowpass_passband_and_stopband(fs):
    x10 = _sine(10, fs, 20)
    assert abs(_gain_db(lowpass49(x10, fs), x10, 2 * fs)) <= 1.0
    x60 = _sine(60, fs, 20)
    assert _gain_db(lowpass49(x60, fs), x60, 2 * fs) <= -30.0


@pytest.mark.parametrize("fs", [250, 360])
def test_lowpass_ripple_below_40hz(fs):
    taps = lowpass_taps(fs)
    f = np.linspace(0.0, 40.0, 401)
    _, h = sps.freqz(taps, worN=f, fs=fs)
    assert np.max(np.abs(20 * np.log10(np.abs(h)))) <= 1.0
    assert len(taps) % 2 == 1
    np.testing.assert_allclose(taps, taps[::-1], atol=0)


def test_highpass_dc_rejection():
    taps = highpass_taps()
    assert _tap_gain_db(taps, 1e-9, 100) <= -60.0
    y = highpass05(np.ones(2000))
    assert np.max(np.abs(y[300:-300])) < 1e-3
    assert abs(np.mean(y[300:-300])) < 1e-6


def test_highpass_keeps_5hz():
    x = _sine(5, 100, 20)
    assert abs(_gain_db(highpass05(x), x, 300)) <= 1.0


def test_zero_in_zero_out():
    assert not lowpass49(np.zeros(500), 250).any()
    assert not highpass05(np.zeros(500)).any()


def test_unsupported_rates():
    with pytest.raises(ValueError):
        lowpass49(np.zeros(10), 100)
    with pytest.raises(ValueError):
        highpass05(np.zeros(10), 250)
    with pytest.raises(ValueError):
        resample_to_100(np.zeros(10), 200)


@pytest.mark.parametrize("fs, n_in, n_out", [(250, 2500, 1000), (360, 3600, 1000), (100, 777, 777)])
def test_resample_lengths(fs, n_in, n_out):
    assert resample_to_100(np.zeros(n_in), fs).size == n_out


@given(st.sampled_from([250, 360]), st.integers(1, 5000))
def test_resample_length_rule(fs, n):
    out = resample_to_100(np.zeros(n), fs).size
    assert abs(out - round(n * 100 / fs)) <= 1


def test_resample_identity_at_100():
    x = np.random.default_rng(0).normal(size=50)
    np.testing.assert_array_equal(resample_to_100(x, 100), x)


@pytest.mark.parametrize("fs", [250, 360])
def test_resample_sinusoid(fs):
    x = _sine(10, fs, 10)
    y = resample_to_100(x, fs)
    ref = _sine(10, 100, 10)
    core = slice(100, -100)
    rms = np.sqrt(np.mean((y[core] - ref[core]) ** 2))
    assert rms < 0.01


def test_normalize_examples():
    rec = AnnotatedRecord("r", 100, [3.0, 4.0])
    out = normalize_energy(rec)
    scale = np.sqrt(2 / 25)
    np.testing.assert_allclose(out.samples, [3 * scale, 4 * scale], rtol=1e-15)
    assert abs(np.sum(out.samples ** 2) - 2) <= 1e-9 * 2
    const = normalize_energy(AnnotatedRecord("c", 100, np.full(37, 2.0)))
    np.testing.assert_allclose(const.samples, 1.0, rtol=1e-15)
    again = normalize_energy(out)
    np.testing.assert_allclose(again.samples, out.samples, atol=1e-12)
    with pytest.raises(ValueError):
        normalize_energy(AnnotatedRecord("z", 100, np.zeros(4)))


@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-1e3, 1e3)))
def test_normalize_energy_property(x):
    if not np.any(np.abs(x) > 1e-100):
        return
    out = normalize_energy(AnnotatedRecord("r", 100, x)).samples
    assert abs(np.sum(out ** 2) - x.size) <= 1e-9 * x.size


def test_clean_record_requires_100hz():
    with pytest.raises(ValueError):
        CleanRecord("r", 250, np.ones(3))


def _labeled(n, label="VF", fs=100, start=0):
    return AnnotatedRecord("r", fs, np.arange(n, dtype=float), ((start, n, label),))


@pytest.mark.parametrize("n, window, count", [(1000, 2.0, 5), (290, 1.0, 2), (150, 2.0, 0)])
def test_segment_counts(n, window, count):
    segs = segment(_labeled(n), window)
    assert len(segs) == count
    assert all(s.label is RhythmLabel.VF and len(s) == window_samples(window) for s in segs)


def test_segment_lengths_and_window_set():
    rec = _labeled(1200)
    for w, n in [(0.5, 50), (1, 100), (2, 200), (3, 300), (4, 400), (5, 500), (6, 600)]:
        assert {len(s) for s in segment(rec, w)} == {n}
    with pytest.raises(ValueError):
        segment(rec, 7.0)
    with pytest.raises(ValueError):
        window_samples(0.005, 100)


def test_segment_multiple_intervals():
    rec = AnnotatedRecord("r", 100, np.arange(1000.0), ((0, 250, "SR"), (300, 1000, "VT")))
    segs = segment(rec, 1.0)
    assert [s.start for s in segs] == [0, 100, 300, 400, 500, 600, 700, 800, 900]
    assert [s.label.value for s in segs] == ["SR", "SR"] + ["VT"] * 7
    np.testing.assert_array_equal(segs[2].samples, np.arange(300.0, 400.0))


@st.composite
def annotated(draw):
    n = draw(st.integers(50, 2000))
    cuts = sorted(set(draw(st.lists(st.integers(0, n), min_size=2, max_size=8))))
    anns = [(a, b, draw(st.sampled_from(["SR", "VT", "VF"]))) for a, b in zip(cuts[::2], cuts[1::2]) if b > a]
    return AnnotatedRecord("r", 100, np.zeros(n), anns)


@given(annotated(), st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_segments_inside_one_interval(rec, w):
    for s in segment(rec, w):
        inside = [a for a in rec.annotations if a.start <= s.start and s.start + len(s) <= a.end]
        assert len(inside) == 1 and inside[0].label == s.label


def _segs(counts):
    out = []
    for lab, n in counts.items():
        out += [LabeledSegment(np.full(4, i, dtype=float), RhythmLabel(lab), lab, i) for i in range(n)]
    return out


def test_balance_to_minimum():
    segs = _segs({"SR": 100, "VT": 40, "VF": 40})
    out = balance_classes(segs, seed=3)
    assert class_counts(out) == {"SR": 40, "VT": 40, "VF": 40}
    assert len({s.source for s in out}) == 120


def test_balance_already_balanced_keeps_multiset():
    segs = _segs({"SR": 7, "VT": 7, "VF": 7})
    out = balance_classes(segs, seed=1)
    assert sorted(s.source for s in out) == sorted(s.source for s in segs)


def test_balance_deterministic_and_seed_dependent():
    segs = _segs({"SR": 30, "VT": 20, "VF": 25})
    a = [s.source for s in balance_classes(segs, 5)]
    assert a == [s.source for s in balance_classes(segs, 5)]
    assert a != [s.source for s in balance_classes(segs, 6)]


def test_balance_missing_class():
    with pytest.raises(ValueError):
        balance_classes(_segs({"SR": 3, "VT": 3}), seed=0)
    out = balance_classes(_segs({"SR": 3, "VT": 5}), seed=0, classes=("VT", "SR"))
    assert class_counts(out) == {"SR": 3, "VT": 3, "VF": 0}


def test_segments_to_arrays():
    X, y = segments_to_arrays(_segs({"SR": 2, "VF": 1}))
    assert X.shape == (3, 4) and y.tolist() == ["SR", "SR", "VF"]
    with pytest.raises(ValueError):
        segments_to_arrays([])


@given(
    arrays(np.float64, 400, elements=st.floats(-10, 10)),
    arrays(np.float64, 400, elements=st.floats(-10, 10)),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
def test_filters_linear(x, y, a, b):
    for f in (lambda v: lowpass49(v, 250), lambda v: lowpass49(v, 360), highpass05):
        lhs = f(a * x + b * y)
        rhs = a * f(x) + b * f(y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(lhs)))


def test_remap_annotations_shrinks_inward():
    anns = (Annotation(1, 2499, RhythmLabel.SR), Annotation(2499, 2500, RhythmLabel.VT))
    out = remap_annotations(anns, 250, 1000)
    assert out == (Annotation(1, 999, RhythmLabel.SR),)


def test_condition_record():
    rng = np.random.default_rng(2)
    rec = AnnotatedRecord("r", 360, rng.normal(size=3600) + 5.0, ((0, 3600, "VF"),))
    clean = condition(rec)
    assert isinstance(clean, CleanRecord) and clean.fs == 100
    assert clean.samples.size == 1000
    assert abs(np.sum(clean.samples ** 2) - 1000) <= 1e-9 * 1000
    assert clean.annotations == (Annotation(0, 1000, RhythmLabel.VF),)

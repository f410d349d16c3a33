"""Record conditioning: filtering, resampling to 100 Hz, energy normalization,
segmentation into fixed windows and class balancing.

Per-record order is fixed: ``lowpass49 -> resample_to_100 -> highpass05 ->
normalize_energy -> segment``. Both filters are linear-phase windowed-sinc FIR
designs applied with their group delay removed, so annotation indices stay
aligned with the filtered signal.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from .ingest import AnnotatedRecord, Annotation, LABELS, RhythmLabel

TARGET_FS = 100

LOWPASS_PASS_HZ = 40.0
LOWPASS_STOP_HZ = 49.0
HIGHPASS_CUTOFF_HZ = 0.5
HIGHPASS_NUMTAPS = 301

SEGMENT_WINDOWS_S = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)

# (up, down) for polyphase resampling to 100 Hz
_RESAMPLE_RATIOS = {100: (1, 1), 250: (2, 5), 360: (5, 18)}


class CleanRecord(AnnotatedRecord):
    """An :class:`AnnotatedRecord` on the 100 Hz grid after conditioning."""

    def __post_init__(self):
        if self.fs != TARGET_FS:
            raise ValueError(f"CleanRecord must be sampled at {TARGET_FS} Hz, got {self.fs}")
        super().__post_init__()


@dataclass(frozen=True)
class LabeledSegment:
    samples: np.ndarray
    label: RhythmLabel
    record_id: str
    start: int

    @property
    def source(self) -> Tuple[str, int]:
        return (self.record_id, self.start)

    def __len__(self) -> int:
        return len(self.samples)


def window_samples(window_s: float, fs: int = TARGET_FS) -> int:
    n = round(window_s * fs)
    if abs(n - window_s * fs) > 1e-9:
        raise ValueError(f"window of {window_s} s is not a whole number of samples at {fs} Hz")
    return int(n)


def apply_fir(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Filter with an odd-length linear-phase FIR, compensating its delay.

    The input is extended at both ends by odd reflection, which keeps the
    operation linear and avoids start-up transients on offset signals.
    """
    x = np.asarray(x, dtype=float)
    pad = (len(taps) - 1) // 2
    if x.size == 0:
        return x.copy()
    xp = np.pad(x, pad, mode="reflect", reflect_type="odd") if x.size > 1 else np.full(x.size + 2 * pad, x[0])
    return np.convolve(xp, taps, mode="valid")


@lru_cache(maxsize=None)
def lowpass_taps(fs: int) -> np.ndarray:
    """Hamming-windowed sinc, cutoff midway between the 40 Hz and 49 Hz band edges."""
    if fs not in (250, 360):
        raise ValueError(f"lowpass49 supports fs in (250, 360), got {fs}")
    transition = LOWPASS_STOP_HZ - LOWPASS_PASS_HZ
    numtaps = int(np.ceil(3.3 * fs / transition)) | 1
    taps = sps.firwin(numtaps, (LOWPASS_PASS_HZ + LOWPASS_STOP_HZ) / 2, window="hamming", fs=fs)
    taps.setflags(write=False)
    return taps


@lru_cache(maxsize=None)
def highpass_taps(fs: int = TARGET_FS) -> np.ndarray:
    """Spectral inversion of a unit-DC-gain lowpass, so the DC gain is zero to rounding."""
    if fs != TARGET_FS:
        raise ValueError(f"highpass05 is designed for fs={TARGET_FS}, got {fs}")
    lp = sps.firwin(HIGHPASS_NUMTAPS, HIGHPASS_CUTOFF_HZ, window="hamming", fs=fs)
    lp = lp / lp.sum()
    hp = -lp
    hp[HIGHPASS_NUMTAPS // 2] += 1.0
    hp.setflags(write=False)
    return hp


def lowpass49(samples, fs: int) -> np.ndarray:
    return apply_fir(samples, lowpass_taps(fs))


def highpass05(samples, fs: int = TARGET_FS) -> np.ndarray:
    return apply_fir(samples, highpass_taps(fs))


def resample_to_100(samples, fs_in: int) -> np.ndarray:
    """Rational polyphase resampling (2/5 from 250 Hz, 5/18 from 360 Hz)."""
    if fs_in not in _RESAMPLE_RATIOS:
        raise ValueError(f"cannot resample from {fs_in} Hz; supported: {sorted(_RESAMPLE_RATIOS)}")
    x = np.asarray(samples, dtype=float)
    up, down = _RESAMPLE_RATIOS[fs_in]
    if up == down:
        return x.copy()
    return sps.resample_poly(x, up, down, padtype="line")


def remap_annotations(annotations: Sequence[Annotation], fs_in: int, n_out: int) -> Tuple[Annotation, ...]:
    """Map intervals onto the 100 Hz grid, shrinking inward so they never grow."""
    out = []
    for a in annotations:
        start = -(-a.start * TARGET_FS // fs_in)
        end = min(a.end * TARGET_FS // fs_in, n_out)
        if end > start:
            out.append(Annotation(int(start), int(end), a.label))
    return tuple(out)


def normalize_energy(record: AnnotatedRecord) -> CleanRecord:
    """Scale the whole record so that ``sum(x**2) == len(x)``."""
    x = np.asarray(record.samples, dtype=float)
    energy = float(np.dot(x, x))
    if energy == 0.0:
        raise ValueError(f"record {record.record_id!r} is all zeros; cannot normalize")
    scaled = x * np.sqrt(x.size / energy)
    return CleanRecord(record.record_id, record.fs, scaled, record.annotations)


def condition(record: AnnotatedRecord) -> CleanRecord:
    """Run the filtering, resampling and normalization chain on one record."""
    x = np.asarray(record.samples, dtype=float)
    if record.fs != TARGET_FS:
        x = lowpass49(x, record.fs)
    x = resample_to_100(x, record.fs)
    x = highpass05(x)
    anns = remap_annotations(record.annotations, record.fs, x.size)
    return normalize_energy(AnnotatedRecord(record.record_id, TARGET_FS, x, anns))


def segment(record: AnnotatedRecord, window_s: float) -> List[LabeledSegment]:
    """Cut consecutive non-overlapping windows inside each annotation interval.

    Tail samples that do not fill a window are dropped.
    """
    if not any(abs(window_s - w) < 1e-12 for w in SEGMENT_WINDOWS_S):
        raise ValueError(f"window_s must be one of {SEGMENT_WINDOWS_S}, got {window_s}")
    n = window_samples(window_s, record.fs)
    out = []
    for a in record.annotations:
        for start in range(a.start, a.end - n + 1, n):
            seg = record.samples[start:start + n]
            out.append(LabeledSegment(seg, a.label, record.record_id, start))
    return out


def balance_classes(
    segments: Sequence[LabeledSegment],
    seed: int,
    classes: Sequence[RhythmLabel] = LABELS,
) -> List[LabeledSegment]:
    """Sub-sample every class to the size of the smallest one, then shuffle.

    Uses ``numpy.random.default_rng(seed)`` (PCG64): for each class in
    ``classes`` order, ``rng.choice(n, size=min_count, replace=False)`` picks
    the kept indices (sorted, to keep source order); the pooled result is then
    reordered by ``rng.permutation``. Segments of other classes are dropped.
    """
    classes = [RhythmLabel(c) for c in classes]
    by_class: Dict[RhythmLabel, List[LabeledSegment]] = {lab: [] for lab in classes}
    for s in segments:
        lab = RhythmLabel(s.label)
        if lab in by_class:
            by_class[lab].append(s)
    missing = [lab.value for lab in classes if not by_class[lab]]
    if missing:
        raise ValueError(f"classes absent from input: {missing}")
    rng = np.random.default_rng(seed)
    n_min = min(len(v) for v in by_class.values())
    pooled: List[LabeledSegment] = []
    for lab in classes:
        items = by_class[lab]
        keep = np.sort(rng.choice(len(items), size=n_min, replace=False))
        pooled.extend(items[i] for i in keep)
    order = rng.permutation(len(pooled))
    return [pooled[i] for i in order]


def class_counts(segments: Sequence[LabeledSegment]) -> Dict[str, int]:
    c = Counter(RhythmLabel(s.label).value for s in segments)
    return {lab.value: c.get(lab.value, 0) for lab in LABELS}


def segments_to_arrays(segments: Sequence[LabeledSegment]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack segments into ``X`` of shape (n, length) and a string label array."""
    if not segments:
        raise ValueError("no segments")
    lengths = {len(s) for s in segments}
    if len(lengths) != 1:
        raise ValueError(f"segments have mixed lengths {sorted(lengths)}")
    X = np.vstack([s.samples for s in segments])
    y = np.array([RhythmLabel(s.label).value for s in segments], dtype=str)
    return X, y

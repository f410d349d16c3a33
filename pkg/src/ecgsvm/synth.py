"""Deterministic SR/VT/VF-like signals for desk-scale testing.

These generators are not physiological models. They give the learning
machinery a separable three-class problem with known labels:

* SR: a periodic beat template (narrow biphasic spike plus a low broad bump)
  at 50-100 beats per minute;
* VT: a smooth, asymmetric periodic oscillation at 150-250 per minute;
* VF: noise band-limited to 3-8 Hz under a slow random amplitude envelope.

Each generator returns a fully annotated :class:`~ecgsvm.ingest.AnnotatedRecord`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy import signal as sps

from .ingest import SUPPORTED_FS, AnnotatedRecord, Annotation, RhythmLabel, write_record

RATE_RANGES = {
    RhythmLabel.SR: (50.0, 100.0),
    RhythmLabel.VT: (150.0, 250.0),
}
VF_BAND_HZ = (3.0, 8.0)
DEFAULT_NOISE = 0.05


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic record.

    ``rate`` is beats (SR) or oscillations (VT) per minute; ``None`` draws it
    uniformly from the class range using ``seed``. VF ignores ``rate``.
    """

    label: RhythmLabel
    fs: int = 250
    duration_s: float = 20.0
    seed: int = 0
    rate: Optional[float] = None
    noise: float = DEFAULT_NOISE

    def __post_init__(self):
        object.__setattr__(self, "label", RhythmLabel(self.label))
        if self.fs not in SUPPORTED_FS:
            raise ValueError(f"fs must be one of {SUPPORTED_FS}, got {self.fs}")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.noise < 0:
            raise ValueError("noise level must be >= 0")
        if self.rate is not None and self.label in RATE_RANGES:
            lo, hi = RATE_RANGES[self.label]
            if not lo <= self.rate <= hi:
                raise ValueError(f"{self.label.value} rate must be in [{lo}, {hi}] per minute")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs))


def _gauss(t, mu, sigma):
    return np.exp(-0.5 * ((t - mu) / sigma) ** 2)


def _periodic(template: np.ndarray, n: int) -> np.ndarray:
    reps = -(-n // template.size)
    return np.tile(template, reps)[:n]


def _record(spec: SynthSpec, x: np.ndarray, record_id: Optional[str]) -> AnnotatedRecord:
    rid = record_id or f"{spec.label.value}_{spec.seed}"
    return AnnotatedRecord(rid, spec.fs, x, (Annotation(0, x.size, spec.label),))


def _draw_rate(spec: SynthSpec, rng: np.random.Generator) -> float:
    lo, hi = RATE_RANGES[spec.label]
    return spec.rate if spec.rate is not None else float(rng.uniform(lo, hi))


def gen_sr(spec: SynthSpec, record_id: Optional[str] = None) -> AnnotatedRecord:
    if spec.label != RhythmLabel.SR:
        raise ValueError("gen_sr needs an SR spec")
    rng = np.random.default_rng(spec.seed)
    rate = _draw_rate(spec, rng)
    period = int(round(spec.fs * 60.0 / rate))
    amp = rng.uniform(0.8, 1.2)
    width = rng.uniform(0.010, 0.016)
    t_amp = rng.uniform(0.15, 0.35)
    t = np.arange(period) / spec.fs
    T = period / spec.fs
    r_time = 0.3 * T
    beat = np.zeros(period)
    # wrap neighbouring periods so the template tiles seamlessly
    for shift in (-T, 0.0, T):
        tt = t + shift
        beat += amp * (_gauss(tt, r_time, width) - 0.35 * _gauss(tt, r_time + 2.2 * width, width))
        beat += t_amp * _gauss(tt, r_time + 0.25, 0.06)
    x = _periodic(beat, spec.n_samples)
    if spec.noise:
        x = x + spec.noise * rng.standard_normal(x.size)
    return _record(spec, x, record_id)


def gen_vt(spec: SynthSpec, record_id: Optional[str] = None) -> AnnotatedRecord:
    if spec.label != RhythmLabel.VT:
        raise ValueError("gen_vt needs a VT spec")
    rng = np.random.default_rng(spec.seed)
    rate = _draw_rate(spec, rng)
    period = int(round(spec.fs * 60.0 / rate))
    phase = 2 * np.pi * np.arange(period) / period
    h2 = rng.uniform(0.3, 0.5)
    h3 = rng.uniform(0.05, 0.15)
    p2, p3 = rng.uniform(0, 2 * np.pi, size=2)
    cycle = np.sin(phase) + h2 * np.sin(2 * phase + p2) + h3 * np.sin(3 * phase + p3)
    x = _periodic(cycle * rng.uniform(0.8, 1.2), spec.n_samples)
    if spec.noise:
        x = x + spec.noise * rng.standard_normal(x.size)
    return _record(spec, x, record_id)


def gen_vf(spec: SynthSpec, record_id: Optional[str] = None) -> AnnotatedRecord:
    if spec.label != RhythmLabel.VF:
        raise ValueError("gen_vf needs a VF spec")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    sos = sps.butter(4, VF_BAND_HZ, btype="bandpass", fs=spec.fs, output="sos")
    core = sps.sosfiltfilt(sos, rng.standard_normal(n + 2 * spec.fs))[spec.fs:spec.fs + n]
    core /= core.std()
    env_sos = sps.butter(2, 0.4, btype="lowpass", fs=spec.fs, output="sos")
    env = sps.sosfiltfilt(env_sos, rng.standard_normal(n + 4 * spec.fs))[2 * spec.fs:2 * spec.fs + n]
    env = 1.0 + 0.4 * env / (np.abs(env).max() + 1e-12)
    x = core * env
    if spec.noise:
        x = x + spec.noise * rng.standard_normal(n)
    return _record(spec, x, record_id)


GENERATORS = {RhythmLabel.SR: gen_sr, RhythmLabel.VT: gen_vt, RhythmLabel.VF: gen_vf}


def generate(spec: SynthSpec, record_id: Optional[str] = None) -> AnnotatedRecord:
    return GENERATORS[spec.label](spec, record_id)


def gen_corpus(
    n_per_class: int,
    seed: int = 0,
    fs: int = 250,
    duration_s: float = 20.0,
    noise: float = DEFAULT_NOISE,
) -> List[AnnotatedRecord]:
    """``n_per_class`` records of each rhythm, seeds spawned from ``seed``."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    children = np.random.SeedSequence(seed).spawn(3 * n_per_class)
    records = []
    k = 0
    for label in (RhythmLabel.SR, RhythmLabel.VT, RhythmLabel.VF):
        for i in range(n_per_class):
            child_seed = int(children[k].generate_state(1)[0])
            k += 1
            spec = SynthSpec(label, fs, duration_s, child_seed, noise=noise)
            records.append(generate(spec, f"{label.value}_{i:03d}"))
    return records


def write_corpus(records: List[AnnotatedRecord], directory) -> List[Path]:
    directory = Path(directory)
    return [write_record(r, directory / f"{r.record_id}.txt") for r in records]

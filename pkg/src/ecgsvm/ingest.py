"""Annotated single-channel ECG records and their plain-text file format.

A record is two files::

    rec001.txt   line 1 "#fs=<int>", line 2 "#id=<string>", then one sample per line
    rec001.ann   one "<start> <end> <LABEL>" line per rhythm interval (end exclusive)

Sample values are written with ``repr`` so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

PathLike = Union[str, Path]

SUPPORTED_FS = (100, 250, 360)


class RhythmLabel(str, enum.Enum):
    SR = "SR"
    VT = "VT"
    VF = "VF"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "RhythmLabel":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown rhythm label {text!r}; expected one of SR, VT, VF") from None


LABELS: Tuple[RhythmLabel, ...] = (RhythmLabel.SR, RhythmLabel.VT, RhythmLabel.VF)


class RecordFormatError(ValueError):
    """Malformed record or annotation file; carries the file and line position."""

    def __init__(self, message: str, path: PathLike | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Annotation:
    start: int
    end: int
    label: RhythmLabel

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class AnnotatedRecord:
    """A sampled ECG trace with labeled rhythm intervals.

    Construction validates the invariants: ``fs`` positive, samples non-empty,
    annotations sorted, non-overlapping and inside ``[0, len(samples))``.
    """

    record_id: str
    fs: int
    samples: np.ndarray
    annotations: Tuple[Annotation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-d sequence")
        if self.fs <= 0:
            raise ValueError(f"fs must be positive, got {self.fs}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        anns = tuple(
            a if isinstance(a, Annotation) else Annotation(int(a[0]), int(a[1]), RhythmLabel(a[2]))
            for a in self.annotations
        )
        object.__setattr__(self, "annotations", anns)
        check_annotations(anns, samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs


def check_annotations(annotations: Sequence[Annotation], n_samples: int) -> None:
    prev_end = 0
    for i, a in enumerate(annotations):
        if not isinstance(a.label, RhythmLabel):
            raise ValueError(f"annotation {i}: unknown label {a.label!r}")
        if a.start < 0 or a.end > n_samples or a.start >= a.end:
            raise ValueError(
                f"annotation {i}: interval [{a.start}, {a.end}) outside record of {n_samples} samples"
            )
        if a.start < prev_end:
            raise ValueError(f"annotation {i}: overlaps or precedes the previous interval")
        prev_end = a.end


def annotation_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".ann")


def _parse_header(line: str, key: str, path: Path, lineno: int) -> str:
    prefix = f"#{key}="
    if not line.startswith(prefix):
        raise RecordFormatError(f"expected header '{prefix}<value>', got {line!r}", path, lineno)
    return line[len(prefix):].strip()


def load_record(path: PathLike) -> AnnotatedRecord:
    """Read a record file and its ``.ann`` sidecar.

    Raises
    ------
    RecordFormatError
        On a malformed header, non-numeric sample, bad annotation line,
        unknown label, or an annotation outside the record.
    FileNotFoundError
        If either file is missing.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise RecordFormatError("missing '#fs=' and '#id=' header lines", path, len(lines) + 1)
    fs_text = _parse_header(lines[0], "fs", path, 1)
    try:
        fs = int(fs_text)
    except ValueError:
        raise RecordFormatError(f"sampling rate {fs_text!r} is not an integer", path, 1) from None
    if fs not in SUPPORTED_FS:
        raise RecordFormatError(f"sampling rate {fs} not in {SUPPORTED_FS}", path, 1)
    record_id = _parse_header(lines[1], "id", path, 2)

    samples = []
    for lineno, line in enumerate(lines[2:], start=3):
        text = line.strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            raise RecordFormatError(f"non-numeric sample {text!r}", path, lineno) from None
        if not np.isfinite(value):
            raise RecordFormatError(f"non-finite sample {text!r}", path, lineno)
        samples.append(value)
    if not samples:
        raise RecordFormatError("record has no samples", path)

    annotations = _load_annotations(annotation_path(path), len(samples))
    return AnnotatedRecord(record_id, fs, np.array(samples), annotations)


def _load_annotations(path: Path, n_samples: int) -> Tuple[Annotation, ...]:
    out: List[Annotation] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise RecordFormatError(
                    f"expected '<start> <end> <LABEL>', got {line.strip()!r}", path, lineno
                )
            try:
                start, end = int(parts[0]), int(parts[1])
            except ValueError:
                raise RecordFormatError("start/end must be integers", path, lineno) from None
            try:
                label = RhythmLabel.parse(parts[2])
            except ValueError as exc:
                raise RecordFormatError(str(exc), path, lineno) from None
            if start < 0 or end > n_samples or start >= end:
                raise RecordFormatError(
                    f"interval [{start}, {end}) out of range for {n_samples} samples", path, lineno
                )
            if out and start < out[-1].end:
                raise RecordFormatError("annotations must be sorted and non-overlapping", path, lineno)
            out.append(Annotation(start, end, label))
    return tuple(out)


def write_record(record: AnnotatedRecord, path: PathLike) -> Path:
    """Write ``record`` to ``path`` plus the ``.ann`` sidecar. Returns ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#fs={record.fs}\n#id={record.record_id}\n")
        fh.write("\n".join(repr(float(v)) for v in record.samples))
        fh.write("\n")
    with open(annotation_path(path), "w", encoding="utf-8") as fh:
        for a in record.annotations:
            fh.write(f"{a.start} {a.end} {a.label.value}\n")
    return path


def load_records(directory: PathLike, pattern: str = "*.txt") -> List[AnnotatedRecord]:
    """Load every record in ``directory`` matching ``pattern``, sorted by filename."""
    paths = sorted(Path(directory).glob(pattern))
    if not paths:
        raise FileNotFoundError(f"no records matching {pattern!r} in {directory}")
    return [load_record(p) for p in paths]


def extract_labeled_runs(record: AnnotatedRecord) -> List[Tuple[np.ndarray, RhythmLabel]]:
    """One contiguous sample run per annotation interval, in annotation order."""
    return [(record.samples[a.start:a.end], a.label) for a in record.annotations]


def label_array(labels: Iterable[Union[str, RhythmLabel]]) -> np.ndarray:
    """Plain string array (``'SR'``, ``'VT'``, ``'VF'``) suitable as an estimator target."""
    return np.array([RhythmLabel(lab).value for lab in labels], dtype=str)

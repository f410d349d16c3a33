"""Accuracy, per-class sensitivity and mean +/- standard error."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .ingest import LABELS


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true label, columns = predicted label."""

    counts: np.ndarray
    labels: Tuple[str, ...] = tuple(lab.value for lab in LABELS)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        k = len(self.labels)
        if counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    @classmethod
    def from_pairs(cls, y_true, y_pred, labels: Sequence[str] | None = None) -> "ConfusionMatrix":
        y_true = np.asarray(y_true).astype(str)
        y_pred = np.asarray(y_pred).astype(str)
        if y_true.shape != y_pred.shape:
            raise ValueError("y_true and y_pred differ in length")
        labels = tuple(lab.value for lab in LABELS) if labels is None else tuple(map(str, labels))
        index = {lab: i for i, lab in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[index[t], index[p]] += 1
        return cls(counts, labels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sum(self, label) -> int:
        return int(self.counts[self.labels.index(str(label))].sum())


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def sensitivity(cm: ConfusionMatrix, label) -> float:
    i = cm.labels.index(str(label))
    row = cm.counts[i].sum()
    if row == 0:
        raise ValueError(f"no test examples of class {label}")
    return float(cm.counts[i, i] / row)


def mean_stderr(values) -> Tuple[float, float]:
    """Arithmetic mean and ``stdev(ddof=1) / sqrt(n)``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 values for a standard error")
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))

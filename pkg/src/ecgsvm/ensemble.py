"""Window ensembles: classify a long observation by pooling the binary decision
values of shorter, shifted sub-segments before loss-based decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_is_fitted, validate_data

from .svm import sign

WINDOWS_S = (3.0, 4.0, 5.0, 6.0)
SEGMENTS_S = (1.0, 2.0)
SHIFTS_S = (0.25, 0.5)
AGGREGATIONS = ("mean", "median", "majority", "max")


def _whole(x: float, tol: float = 1e-9) -> bool:
    return abs(x - round(x)) < tol


@dataclass(frozen=True)
class EnsembleConfig:
    window_s: float = 5.0
    segment_s: float = 1.0
    shift_s: float = 0.5
    aggregation: str = "mean"

    def __post_init__(self):
        if self.window_s not in WINDOWS_S:
            raise ValueError(f"window_s must be one of {WINDOWS_S}, got {self.window_s}")
        if self.segment_s not in SEGMENTS_S:
            raise ValueError(f"segment_s must be one of {SEGMENTS_S}, got {self.segment_s}")
        if self.shift_s not in SHIFTS_S:
            raise ValueError(f"shift_s must be one of {SHIFTS_S}, got {self.shift_s}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if not self.segment_s < self.window_s:
            raise ValueError("segment_s must be shorter than window_s")
        if not _whole((self.window_s - self.segment_s) / self.shift_s):
            raise ValueError("window_s - segment_s must be a multiple of shift_s")

    @property
    def n_segments(self) -> int:
        return int(round((self.window_s - self.segment_s) / self.shift_s)) + 1

    def label(self) -> str:
        return f"{self.segment_s:g}s segments, {self.shift_s:g}s shift"


def segment_offsets(window_len: int, segment_len: int, shift: int) -> np.ndarray:
    return np.arange(0, window_len - segment_len + 1, shift)


def slice_window(window, cfg: EnsembleConfig, fs: int = 100) -> np.ndarray:
    """Sub-segments at offsets ``0, shift, 2*shift, ...``; shape (n_segments, segment_len)."""
    x = np.asarray(getattr(window, "samples", window), dtype=float)
    expected = int(round(cfg.window_s * fs))
    if x.ndim != 1 or x.size != expected:
        raise ValueError(f"window must have {expected} samples, got shape {x.shape}")
    seg = int(round(cfg.segment_s * fs))
    offsets = segment_offsets(x.size, seg, int(round(cfg.shift_s * fs)))
    return np.stack([x[o:o + seg] for o in offsets])


def aggregate(values, method: str = "mean") -> np.ndarray:
    """Reduce per-segment decision vectors (n_segments, n_columns) column-wise.

    ``majority`` takes the sign of the mean of signs (ties and zeros -> +1);
    ``max`` keeps the value of largest magnitude with its sign (on an exact
    magnitude tie the positive value wins).
    """
    F = np.asarray(values, dtype=float)
    if F.ndim == 1:
        F = F[None, :]
    if F.shape[0] == 0:
        raise ValueError("cannot aggregate an empty list of decision values")
    return _aggregate(F[None], method)[0]


def _aggregate(F: np.ndarray, method: str) -> np.ndarray:
    # F: (n_windows, n_segments, n_columns)
    if method == "mean":
        return F.mean(axis=1)
    if method == "median":
        return np.median(F, axis=1)
    if method == "majority":
        return sign(sign(F).mean(axis=1)).astype(float)
    if method == "max":
        mag = np.abs(F)
        top = mag.max(axis=1, keepdims=True)
        return np.where(mag == top, F, -np.inf).max(axis=1)
    raise ValueError(f"unknown aggregation {method!r}; expected one of {AGGREGATIONS}")


def _final_step(model):
    return model[-1] if isinstance(model, Pipeline) else model


def decision_values(model, X) -> np.ndarray:
    """Binary decision values from an ECOC classifier or a pipeline ending in one."""
    if isinstance(model, Pipeline):
        Xt = X
        for _, step in model.steps[:-1]:
            Xt = step.transform(Xt)
        return model[-1].decision_values(Xt)
    return model.decision_values(X)


def ensemble_classify(model, window, cfg: EnsembleConfig, fs: int = 100) -> str:
    """Decode the aggregated decision values of the window's sub-segments."""
    segs = slice_window(window, cfg, fs)
    F = aggregate(decision_values(model, segs), cfg.aggregation)
    return str(_final_step(model).decode(F[None, :])[0])


class WindowEnsembleClassifier(ClassifierMixin, BaseEstimator):
    """Train a segment classifier on window pieces; predict windows by ensemble.

    Parameters
    ----------
    estimator : classifier or Pipeline ending in :class:`~ecgsvm.ecoc.EcocClassifier`
        Segment-level model; it must accept rows of ``segment_s * fs`` samples.
    window_s, segment_s, shift_s, aggregation
        See :class:`EnsembleConfig`.
    n_segments : int, optional
        Use only the first ``n_segments`` sub-segments at prediction time
        (``1`` gives the single-segment baseline).
    fs : int, default=100

    Notes
    -----
    Training windows are cut into non-overlapping ``segment_s`` pieces, each
    inheriting the window label.
    """

    def __init__(self, estimator, window_s=5.0, segment_s=1.0, shift_s=0.5, aggregation="mean",
                 n_segments=None, fs=100):
        self.estimator = estimator
        self.window_s = window_s
        self.segment_s = segment_s
        self.shift_s = shift_s
        self.aggregation = aggregation
        self.n_segments = n_segments
        self.fs = fs

    @property
    def config(self) -> EnsembleConfig:
        return EnsembleConfig(self.window_s, self.segment_s, self.shift_s, self.aggregation)

    def _lengths(self):
        cfg = self.config
        return (int(round(cfg.window_s * self.fs)), int(round(cfg.segment_s * self.fs)),
                int(round(cfg.shift_s * self.fs)))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=float)
        win, seg, _ = self._lengths()
        if X.shape[1] != win:
            raise ValueError(f"windows must have {win} samples, got {X.shape[1]}")
        k = win // seg
        pieces = X[:, : k * seg].reshape(X.shape[0] * k, seg)
        self.estimator_ = clone(self.estimator).fit(pieces, np.repeat(y, k))
        self.classes_ = _final_step(self.estimator_).classes_
        return self

    def window_decision_values(self, X) -> np.ndarray:
        """Aggregated decision values, shape (n_windows, n_columns)."""
        check_is_fitted(self, "estimator_")
        X = validate_data(self, X, dtype=float, reset=False)
        win, seg, shift = self._lengths()
        offsets = segment_offsets(win, seg, shift)
        if self.n_segments is not None:
            offsets = offsets[: self.n_segments]
        segs = np.stack([X[:, o:o + seg] for o in offsets], axis=1)  # (n, k, seg)
        F = decision_values(self.estimator_, segs.reshape(-1, seg))
        F = F.reshape(X.shape[0], len(offsets), -1)
        return _aggregate(F, self.aggregation)

    def predict(self, X) -> np.ndarray:
        return _final_step(self.estimator_).decode(self.window_decision_values(X))

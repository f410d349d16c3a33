"""Representation spaces for ECG segments.

Time-domain waveforms, Fourier magnitude spectra, projections of spectra onto
a union of per-class principal subspaces, and the one-dimensional phase-space
box counts (PSA: delay embedding, PSM: first-difference embedding). Each space
has a functional form and a scikit-learn transformer so it can sit in a
:class:`~sklearn.pipeline.Pipeline` in front of a classifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .ingest import RhythmLabel

GRID_BINS = 40
GRID_CELLS = GRID_BINS * GRID_BINS
ETA_THRESHOLD = 0.15
PSA_DELAY_S = 0.5
PCA_MIN_COMPONENTS = 5
PCA_MAX_COMPONENTS = 15
_RANK_TOL = 1e-8
_DEGENERATE_ULPS = 64


def magnitude_spectrum(segment) -> np.ndarray:
    """``|DFT(x)[k]|`` for ``k = 0 .. N/2 - 1`` (DC kept, Nyquist bin dropped).

    Also accepts a 2-d array and transforms each row.
    """
    x = np.asarray(segment, dtype=float)
    n = x.shape[-1]
    if n % 2:
        raise ValueError(f"segment length must be even, got {n}")
    return np.abs(np.fft.rfft(x, axis=-1))[..., : n // 2]


# --------------------------------------------------------------------------- PCA


@dataclass(frozen=True)
class PcaBasis:
    """Union of per-class principal directions, orthonormalized.

    Attributes
    ----------
    classes : tuple of str
        Class order used when concatenating components.
    class_means : ndarray of shape (n_classes, dim)
    eigenvalues : ndarray of shape (n_classes, dim)
        Per-class covariance spectrum, descending.
    components : ndarray of shape (n_classes, n_per_class, dim)
        Top principal directions of each class, before orthonormalization.
    global_mean : ndarray of shape (dim,)
        Mean of the class means; the centering point for projection.
    basis : ndarray of shape (n_basis, dim)
        Orthonormal rows spanning the union of ``components``.
    n_per_class : int
    """

    classes: Tuple[str, ...]
    class_means: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray
    global_mean: np.ndarray
    basis: np.ndarray
    n_per_class: int

    @property
    def dim(self) -> int:
        return self.global_mean.shape[0]

    @property
    def n_basis(self) -> int:
        return self.basis.shape[0]

    def explained_variance_ratio(self, cls, k: int) -> float:
        """Share of a class's total variance captured by its top ``k`` directions."""
        ev = self.eigenvalues[self.classes.index(str(cls))]
        total = ev.sum()
        return float(ev[:k].sum() / total) if total > 0 else 1.0


def _class_eigh(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    v = v[:, order]
    # sign convention: largest-magnitude entry of each eigenvector positive
    idx = np.argmax(np.abs(v), axis=0)
    v = v * np.sign(v[idx, np.arange(v.shape[1])])
    return w, v


def fit_pca_basis(X, y, classes: Sequence | None = None, n_per_class: int = 5) -> PcaBasis:
    """Per-class PCA on training spectra; union of the top directions.

    Each class's covariance (sample, ``n - 1``) is diagonalized with a dense
    symmetric eigensolver. The top ``n_per_class`` eigenvectors of every class
    are concatenated in class order and orthonormalized by QR with column
    pivoting; directions whose residual norm falls below 1e-8 are dropped.
    """
    X = check_array(X, dtype=float)
    y = np.asarray(y)
    if not PCA_MIN_COMPONENTS <= n_per_class <= PCA_MAX_COMPONENTS:
        raise ValueError(
            f"n_per_class must be in [{PCA_MIN_COMPONENTS}, {PCA_MAX_COMPONENTS}], got {n_per_class}"
        )
    if classes is None:
        classes = [c for c in (lab.value for lab in RhythmLabel) if np.any(y == c)]
        classes += sorted(set(map(str, np.unique(y))) - set(classes))
    classes = tuple(str(c) for c in classes)
    dim = X.shape[1]
    if n_per_class > dim:
        raise ValueError(f"n_per_class={n_per_class} exceeds feature dimension {dim}")

    means, eigvals, comps = [], [], []
    for c in classes:
        Xc = X[y == c]
        if Xc.shape[0] < n_per_class + 1:
            raise ValueError(
                f"class {c!r} has {Xc.shape[0]} training vectors; need at least {n_per_class + 1}"
            )
        w, v = _class_eigh(Xc)
        means.append(Xc.mean(axis=0))
        eigvals.append(w)
        comps.append(v[:, :n_per_class].T)

    stacked = np.vstack(comps)
    q, r, _ = scipy.linalg.qr(stacked.T, mode="economic", pivoting=True)
    rank = int(np.sum(np.abs(np.diag(r)) >= _RANK_TOL))
    basis = q[:, :rank].T

    class_means = np.array(means)
    return PcaBasis(
        classes=classes,
        class_means=class_means,
        eigenvalues=np.array(eigvals),
        components=np.array(comps),
        global_mean=class_means.mean(axis=0),
        basis=np.ascontiguousarray(basis),
        n_per_class=n_per_class,
    )


def project(basis: PcaBasis, spectrum) -> np.ndarray:
    """Coordinates of the globally centered spectrum in the orthonormal basis."""
    x = np.asarray(spectrum, dtype=float)
    if x.shape[-1] != basis.dim:
        raise ValueError(f"spectrum has dimension {x.shape[-1]}, basis expects {basis.dim}")
    return (x - basis.global_mean) @ basis.basis.T


def reconstruct(basis: PcaBasis, coords) -> np.ndarray:
    return np.asarray(coords, dtype=float) @ basis.basis + basis.global_mean


# ------------------------------------------------------------------- phase space


@dataclass(frozen=True)
class PhaseSpaceResult:
    visited: int
    eta: float


def _bin_axis(v: np.ndarray, scale: float | None = None) -> np.ndarray:
    # an axis whose spread is at rounding level of ``scale`` counts as constant
    lo, hi = v.min(), v.max()
    if scale is None:
        scale = max(abs(lo), abs(hi))
    if hi - lo <= _DEGENERATE_ULPS * np.finfo(float).eps * scale:
        return np.zeros(v.shape, dtype=np.int64)
    idx = np.floor((v - lo) / (hi - lo) * GRID_BINS).astype(np.int64)
    return np.minimum(idx, GRID_BINS - 1)


def count_boxes(x1: np.ndarray, x2: np.ndarray, scale2: float | None = None) -> PhaseSpaceResult:
    """Occupied cells of a 40 x 40 grid spanning each axis's own min..max.

    ``scale2`` is the magnitude the second axis was computed from; it sets
    the rounding floor below which that axis is treated as constant.
    """
    cells = _bin_axis(np.asarray(x1, float)) * GRID_BINS + _bin_axis(np.asarray(x2, float), scale2)
    visited = int(np.unique(cells).size)
    return PhaseSpaceResult(visited, visited / GRID_CELLS)


def psa_count(segment, fs: int = 100) -> PhaseSpaceResult:
    """Box count of the delay embedding ``(x[n], x[n-k])`` with ``k`` = 0.5 s."""
    x = np.asarray(segment, dtype=float)
    k = int(round(PSA_DELAY_S * fs))
    if x.ndim != 1 or x.size <= k:
        raise ValueError(f"segment needs more than {k} samples for a {PSA_DELAY_S} s delay")
    return count_boxes(x[k:], x[:-k])


def psm_count(segment) -> PhaseSpaceResult:
    """Box count of ``(x[n], x[n] - x[n-1])``."""
    x = np.asarray(segment, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("segment needs at least 2 samples")
    return count_boxes(x[1:], np.diff(x), scale2=float(np.max(np.abs(x))))


def psa_threshold_classify(result: PhaseSpaceResult) -> str:
    """``'VF'`` when eta strictly exceeds 0.15, else ``'nonVF'``."""
    return "VF" if result.eta > ETA_THRESHOLD else "nonVF"


# ------------------------------------------------------------------ transformers


class TimeDomain(TransformerMixin, BaseEstimator):
    """Identity map; the raw waveform is the feature vector."""

    def fit(self, X, y=None):
        validate_data(self, X, dtype=float)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return validate_data(self, X, dtype=float, reset=False)


class MagnitudeSpectrum(TransformerMixin, BaseEstimator):
    """Row-wise Fourier magnitude spectrum, ``N`` samples -> ``N/2`` bins."""

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float)
        if X.shape[1] % 2:
            raise ValueError(f"segment length must be even, got {X.shape[1]}")
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = validate_data(self, X, dtype=float, reset=False)
        return magnitude_spectrum(X)


class ClassPCA(TransformerMixin, BaseEstimator):
    """Supervised reduction onto the union of per-class principal subspaces.

    Parameters
    ----------
    n_per_class : int, default=5
        Principal directions kept from each class, between 5 and 15.
    """

    def __init__(self, n_per_class: int = 5):
        self.n_per_class = n_per_class

    def fit(self, X, y):
        X = validate_data(self, X, dtype=float)
        self.basis_ = fit_pca_basis(X, y, n_per_class=self.n_per_class)
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = validate_data(self, X, dtype=float, reset=False)
        return project(self.basis_, X)


class PhaseSpaceCount(TransformerMixin, BaseEstimator):
    """Number of visited phase-space boxes as a single feature.

    Parameters
    ----------
    method : {'psa', 'psm'}
    fs : int, default=100
        Sampling rate; sets the 0.5 s PSA delay.
    """

    def __init__(self, method: str = "psa", fs: int = 100):
        self.method = method
        self.fs = fs

    def fit(self, X, y=None):
        if self.method not in ("psa", "psm"):
            raise ValueError(f"method must be 'psa' or 'psm', got {self.method!r}")
        validate_data(self, X, dtype=float)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = validate_data(self, X, dtype=float, reset=False)
        if self.method == "psa":
            counts = [psa_count(row, self.fs).visited for row in X]
        else:
            counts = [psm_count(row).visited for row in X]
        return np.asarray(counts, dtype=float)[:, None]


REPRESENTATIONS = ("time", "spectrum", "pca", "psa", "psm")


def make_representation(kind: str, n_per_class: int = 5, fs: int = 100) -> list:
    """Pipeline steps ``[(name, transformer), ...]`` mapping raw segments to ``kind``."""
    if kind == "time":
        return [("time", TimeDomain())]
    if kind == "spectrum":
        return [("spectrum", MagnitudeSpectrum())]
    if kind == "pca":
        return [("spectrum", MagnitudeSpectrum()), ("pca", ClassPCA(n_per_class))]
    if kind in ("psa", "psm"):
        return [(kind, PhaseSpaceCount(kind, fs))]
    raise ValueError(f"unknown representation {kind!r}; expected one of {REPRESENTATIONS}")


def representation_dim(kind: str, segment_len: int, n_per_class: int = 5, n_classes: int = 3) -> int:
    """Nominal feature dimension of a representation (PCA assumes full rank)."""
    if kind == "time":
        return segment_len
    if kind == "spectrum":
        return segment_len // 2
    if kind == "pca":
        return min(n_per_class * n_classes, segment_len // 2)
    if kind in ("psa", "psm"):
        return 1
    raise ValueError(f"unknown representation {kind!r}")

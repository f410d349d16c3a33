"""Hyperparameter grids, the hold-out / cross-validation partition, grid search
and 5-fold cross-validated evaluation.

The data is split once: one third is held out for choosing hyperparameters
(70% ``tr`` for fitting, 30% ``v`` for scoring), the remaining two thirds form
five folds. After the grid search, ``tr`` and ``v`` are discarded and the
chosen setting is evaluated by cross-validation over the folds only.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist
from sklearn.base import clone

from .ecoc import canonical_classes
from .metrics import ConfusionMatrix, accuracy, mean_stderr
from .svm import KernelSpec

N_FOLDS = 5
HOLDOUT_FRACTION = 1 / 3
TRAIN_FRACTION = 0.7
MIN_ITEMS = 30

C_POWERS = tuple(range(0, 5))
GAMMA_STEPS = tuple(range(-2, 3))
POLY_C_STEPS = tuple(range(-3, 4))
POLY_DEGREES = tuple(range(2, 7))
FAMILIES = ("linear", "rbf", "poly")

WORKERS_ENV = "ECGSVM_WORKERS"


def default_n_jobs() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------- partition


@dataclass(frozen=True)
class PartitionPlan:
    tr: np.ndarray
    v: np.ndarray
    folds: Tuple[np.ndarray, ...]
    seed: int

    @property
    def n_items(self) -> int:
        return self.tr.size + self.v.size + sum(f.size for f in self.folds)

    def fold_train(self, k: int) -> np.ndarray:
        return np.sort(np.concatenate([f for i, f in enumerate(self.folds) if i != k]))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tr": self.tr.tolist(),
            "v": self.v.tolist(),
            "folds": [f.tolist() for f in self.folds],
        }


def _apportion(total: int, sizes: Sequence[int]) -> np.ndarray:
    """Split ``total`` proportionally to ``sizes`` by largest remainder (ties to lower index)."""
    sizes = np.asarray(sizes, dtype=float)
    quota = total * sizes / sizes.sum()
    base = np.floor(quota).astype(int)
    short = total - base.sum()
    order = np.argsort(-(quota - base), kind="stable")
    base[order[:short]] += 1
    return base


def partition(n_items: int, labels, seed: int, n_folds: int = N_FOLDS) -> PartitionPlan:
    """Stratified split into ``tr`` / ``v`` (the held-out third) and ``n_folds`` CV folds.

    Every class is shuffled with ``numpy.random.default_rng(seed)``; its share
    of the held-out third and of ``tr`` is allotted by largest remainder so the
    totals are ``round(n / 3)`` and ``round(0.7 * round(n / 3))`` exactly. The
    CV items are dealt round-robin into folds, class after class, so fold sizes
    and per-class fold counts differ by at most one.
    """
    labels = np.asarray(labels).astype(str)
    if labels.size != n_items:
        raise ValueError(f"got {labels.size} labels for {n_items} items")
    if n_items < MIN_ITEMS:
        raise ValueError(f"need at least {MIN_ITEMS} items to partition, got {n_items}")
    classes = canonical_classes(labels)
    rng = np.random.default_rng(seed)
    members = [rng.permutation(np.flatnonzero(labels == c)) for c in classes]
    sizes = [m.size for m in members]

    n_hold = int(round(n_items * HOLDOUT_FRACTION))
    n_tr = int(round(n_hold * TRAIN_FRACTION))
    hold = _apportion(n_hold, sizes)
    tr_counts = _apportion(n_tr, hold)

    tr, v, cv = [], [], []
    for c, m, h, t in zip(classes, members, hold, tr_counts):
        if t < 1 or h - t < 1 or m.size - h < n_folds:
            raise ValueError(f"class {c!r} with {m.size} items is too small to stratify")
        tr.append(m[:t])
        v.append(m[t:h])
        cv.append(m[h:])

    folds: List[List[int]] = [[] for _ in range(n_folds)]
    k = 0
    for m in cv:
        for idx in m:
            folds[k % n_folds].append(int(idx))
            k += 1
    return PartitionPlan(
        tr=np.sort(np.concatenate(tr)),
        v=np.sort(np.concatenate(v)),
        folds=tuple(np.sort(np.array(f, dtype=int)) for f in folds),
        seed=seed,
    )


# ------------------------------------------------------------------------- grids


def d_mean(X, y) -> float:
    """Mean Euclidean distance over all pairs of points with different labels."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"d_mean needs exactly two labels, got {classes.size}")
    return float(cdist(X[y == classes[0]], X[y == classes[1]]).mean())


def c_grid(family: str, dmean: float | None = None) -> List[float]:
    if family == "linear":
        if dmean is None or not dmean > 0:
            raise ValueError("linear C grid needs a positive d_mean")
        return [10.0**n / dmean for n in C_POWERS]
    if family in ("rbf", "poly"):
        return [10.0**n for n in C_POWERS]
    raise ValueError(f"unknown kernel family {family!r}")


def gamma_start(dmean: float) -> float:
    if not dmean > 0:
        raise ValueError("d_mean must be positive")
    return -np.log10(dmean)


def gamma_grid(dmean: float) -> List[float]:
    """``10**(gamma_start + k)`` for integer ``k`` in [-2, 2]."""
    g0 = gamma_start(dmean)
    return [10.0 ** (g0 + k) for k in GAMMA_STEPS]


def poly_c_start(X) -> float:
    sq = np.einsum("ij,ij->i", np.atleast_2d(np.asarray(X, dtype=float)), np.atleast_2d(np.asarray(X, dtype=float)))
    top = float(sq.max()) if sq.size else 0.0
    if top == 0.0:
        raise ValueError("all training vectors are zero")
    return 1.0 / top


def poly_grid(X) -> List[Tuple[float, int]]:
    """``(c, d)`` pairs: ``c = c_start * 2**(2k)``, ``k`` in -3..3, ``d`` in 2..6."""
    c0 = poly_c_start(X)
    return [(c0 * 2.0 ** (2 * k), d) for d in POLY_DEGREES for k in POLY_C_STEPS]


@dataclass(frozen=True, order=True)
class GridPoint:
    """One hyperparameter setting, relative to the data it is trained on.

    Absolute values are resolved per binary problem: ``d_mean`` scales the
    linear-kernel C and the RBF width; the largest squared norm scales the
    polynomial ``c``. Ordering of GridPoints is the tie-break order of the
    search (smaller C first, then smaller gamma, or smaller d then c).
    """

    family: str
    c_power: int = 0
    degree: int = 0
    step: int = 0  # gamma step for rbf, c step for poly

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"kernel family must be one of {FAMILIES}, got {self.family!r}")
        if self.c_power not in C_POWERS:
            raise ValueError(f"c_power must be in {C_POWERS}")
        if self.family == "rbf" and self.step not in GAMMA_STEPS:
            raise ValueError(f"rbf step must be in {GAMMA_STEPS}")
        if self.family == "poly" and (self.step not in POLY_C_STEPS or self.degree not in POLY_DEGREES):
            raise ValueError("poly grid point outside the c/d grid")

    def resolve(self, X, y) -> Tuple[float, KernelSpec]:
        """Absolute ``(C, KernelSpec)`` for training data ``(X, y)``."""
        if self.family == "linear":
            return c_grid("linear", d_mean(X, y))[self.c_power], KernelSpec.linear()
        C = c_grid(self.family)[self.c_power]
        if self.family == "rbf":
            return C, KernelSpec.rbf(gamma_grid(d_mean(X, y))[self.step - GAMMA_STEPS[0]])
        c = poly_c_start(X) * 2.0 ** (2 * self.step)
        return C, KernelSpec.polynomial(c, self.degree)

    def describe(self) -> str:
        if self.family == "linear":
            return f"linear C=10^{self.c_power}/Dmean"
        if self.family == "rbf":
            return f"rbf C=10^{self.c_power} gamma=10^(gamma_start{self.step:+d})"
        return f"poly C=10^{self.c_power} d={self.degree} c=c_start*2^{2 * self.step}"

    def to_dict(self) -> dict:
        return {"family": self.family, "c_power": self.c_power, "degree": self.degree, "step": self.step}


def parameter_grid(family: str) -> List[GridPoint]:
    """All grid points of a family, in tie-break order."""
    if family == "linear":
        pts = [GridPoint("linear", n) for n in C_POWERS]
    elif family == "rbf":
        pts = [GridPoint("rbf", n, step=k) for n in C_POWERS for k in GAMMA_STEPS]
    elif family == "poly":
        pts = [GridPoint("poly", n, d, k) for n in C_POWERS for d in POLY_DEGREES for k in POLY_C_STEPS]
    else:
        raise ValueError(f"unknown kernel family {family!r}")
    return sorted(pts)


# -------------------------------------------------------------------- grid search


class GridPointError(RuntimeError):
    def __init__(self, grid_point: GridPoint, cause: BaseException):
        self.grid_point = grid_point
        super().__init__(f"training failed at {grid_point.describe()}: {cause}")


@dataclass(frozen=True)
class GridSearchResult:
    best: GridPoint
    scores: Tuple[Tuple[GridPoint, float], ...]

    @property
    def best_score(self) -> float:
        return dict(self.scores)[self.best]


def _score_point(make_estimator, gp, X_tr, y_tr, X_v, y_v) -> float:
    try:
        est = make_estimator(gp).fit(X_tr, y_tr)
        return float(np.mean(est.predict(X_v) == y_v))
    except Exception as exc:  # surfaced with the offending grid point attached
        raise GridPointError(gp, exc) from exc


def grid_search(
    X_tr,
    y_tr,
    X_v,
    y_v,
    make_estimator: Callable[[GridPoint], object],
    grid: Sequence[GridPoint] | str = "rbf",
    n_jobs: Optional[int] = None,
) -> GridSearchResult:
    """Fit ``make_estimator(point)`` on ``tr`` for each grid point; keep the best ``v`` accuracy.

    Ties are resolved in favour of the earliest point in ``GridPoint`` order.
    """
    points = parameter_grid(grid) if isinstance(grid, str) else sorted(grid)
    if not points:
        raise ValueError("empty grid")
    y_tr = np.asarray(y_tr).astype(str)
    y_v = np.asarray(y_v).astype(str)
    n_jobs = default_n_jobs() if n_jobs is None else n_jobs
    scores = Parallel(n_jobs=n_jobs)(
        delayed(_score_point)(make_estimator, gp, X_tr, y_tr, X_v, y_v) for gp in points
    )
    best = points[int(np.argmax(scores))]
    return GridSearchResult(best, tuple(zip(points, scores)))


# ------------------------------------------------------------------------------ CV


@dataclass(frozen=True)
class FoldReport:
    """Cross-validated accuracy and per-class sensitivity.

    ``sensitivities`` maps each rhythm class to its per-fold values; classes
    absent from the task are not listed.
    """

    fold_accuracies: Tuple[float, ...]
    sensitivities: Dict[str, Tuple[float, ...]]
    confusions: Tuple[ConfusionMatrix, ...]
    mean_accuracy: float
    stderr: float
    grid_point: Optional[GridPoint] = None
    extra: Dict[str, object] = field(default_factory=dict)

    def mean_sensitivity(self, cls) -> Optional[float]:
        vals = self.sensitivities.get(str(cls))
        return None if vals is None else float(np.mean(vals))


def rhythm_sensitivity(rhythm, y_true, y_pred) -> Dict[str, float]:
    """Per rhythm class: share of its items whose task label was predicted correctly."""
    rhythm = np.asarray(rhythm).astype(str)
    correct = np.asarray(y_true).astype(str) == np.asarray(y_pred).astype(str)
    return {c: float(correct[rhythm == c].mean()) for c in ("SR", "VT", "VF") if np.any(rhythm == c)}


def _fit_fold(estimator, X, y, train, test):
    est = clone(estimator).fit(X[train], y[train])
    return est.predict(X[test])


def cross_validate(
    X,
    y,
    plan: PartitionPlan,
    estimator,
    rhythm=None,
    grid_point: Optional[GridPoint] = None,
    n_jobs: Optional[int] = None,
) -> FoldReport:
    """Train on four folds, test on the fifth, for each fold in turn.

    Only ``plan.folds`` are touched; ``plan.tr`` and ``plan.v`` are never read.
    ``rhythm`` gives the original SR/VT/VF label of each item when the task
    merges classes (e.g. non-VF vs VF); sensitivities are reported per rhythm.
    """
    X = np.asarray(X)
    y = np.asarray(y).astype(str)
    rhythm = y if rhythm is None else np.asarray(rhythm).astype(str)
    labels = canonical_classes(y)
    for k, fold in enumerate(plan.folds):
        missing = set(labels) - set(y[fold])
        if missing:
            raise ValueError(f"fold {k} lacks classes {sorted(missing)}")
    n_jobs = default_n_jobs() if n_jobs is None else n_jobs
    preds = Parallel(n_jobs=n_jobs)(
        delayed(_fit_fold)(estimator, X, y, plan.fold_train(k), fold) for k, fold in enumerate(plan.folds)
    )
    accs, confs = [], []
    sens: Dict[str, List[float]] = {}
    for fold, pred in zip(plan.folds, preds):
        cm = ConfusionMatrix.from_pairs(y[fold], pred, labels)
        confs.append(cm)
        accs.append(accuracy(cm))
        for c, s in rhythm_sensitivity(rhythm[fold], y[fold], pred).items():
            sens.setdefault(c, []).append(s)
    mean, se = mean_stderr(accs)
    return FoldReport(
        fold_accuracies=tuple(accs),
        sensitivities={c: tuple(v) for c, v in sens.items()},
        confusions=tuple(confs),
        mean_accuracy=mean,
        stderr=se,
        grid_point=grid_point,
    )

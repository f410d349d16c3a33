"""Error-correcting output codes over binary SVMs.

Column ``n`` of an ``M x N`` coding matrix defines binary classifier ``n``: it
is trained only on classes whose entry is nonzero, with the entry's sign as
the label. A sample is assigned to the class ``m`` minimizing
``sum_n loss(w[m, n] * f_n(x))``; ties go to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .svm import BinarySvmModel, KernelSpec, smo_train

# rows SR, VT, VF; columns: three one-vs-one then three one-vs-rest pairs
DEFAULT_W = np.array(
    [
        [1, 1, -1, 1, 1, 0],
        [1, -1, 1, 0, -1, 1],
        [-1, 1, 1, -1, 0, -1],
    ],
    dtype=int,
)
DEFAULT_CLASSES = ("SR", "VT", "VF")

# canonical class order for deriving a coding matrix from labels
_CLASS_ORDER = ("SR", "nonVF", "VT", "VF")


def canonical_classes(labels) -> list:
    """Distinct labels in SR, nonVF, VT, VF order (anything else after, sorted)."""
    rank = {c: i for i, c in enumerate(_CLASS_ORDER)}
    return sorted(set(map(str, np.asarray(labels).ravel())), key=lambda c: (rank.get(c, len(rank)), c))


@dataclass(frozen=True)
class CodingMatrix:
    """Entries in {-1, 0, +1}; one row per class, one column per classifier."""

    W: np.ndarray
    classes: Tuple[str, ...]

    def __post_init__(self):
        W = np.array(self.W, dtype=int)
        if W.ndim != 2:
            raise ValueError("coding matrix must be 2-d")
        if not np.all(np.isin(W, (-1, 0, 1))):
            raise ValueError("coding matrix entries must be -1, 0 or +1")
        classes = tuple(str(c) for c in self.classes)
        if len(classes) != W.shape[0] or len(set(classes)) != len(classes):
            raise ValueError("need one distinct class name per row")
        for n in range(W.shape[1]):
            col = W[:, n]
            if not (np.any(col > 0) and np.any(col < 0)):
                raise ValueError(f"column {n} needs at least one +1 and one -1 entry")
        for a, b in combinations(range(W.shape[0]), 2):
            if np.array_equal(W[a], W[b]):
                raise ValueError(f"rows {a} and {b} are identical")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "classes", classes)

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def n_columns(self) -> int:
        return self.W.shape[1]

    @classmethod
    def default(cls) -> "CodingMatrix":
        return cls(DEFAULT_W, DEFAULT_CLASSES)

    @classmethod
    def binary(cls, classes: Sequence[str]) -> "CodingMatrix":
        """Single classifier, first class positive."""
        return cls(np.array([[1], [-1]]), tuple(classes))

    @classmethod
    def for_labels(cls, labels) -> "CodingMatrix":
        present = canonical_classes(labels)
        if tuple(present) == DEFAULT_CLASSES:
            return cls.default()
        if len(present) == 2:
            return cls.binary(present)
        raise ValueError(f"no default coding matrix for classes {present}")

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, d: dict) -> "CodingMatrix":
        return cls(np.array(d["W"], dtype=int), tuple(d["classes"]))


# ------------------------------------------------------------------------ losses

def _hinge(z):
    return np.maximum(1.0 - z, 0.0)


def _hamming(z):
    return (1.0 - np.sign(z)) / 2.0


def _exponential(z):
    return np.exp(-z)


def _linear(z):
    return -np.asarray(z, dtype=float)


LOSSES: dict[str, Callable] = {
    "hinge": _hinge,
    "hamming": _hamming,
    "exponential": _exponential,
    "linear": _linear,
}


def loss_eval(loss: str, z):
    try:
        fn = LOSSES[loss]
    except KeyError:
        raise ValueError(f"unknown loss {loss!r}; expected one of {sorted(LOSSES)}") from None
    out = fn(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def row_losses(F, coding: CodingMatrix, loss: str = "hinge") -> np.ndarray:
    """Total loss per class, shape (n_samples, n_classes). Zero entries count as ``loss(0)``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[1] != coding.n_columns:
        raise ValueError(f"expected {coding.n_columns} decision values, got {F.shape[1]}")
    if not np.all(np.isfinite(F)):
        raise ValueError("decision values must be finite")
    Z = F[:, None, :] * coding.W[None, :, :]
    return loss_eval(loss, Z).sum(axis=2)


def decode_indices(F, coding: CodingMatrix, loss: str = "hinge") -> np.ndarray:
    return np.argmin(row_losses(F, coding, loss), axis=1)


def decode(decision_values, coding: Optional[CodingMatrix] = None, loss: str = "hinge") -> str:
    """Class label of one vector of ``N`` decision values."""
    coding = CodingMatrix.default() if coding is None else coding
    f = np.asarray(decision_values, dtype=float)
    if f.ndim != 1:
        raise ValueError("decode expects a single vector of decision values")
    return coding.classes[int(decode_indices(f[None, :], coding, loss)[0])]


def min_row_hamming(coding) -> float:
    """Smallest generalized Hamming distance between two rows.

    A position contributes 1 when both entries are nonzero and differ, 1/2
    when exactly one of them is zero, 0 otherwise.
    """
    W = coding.W if isinstance(coding, CodingMatrix) else np.asarray(coding)
    best = np.inf
    for a, b in combinations(range(W.shape[0]), 2):
        ra, rb = W[a], W[b]
        both = (ra != 0) & (rb != 0)
        one = (ra != 0) ^ (rb != 0)
        d = np.sum(both & (ra != rb)) + 0.5 * np.sum(one)
        best = min(best, float(d))
    return best


# ------------------------------------------------------------------------ models

@dataclass(frozen=True)
class EcocModel:
    models: Tuple[BinarySvmModel, ...]
    coding: CodingMatrix
    loss: str = "hinge"
    representation: Optional[dict] = None

    def decision_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([m.decision_function(X) for m in self.models])

    def predict(self, X) -> np.ndarray:
        idx = decode_indices(self.decision_values(X), self.coding, self.loss)
        return np.array(self.coding.classes)[idx]

    def to_dict(self) -> dict:
        return {
            "coding": self.coding.to_dict(),
            "loss": self.loss,
            "representation": self.representation,
            "models": [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EcocModel":
        return cls(
            models=tuple(BinarySvmModel.from_dict(m) for m in d["models"]),
            coding=CodingMatrix.from_dict(d["coding"]),
            loss=d["loss"],
            representation=d.get("representation"),
        )


def column_subset(y, coding: CodingMatrix, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rows used by classifier ``n`` and their +/-1 labels."""
    y = np.asarray(y).astype(str)
    code = dict(zip(coding.classes, coding.W[:, n]))
    w = np.array([code.get(lab, 0) for lab in y])
    mask = w != 0
    return np.flatnonzero(mask), w[mask].astype(float)


def train_ecoc(
    X,
    y,
    coding: Optional[CodingMatrix] = None,
    column_params=None,
    loss: str = "hinge",
    tol: float = 1e-3,
    max_iter: Optional[int] = None,
    random_state: int = 0,
    n_jobs: Optional[int] = None,
    trainer: Callable = smo_train,
) -> EcocModel:
    """Train one binary SVM per coding-matrix column.

    ``column_params`` is either a list of ``(C, KernelSpec)`` pairs, one per
    column, or a callable ``(X_n, y_n) -> (C, KernelSpec)`` evaluated on each
    column's own training subset.
    """
    X = np.asarray(X, dtype=float)
    coding = CodingMatrix.for_labels(y) if coding is None else coding
    y = np.asarray(y).astype(str)
    unknown = set(np.unique(y)) - set(coding.classes)
    if unknown:
        raise ValueError(f"labels {sorted(unknown)} are not rows of the coding matrix")
    if column_params is None:
        column_params = [(1.0, KernelSpec.rbf(1.0))] * coding.n_columns

    jobs = []
    for n in range(coding.n_columns):
        idx, yn = column_subset(y, coding, n)
        if idx.size == 0 or not (np.any(yn > 0) and np.any(yn < 0)):
            raise ValueError(f"column {n} has no training data for one of its sides")
        Xn = X[idx]
        C, spec = column_params(Xn, yn) if callable(column_params) else column_params[n]
        jobs.append((Xn, yn, C, spec))

    models = Parallel(n_jobs=n_jobs)(
        delayed(trainer)(Xn, yn, C, spec, tol=tol, max_iter=max_iter, random_state=random_state)
        for Xn, yn, C, spec in jobs
    )
    return EcocModel(tuple(models), coding, loss)


def classify(model: EcocModel, x) -> str:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("classify expects a single feature vector")
    return str(model.predict(x[None, :])[0])


class EcocClassifier(ClassifierMixin, BaseEstimator):
    """Multiclass SVM via a coding matrix and loss-based decoding.

    Parameters
    ----------
    kernel, C, gamma, coef, degree
        Shared binary-SVM settings, used when ``grid_point`` is None.
    grid_point : object with ``resolve(X, y) -> (C, KernelSpec)``, optional
        Relative hyperparameters resolved on each column's training subset
        (see :class:`ecgsvm.tune.GridPoint`).
    loss : {'hinge', 'hamming', 'exponential', 'linear'}, default='hinge'
    coding : CodingMatrix, optional
        Defaults to the 3 x 6 matrix for SR/VT/VF, or a single column for two classes.
    tol, max_iter, random_state
        Passed to :func:`ecgsvm.svm.smo_train`.
    n_jobs : int, optional
        Columns trained in parallel through joblib.

    Attributes
    ----------
    classes_ : ndarray of str
        Row order of the coding matrix.
    model_ : EcocModel
    """

    def __init__(self, kernel="rbf", C=1.0, gamma=1.0, coef=1.0, degree=2, grid_point=None,
                 loss="hinge", coding=None, tol=1e-3, max_iter=None, random_state=0, n_jobs=None):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.coef = coef
        self.degree = degree
        self.grid_point = grid_point
        self.loss = loss
        self.coding = coding
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=float)
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        y = np.asarray(y).astype(str)
        coding = self.coding if self.coding is not None else CodingMatrix.for_labels(y)
        if self.grid_point is not None:
            params = self.grid_point.resolve
        else:
            spec = KernelSpec(self.kernel, gamma=self.gamma, coef=self.coef, degree=self.degree)
            params = [(self.C, spec)] * coding.n_columns
        self.model_ = train_ecoc(X, y, coding, params, loss=self.loss, tol=self.tol,
                                 max_iter=self.max_iter, random_state=self.random_state,
                                 n_jobs=self.n_jobs)
        self.classes_ = np.array(coding.classes)
        return self

    def decision_values(self, X) -> np.ndarray:
        """Raw binary outputs ``f_n(x)``, shape (n_samples, n_columns)."""
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=float, reset=False)
        return self.model_.decision_values(X)

    def decision_function(self, X) -> np.ndarray:
        """Negated total loss per class; its argmax is the prediction."""
        return -row_losses(self.decision_values(X), self.model_.coding, self.loss)

    def decode(self, F) -> np.ndarray:
        """Labels for precomputed decision values ``F``."""
        check_is_fitted(self, "model_")
        return self.classes_[decode_indices(F, self.model_.coding, self.loss)]

    def predict(self, X) -> np.ndarray:
        return self.decode(self.decision_values(X))

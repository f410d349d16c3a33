"""Binary soft-margin kernel SVM trained by sequential minimal optimization.

The dual problem solved is::

    min_a  1/2 a^T Q a - sum(a)    s.t.  0 <= a_i <= C,  sum(y_i a_i) = 0

with ``Q_ij = y_i y_j K(x_i, x_j)``. Each step updates the pair of multipliers
that most violates the KKT conditions (first index by maximal violation,
second by the largest guaranteed decrease of the objective), exactly as in
LIBSVM's solver. Iteration stops when the violation gap drops below ``tol``.
The decision function is ``f(x) = sum_i a_i y_i K(x, x_i) + b``.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted, validate_data

KERNELS = ("linear", "poly", "rbf")

_TAU = 1e-12


class ConvergenceError(RuntimeError):
    """SMO hit its iteration cap before the KKT gap fell below ``tol``."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice and its parameters.

    ``linear``: <x, y>; ``poly``: (1 + c <x, y>)^d; ``rbf``: exp(-gamma ||x - y||^2).
    """

    kind: str = "rbf"
    gamma: float = 1.0
    coef: float = 1.0
    degree: int = 2

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.kind == "poly":
            if not self.coef > 0:
                raise ValueError(f"polynomial coefficient c must be positive, got {self.coef}")
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"polynomial degree must be an integer >= 1, got {self.degree}")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def polynomial(cls, c: float, d: int) -> "KernelSpec":
        return cls("poly", coef=float(c), degree=int(d))

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls("rbf", gamma=float(gamma))

    def matrix(self, A, B) -> np.ndarray:
        """Gram matrix ``K[i, j] = K(A[i], B[j])``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if self.kind == "rbf":
            sq = (
                np.einsum("ij,ij->i", A, A)[:, None]
                + np.einsum("ij,ij->i", B, B)[None, :]
                - 2.0 * (A @ B.T)
            )
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        dot = A @ B.T
        if self.kind == "linear":
            return dot
        return (1.0 + self.coef * dot) ** int(self.degree)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "coef": self.coef, "degree": int(self.degree)}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["kind"], float(d["gamma"]), float(d["coef"]), int(d["degree"]))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {y.size}")
    if spec.kind == "rbf":
        d = x - y
        return float(np.exp(-spec.gamma * np.dot(d, d)))
    dot = float(np.dot(x, y))
    if spec.kind == "linear":
        return dot
    return float((1.0 + spec.coef * dot) ** int(spec.degree))


@dataclass(frozen=True)
class BinarySvmModel:
    """Trained binary SVM; only vectors with nonzero multipliers are kept.

    Attributes
    ----------
    support_vectors : ndarray of shape (n_sv, n_features)
    alpha : ndarray of shape (n_sv,)
        Lagrange multipliers, ``0 < alpha <= C``.
    labels : ndarray of shape (n_sv,)
        ``+1`` / ``-1`` training labels of the support vectors.
    bias : float
    kernel : KernelSpec
    C : float
    n_iter : int
        SMO steps taken.
    """

    support_vectors: np.ndarray
    alpha: np.ndarray
    labels: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    n_iter: int = 0
    dual_coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dual_coef", self.alpha * self.labels)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return self.kernel.matrix(X, self.support_vectors) @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "bias": self.bias,
            "n_iter": self.n_iter,
            "alpha": self.alpha.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "support_vectors": self.support_vectors.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinarySvmModel":
        sv = np.array(d["support_vectors"], dtype=float)
        if sv.size == 0:
            sv = sv.reshape(0, 0)
        return cls(
            support_vectors=sv,
            alpha=np.array(d["alpha"], dtype=float),
            labels=np.array(d["labels"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            C=float(d["C"]),
            n_iter=int(d["n_iter"]),
        )


def decision_value(model: BinarySvmModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if model.support_vectors.shape[0] and x.size != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.size}")
    return float(model.decision_function(x[None, :])[0])


def sign(f) -> np.ndarray:
    """Sign with ``sign(0) = +1``."""
    return np.where(np.asarray(f) >= 0, 1, -1)


def predict(model: BinarySvmModel, x) -> int:
    return int(sign(decision_value(model, x)))


class _KernelRows:
    """LRU cache of Gram-matrix rows under a byte budget."""

    def __init__(self, X: np.ndarray, kernel: KernelSpec, budget_bytes: int):
        self.X = X
        self.kernel = kernel
        self.capacity = max(2, budget_bytes // max(1, X.shape[0] * 8))
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        if kernel.kind == "rbf":
            self.diag = np.ones(X.shape[0])
        else:
            self.diag = np.array([kernel_eval(kernel, x, x) for x in X])

    def __getitem__(self, i: int) -> np.ndarray:
        row = self._rows.get(i)
        if row is not None:
            self._rows.move_to_end(i)
            return row
        row = self.kernel.matrix(self.X[i:i + 1], self.X)[0]
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


def smo_train(
    X,
    y,
    C: float,
    kernel: KernelSpec,
    tol: float = 1e-3,
    max_iter: Optional[int] = None,
    random_state: int = 0,
    cache_bytes: int = 64 * 2**20,
) -> BinarySvmModel:
    """Solve the soft-margin SVM dual with SMO.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    y : array-like of shape (n_samples,)
        Labels in ``{-1, +1}``; both must be present.
    C : float
        Box constraint.
    kernel : KernelSpec
    tol : float, default=1e-3
        Stop once the maximal KKT violation gap is below ``tol``.
    max_iter : int, optional
        Cap on SMO steps, default ``max(10**6, 100 * n_samples)``. Exceeding it
        raises :class:`ConvergenceError`.
    random_state : int, default=0
        Seeds the order in which samples are scanned, which decides ties in
        working-pair selection. Same seed and same input order give a
        bit-identical model.
    cache_bytes : int
        Budget for cached kernel rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be 2-d with one row per label")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both classes")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    n = y.size
    if max_iter is None:
        max_iter = max(10**6, 100 * n)

    perm = np.random.default_rng(random_state).permutation(n)
    Xp, yp = X[perm], y[perm]
    rows = _KernelRows(Xp, kernel, cache_bytes)
    diag = rows.diag

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective, Q a - e
    pos = yp > 0
    it = 0
    while True:
        ygrad = -yp * grad
        at_upper = alpha >= C
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)

        masked = np.where(up, ygrad, -np.inf)
        i = int(np.argmax(masked))
        g_max = masked[i]
        g_min = np.min(ygrad[low]) if low.any() else np.inf
        if g_max - g_min < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT gap {g_max - g_min:.3g})"
            )

        k_i = rows[i]
        b_diff = g_max - ygrad
        cand = low & (b_diff > 0)
        quad = diag[i] + diag - 2.0 * k_i
        quad = np.where(quad > 0, quad, _TAU)
        gain = np.where(cand, -(b_diff * b_diff) / quad, np.inf)
        j = int(np.argmin(gain))
        k_j = rows[j]

        yi, yj = yp[i], yp[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if yi != yj:
            qc = diag[i] + diag[j] - 2.0 * k_i[j]
            if qc <= 0:
                qc = _TAU
            delta = (-grad[i] - grad[j]) / qc
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            qc = diag[i] + diag[j] - 2.0 * k_i[j]
            if qc <= 0:
                qc = _TAU
            delta = (grad[i] - grad[j]) / qc
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += yp * (yi * (ai - ai_old) * k_i + yj * (aj - aj_old) * k_j)
        it += 1

    bias = -_rho(alpha, grad, yp, C)
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    alpha = alpha[inv]
    keep = alpha > 0
    return BinarySvmModel(
        support_vectors=X[keep].copy(),
        alpha=alpha[keep],
        labels=y[keep].copy(),
        bias=float(bias),
        kernel=kernel,
        C=float(C),
        n_iter=it,
    )


def _rho(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, C: float) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= C
    # bounds on rho implied by the multipliers sitting at 0 or C
    ub_mask = np.where(y > 0, ~at_upper, at_upper)
    lb_mask = ~ub_mask
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


class BinarySVC(ClassifierMixin, BaseEstimator):
    """Two-class kernel SVM with a scikit-learn interface.

    Parameters
    ----------
    kernel : {'linear', 'poly', 'rbf'}, default='rbf'
    C : float, default=1.0
    gamma : float, default=1.0
        RBF width.
    coef : float, default=1.0
        Polynomial scale ``c`` in ``(1 + c <x, y>)^d``.
    degree : int, default=2
    tol : float, default=1e-3
    max_iter : int, optional
    random_state : int, default=0

    Attributes
    ----------
    classes_ : ndarray of shape (2,)
        Sorted labels; ``classes_[1]`` is the positive class.
    model_ : BinarySvmModel
    """

    def __init__(self, kernel="rbf", C=1.0, gamma=1.0, coef=1.0, degree=2, tol=1e-3,
                 max_iter=None, random_state=0):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.coef = coef
        self.degree = degree
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, gamma=self.gamma, coef=self.coef, degree=self.degree)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=float)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError(f"BinarySVC needs exactly 2 classes, got {len(self.classes_)}")
        signed = np.where(y == self.classes_[1], 1.0, -1.0)
        self.model_ = smo_train(X, signed, self.C, self._kernel_spec(), tol=self.tol,
                                max_iter=self.max_iter, random_state=self.random_state)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=float, reset=False)
        return self.model_.decision_function(X)

    def predict(self, X):
        f = self.decision_function(X)
        return self.classes_[(sign(f) > 0).astype(int)]

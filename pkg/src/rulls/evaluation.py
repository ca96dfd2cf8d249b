"""Downstream checks for feature matrices: linear classification, k-means, NMI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from .errors import ConfigError, DataError
from .featurize import SparseFeatureMatrix

__all__ = [
    "ClassifierModel",
    "ClusterAssignment",
    "train_linear_classifier",
    "predict",
    "accuracy",
    "kmeans",
    "nmi",
]


@dataclass(frozen=True)
class ClassifierModel:
    """One-vs-rest linear model; ``classes[c]`` is the label scored by row ``c``."""

    weights: np.ndarray
    bias: np.ndarray
    classes: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.classes.size)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: list = field(default_factory=list)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]

    @property
    def n_iter(self) -> int:
        return len(self.inertia_history)


def _as_csr(features) -> sp.csr_matrix:
    if isinstance(features, SparseFeatureMatrix):
        X = features.to_scipy()
    elif sp.issparse(features):
        X = sp.csr_matrix(features)
    else:
        X = sp.csr_matrix(np.asarray(features, dtype=np.float64))
    X = X.astype(np.float64)
    X.sum_duplicates()
    X.sort_indices()
    return X


def _as_matrix(features):
    """Dense arrays pass through; sparse inputs become scipy CSR."""
    if isinstance(features, SparseFeatureMatrix):
        return features.to_scipy()
    if sp.issparse(features):
        return sp.csr_matrix(features, dtype=np.float64)
    return np.asarray(features, dtype=np.float64)


def train_linear_classifier(
    features, labels, epochs: int = 50, lam: float = 1e-4, seed: int = 0, average: bool = True
) -> ClassifierModel:
    """Hinge-loss one-vs-rest linear classifier trained by stochastic subgradient descent.

    Every class gets its own hyperplane; all share one pass order per
    epoch (a fresh permutation drawn from ``seed``) and the step size
    ``1 / (lam * t)`` at global step ``t``. The bias is learned through a
    constant input feature and therefore regularized with the weights.
    With ``average`` the returned model is the mean of the end-of-epoch
    iterates over the second half of training. Results depend on row
    order, as with any SGD.
    """
    X = _as_csr(features)
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DataError(f"{X.shape[0]} feature rows but {y.shape[0] if y.ndim else 0} labels")
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    classes, y_idx = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise DataError("training labels contain a single class")
    targets = -np.ones((y.size, classes.size))
    targets[np.arange(y.size), y_idx] = 1.0
    V = np.zeros((classes.size, X.shape[1] + 1))
    indptr = X.indptr.astype(np.int64)
    indices = X.indices.astype(np.int64)
    rng = np.random.default_rng(seed)
    scale, step = 1.0, 1.0
    first_avg = epochs // 2 if average else epochs - 1
    W = np.zeros_like(V)
    for epoch in range(epochs):
        order = rng.permutation(y.size).astype(np.int64)
        scale, step = kernels.sgd_epoch(indptr, indices, X.data, targets, order, V, scale, lam, step)
        if epoch >= first_avg:
            W += scale * V
    W /= epochs - first_avg
    return ClassifierModel(weights=W[:, :-1].copy(), bias=W[:, -1].copy(), classes=classes)


def decision_scores(model: ClassifierModel, features) -> np.ndarray:
    X = _as_matrix(features)
    if X.shape[1] != model.weights.shape[1]:
        raise DataError(f"model expects {model.weights.shape[1]} features, got {X.shape[1]}")
    return np.asarray(X @ model.weights.T) + model.bias


def predict(model: ClassifierModel, features) -> np.ndarray:
    # argmax returns the first maximum: ties go to the smaller class index
    return model.classes[np.argmax(decision_scores(model, features), axis=1)]


def accuracy(model: ClassifierModel, features, labels) -> float:
    """Fraction of rows whose highest-scoring class equals the label."""
    y = np.asarray(labels)
    if y.size == 0:
        raise DataError("accuracy of an empty test set is undefined")
    pred = predict(model, features)
    if pred.shape[0] != y.shape[0]:
        raise DataError(f"{pred.shape[0]} feature rows but {y.shape[0]} labels")
    return float(np.mean(pred == y))


def _sq_dists(X, x_sq: np.ndarray, C: np.ndarray) -> np.ndarray:
    cross = np.asarray(X @ C.T)
    d = x_sq[:, None] - 2.0 * cross + np.einsum("ij,ij->i", C, C)[None, :]
    return np.maximum(d, 0.0)


def _row_sq_norms(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


def _dense_rows(X, rows) -> np.ndarray:
    out = X[rows]
    return out.toarray() if sp.issparse(out) else np.array(out, dtype=np.float64)


def _kmeanspp(X, x_sq: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: each new centre is the best of a few D^2-weighted candidates."""
    n = X.shape[0]
    trials = 2 + int(math.log(k)) if k > 1 else 1
    centers = [_dense_rows(X, [int(rng.integers(n))])[0]]
    closest = _sq_dists(X, x_sq, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a centre
            cand = rng.choice(n, size=trials, replace=True)
        else:
            cand = np.searchsorted(np.cumsum(closest), rng.random(trials) * total, side="right")
            cand = np.minimum(cand, n - 1)
        cand_d = _sq_dists(X, x_sq, _dense_rows(X, cand))
        pot = np.minimum(closest[:, None], cand_d).sum(axis=0)
        best = int(np.argmin(pot))
        centers.append(_dense_rows(X, [int(cand[best])])[0])
        closest = np.minimum(closest, cand_d[:, best])
    return np.array(centers)


def _update_centroids(X, labels: np.ndarray, k: int, old: np.ndarray):
    counts = np.bincount(labels, minlength=k)
    onehot = sp.csr_matrix((np.ones(labels.size), (labels, np.arange(labels.size))), shape=(k, labels.size))
    sums = onehot @ X
    sums = sums.toarray() if sp.issparse(sums) else np.asarray(sums)
    centroids = old.copy()
    filled = counts > 0
    centroids[filled] = sums[filled] / counts[filled, None]
    return centroids, np.flatnonzero(~filled)


def _lloyd(X, x_sq: np.ndarray, k: int, max_iter: int, rng: np.random.Generator) -> ClusterAssignment:
    n = X.shape[0]
    centroids = _kmeanspp(X, x_sq, k, rng)
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(X, x_sq, centroids)
        new_labels = np.argmin(d, axis=1)
        history.append(float(d[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids, empty = _update_centroids(X, labels, k, centroids)
        if empty.size:
            own = _sq_dists(X, x_sq, centroids)[np.arange(n), labels]
            far_order = np.argsort(-own, kind="stable")
            for c, far in zip(empty, far_order):
                centroids[c] = _dense_rows(X, [int(far)])[0]
    return ClusterAssignment(labels=labels, centroids=centroids, inertia_history=history)


def kmeans(features, k: int, max_iter: int = 300, seed: int = 0, n_init: int = 10) -> ClusterAssignment:
    """Lloyd's algorithm with greedy k-means++ seeding.

    Each of the ``n_init`` runs stops when assignments stop changing or
    after ``max_iter`` rounds; the run with the lowest final inertia wins
    (earliest on ties). An empty cluster is moved onto the point farthest
    from its current centroid. ``inertia_history`` holds the within-cluster
    sum of squares after every assignment step of the winning run.
    """
    X = _as_matrix(features)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    if max_iter < 1 or n_init < 1:
        raise ConfigError(f"max_iter and n_init must be >= 1, got {max_iter}, {n_init}")
    rng = np.random.default_rng(seed)
    x_sq = _row_sq_norms(X)
    best = None
    for _ in range(n_init):
        run = _lloyd(X, x_sq, k, max_iter, rng)
        if best is None or run.inertia < best.inertia:
            best = run
    return best


def nmi(a, b) -> float:
    """Normalized mutual information, ``I(a; b) / sqrt(H(a) H(b))`` in nats.

    Two constant partitions score 1; a constant partition against a
    non-constant one scores 0. The terms are summed in sorted order, which
    makes the value exactly symmetric and invariant to relabeling.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"partitions differ in length: {a.shape} vs {b.shape}")
    n = a.size
    if n == 0:
        raise DataError("nmi of empty partitions is undefined")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ca = np.bincount(ai)
    cb = np.bincount(bi)

    # written as log(n / c) so that nmi(a, a) reproduces H(a) bit for bit
    def entropy(counts):
        return math.fsum(sorted((c / n) * math.log(n / c) for c in counts.tolist()))

    ha, hb = entropy(ca), entropy(cb)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    pairs, nij = np.unique(np.stack([ai, bi]), axis=1, return_counts=True)
    terms = []
    ca_l, cb_l = ca.tolist(), cb.tolist()
    for (i, j), c in zip(pairs.T.tolist(), nij.tolist()):
        terms.append((c / n) * math.log(n * c / (ca_l[i] * cb_l[j])))
    mi = math.fsum(sorted(terms))
    return float(min(1.0, max(0.0, mi / math.sqrt(ha * hb))))

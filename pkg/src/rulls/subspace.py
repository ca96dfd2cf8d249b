"""Local linear subspaces around landmarks, plus the random maps used by the variants.

PCA runs as a thin SVD of the centred neighbourhood (k_eps x m) instead of
an eigendecomposition of the m x m covariance. The spectrum differs only by
the 1/(k_eps - 1) factor, which cancels in the explained-variance ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .dataset import Dataset
from .errors import ConfigError, DegeneracyError

__all__ = [
    "Subspace",
    "Neighborhood",
    "knn_neighborhood",
    "knn_neighborhoods",
    "select_dimension",
    "fit_pca",
    "fit_robust_pca",
    "fit_many",
    "trimmed_members",
    "project",
    "random_projection_matrix",
    "random_projection",
    "subsample_features",
]

# relative slack when comparing cumulative variance with the threshold
_THRESHOLD_RTOL = 1e-12


@dataclass(frozen=True)
class Subspace:
    """Affine subspace: ``coords = basis @ ((x - center) * inv_scale)``.

    ``inv_scale`` is all ones unless the fit used neighbourhood
    normalization, in which case it holds 1/std per feature (0 for
    constant features).
    """

    basis: np.ndarray
    center: np.ndarray
    explained_variance: np.ndarray
    inv_scale: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """The d x m linear map applied to centred rows (basis with the scaling folded in)."""
        return self.basis * self.inv_scale


@dataclass(frozen=True)
class Neighborhood:
    member_indices: np.ndarray
    landmark_index: int


def _as_values(d) -> np.ndarray:
    return d.values if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)


def knn_neighborhoods(values: np.ndarray, landmarks, k_eps: int) -> np.ndarray:
    """Row indices of the ``k_eps`` nearest rows to each landmark, shape ``(L, k_eps)``.

    Ties go to the smaller row index; the landmark itself is always
    included (distance 0, and it wins any tie against a duplicate row with
    a larger index).
    """
    n = values.shape[0]
    if not 1 <= k_eps <= n:
        raise ConfigError(f"k_eps must lie in [1, {n}], got {k_eps}")
    landmarks = np.asarray(landmarks, dtype=np.int64)
    sq = kernels.row_sq_dists(values, landmarks)
    # the landmark goes first even if an earlier row duplicates it
    sq[np.arange(landmarks.size), landmarks] = -1.0
    if k_eps < n:
        # argpartition is not tie-stable, so widen the candidate set to all rows
        # tied with the k-th smallest value before the stable sort
        kth = np.partition(sq, k_eps - 1, axis=1)[:, k_eps - 1 : k_eps]
        cand = sq <= kth
        out = np.empty((landmarks.size, k_eps), dtype=np.int64)
        for a in range(landmarks.size):
            idx = np.flatnonzero(cand[a])
            order = np.argsort(sq[a, idx], kind="stable")[:k_eps]
            out[a] = idx[order]
        return out
    return np.argsort(sq, axis=1, kind="stable")


def knn_neighborhood(d, landmark: int, k_eps: int) -> Neighborhood:
    """The ``k_eps`` rows nearest to row ``landmark`` (itself included)."""
    values = _as_values(d)
    if not 0 <= landmark < values.shape[0]:
        raise ConfigError(f"landmark row {landmark} out of range")
    members = knn_neighborhoods(values, [landmark], k_eps)[0]
    return Neighborhood(member_indices=members, landmark_index=int(landmark))


def select_dimension(eigenvalues, variance_threshold: float) -> int:
    """Smallest d whose leading eigenvalues hold ``variance_threshold`` of the total."""
    if not 0.0 < variance_threshold <= 1.0:
        raise ConfigError(f"variance_threshold must lie in (0, 1], got {variance_threshold}")
    ev = np.asarray(eigenvalues, dtype=np.float64)
    total = ev.sum()
    if not total > 0.0:
        raise DegeneracyError("neighborhood has zero total variance")
    cum = np.cumsum(ev)
    target = variance_threshold * total * (1.0 - _THRESHOLD_RTOL)
    d = int(np.searchsorted(cum, target, side="left")) + 1
    # never count directions that carry no variance
    rank = int(np.count_nonzero(ev > 0))
    return max(1, min(d, rank))


def _sign_fix(vt: np.ndarray) -> np.ndarray:
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def _fit_batch(rows: np.ndarray, variance_threshold: float, normalize: bool) -> list:
    """Fit a stack of neighbourhoods, ``rows`` shaped (L, k, m)."""
    if rows.shape[1] < 2:
        raise DegeneracyError("neighborhood needs at least two points")
    center = rows.mean(axis=1)
    centered = rows - center[:, None, :]
    if normalize:
        std = rows.std(axis=1)
        varies = rows.max(axis=1) > rows.min(axis=1)
        inv_scale = np.zeros_like(std)
        np.divide(1.0, std, out=inv_scale, where=varies & (std > 0))
        centered = centered * inv_scale[:, None, :]
    else:
        inv_scale = np.ones_like(center)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    ev = s * s
    out = []
    for a in range(rows.shape[0]):
        if not ev[a].sum() > 0.0:
            raise DegeneracyError("all neighborhood points are identical")
        d = select_dimension(ev[a], variance_threshold)
        out.append(
            Subspace(
                basis=_sign_fix(vt[a, :d]),
                center=center[a],
                explained_variance=ev[a, :d],
                inv_scale=inv_scale[a],
            )
        )
    return out


def _fit_rows(rows: np.ndarray, variance_threshold: float, normalize: bool) -> Subspace:
    return _fit_batch(rows[None], variance_threshold, normalize)[0]


def fit_many(values: np.ndarray, neighborhoods: np.ndarray, variance_threshold: float,
             normalize: bool, trim_fraction: Optional[float] = None) -> list:
    """Fit one subspace per row of ``neighborhoods`` (L x k member indices).

    ``trim_fraction`` switches to the trimmed robust fit. Results equal
    per-landmark :func:`fit_pca` / :func:`fit_robust_pca` calls.
    """
    rows = values[neighborhoods]
    first = _fit_batch(rows, variance_threshold, normalize)
    if not trim_fraction:
        return first
    k = neighborhoods.shape[1]
    n_trim = _check_trim(trim_fraction, k)
    if n_trim == 0:
        return first
    kept = np.empty((rows.shape[0], k - n_trim, rows.shape[2]))
    for a, sub in enumerate(first):
        kept[a] = rows[a][_keep_after_trim(rows[a], sub, n_trim)]
    return _fit_batch(kept, variance_threshold, normalize)


def fit_pca(d, nb: Neighborhood, variance_threshold: float = 0.95, normalize: bool = False) -> Subspace:
    """Principal subspace of a neighbourhood, keeping enough directions for ``variance_threshold``.

    Each basis row is flipped so its largest-magnitude entry is positive.
    With ``normalize`` the neighbourhood is z-scored per feature before the
    decomposition and the same scaling is applied by :func:`project`.
    """
    values = _as_values(d)
    return _fit_rows(values[np.asarray(nb.member_indices)], variance_threshold, normalize)


def _outlyingness(rows: np.ndarray, sub: Subspace) -> np.ndarray:
    """Orthogonal distance plus score distance, each scaled to mean 1.

    The orthogonal residual alone misses an outlier that drags a retained
    component onto itself (its residual is then ~0); the score distance
    (Mahalanobis inside the subspace) flags exactly that case.
    """
    z = (rows - sub.center) * sub.inv_scale
    scores = z @ sub.basis.T
    od2 = np.sum((z - scores @ sub.basis) ** 2, axis=1)
    var = sub.explained_variance / max(rows.shape[0] - 1, 1)
    sd2 = np.sum(scores**2 / np.where(var > 0, var, np.inf), axis=1)
    out = np.zeros(rows.shape[0])
    for term in (od2, sd2):
        mean = term.mean()
        # below round-off the term carries no information
        if mean > 1e-24 * max(1.0, float(np.sum(z * z))):
            out += term / mean
    return out


def _check_trim(trim_fraction: float, k: int) -> int:
    if not 0.0 <= trim_fraction < 0.5:
        raise ConfigError(f"trim_fraction must lie in [0, 0.5), got {trim_fraction}")
    n_trim = math.floor(trim_fraction * k)
    if k - n_trim < 2:
        raise ConfigError(f"trimming {n_trim} of {k} neighbors leaves fewer than two points")
    return n_trim


def _keep_after_trim(rows: np.ndarray, sub: Subspace, n_trim: int) -> np.ndarray:
    # stable: among equal scores the earlier member is dropped first
    order = np.argsort(-_outlyingness(rows, sub), kind="stable")
    return np.sort(order[n_trim:])


def fit_robust_pca(
    d,
    nb: Neighborhood,
    variance_threshold: float = 0.95,
    normalize: bool = False,
    trim_fraction: float = 0.25,
) -> Subspace:
    """PCA with one round of residual trimming.

    Fits plain PCA, drops the ``floor(trim_fraction * k)`` most outlying
    members and refits on the rest. Outlyingness adds the orthogonal
    reconstruction residual and the within-subspace Mahalanobis distance,
    both squared and divided by their neighbourhood mean.
    """
    members = np.asarray(nb.member_indices)
    _check_trim(trim_fraction, members.size)
    return fit_many(_as_values(d), members[None], variance_threshold, normalize, trim_fraction)[0]


def trimmed_members(d, nb: Neighborhood, variance_threshold: float, normalize: bool, trim_fraction: float) -> np.ndarray:
    """Member indices retained by :func:`fit_robust_pca`."""
    values = _as_values(d)
    members = np.asarray(nb.member_indices)
    n_trim = _check_trim(trim_fraction, members.size)
    if n_trim == 0:
        return members
    first = _fit_rows(values[members], variance_threshold, normalize)
    return members[_keep_after_trim(values[members], first, n_trim)]


def project(d, s: Subspace) -> np.ndarray:
    """Coordinates of every row in the subspace, shape ``(N, d)``."""
    values = _as_values(d)
    if values.shape[1] != s.basis.shape[1]:
        raise ConfigError(f"data has {values.shape[1]} columns, subspace expects {s.basis.shape[1]}")
    return ((values - s.center) * s.inv_scale) @ s.basis.T


def random_projection_matrix(m: int, target_dim: int, seed, orthogonal: bool = False) -> np.ndarray:
    """m x target_dim map for Johnson-Lindenstrauss style projection.

    Entries are i.i.d. N(0, 1) / sqrt(target_dim). With ``orthogonal`` the
    Gaussian columns are orthonormalized (QR, signs fixed by R's diagonal)
    and scaled by sqrt(m / target_dim), i.e. a scaled orthogonal projection
    onto a uniformly random subspace; at ``target_dim == m`` this is a
    scaled rotation.
    """
    if not 1 <= target_dim <= m:
        raise ConfigError(f"target_dim must lie in [1, {m}], got {target_dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((m, target_dim))
    if not orthogonal:
        return g / math.sqrt(target_dim)
    q, r = np.linalg.qr(g)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * math.sqrt(m / target_dim)


def random_projection(d, target_dim: int, seed, orthogonal: bool = False) -> np.ndarray:
    values = _as_values(d)
    return values @ random_projection_matrix(values.shape[1], target_dim, seed, orthogonal)


def subsample_features(d, count: int, seed):
    """Keep ``count`` random columns (ascending order). Returns ``(dataset, columns)``."""
    values = _as_values(d)
    m = values.shape[1]
    if not 1 <= count <= m:
        raise ConfigError(f"count must lie in [1, {m}], got {count}")
    rng = np.random.default_rng(seed)
    cols = np.sort(rng.choice(m, size=count, replace=False))
    if isinstance(d, Dataset):
        names = None if d.feature_names is None else tuple(d.feature_names[j] for j in cols)
        return Dataset(values=values[:, cols], labels=d.labels, feature_names=names), cols
    return values[:, cols], cols

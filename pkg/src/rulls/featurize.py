"""Sparse landmark-distance features.

Every method runs T independent iterations. An iteration draws ``l_p``
landmark rows, measures an N x l_p distance block in some reduced space,
and keeps for each row its ``l_k`` nearest landmarks, encoded as

    max(mean_i - dist_ij, reg_p * mean_i)

where ``mean_i`` is row i's mean distance over all ``l_p`` landmarks.
Landmark j of iteration t owns column ``t * l_p + j``.

The reduced space is what separates the methods:

``rulls`` / ``rulls_robust``
    each landmark gets its own PCA subspace fitted on its ``k_eps`` nearest
    rows (plain, or with one round of residual trimming);
``variant1``
    one random orthogonal projection to ``proj_dim`` dimensions per iteration;
``variant2``
    ``proj_dim`` randomly sampled columns per iteration;
``randlocal``
    as ``variant2`` with ``l_k = 1``, and a landmark is never its own
    nearest landmark (the next one is used instead).

Cost per iteration is dominated by ``l_p`` neighbourhood SVDs (each
O(k_eps^2 m)) plus projecting all N rows into every local subspace,
O(N m sum_j d_j); memory is O(N l_p) for the distance block. Each
iteration draws from its own seed stream derived from the master seed, so
a run with T iterations is a column prefix of a run with more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from .dataset import Dataset
from .errors import ConfigError, DataError, DegeneracyError
from .subspace import fit_many, knn_neighborhoods, random_projection_matrix

__all__ = [
    "METHODS",
    "FeatureConfig",
    "SparseFeatureMatrix",
    "default_landmark_count",
    "pick_landmarks",
    "iteration_rng",
    "encode_row",
    "rulls_distance_block",
    "rulls_features",
    "variant1_features",
    "variant2_features",
    "randlocal_features",
    "build_features",
    "sparsity",
    "sparsity_ratio",
    "save_sparse",
    "load_sparse",
]

METHODS = ("rulls", "rulls_robust", "variant1", "variant2", "randlocal")

# landmarks fitted and projected together; bounds the N x sum(d_j) buffer
_LANDMARK_CHUNK = 128


@dataclass(frozen=True)
class FeatureConfig:
    """Hyperparameters. ``None`` fields take data-dependent defaults in :meth:`resolve`."""

    method: str = "rulls"
    iterations: int = 100
    landmarks: Optional[int] = None
    nearest: int = 10
    k_eps: int = 30
    reg_p: float = 1e-4
    variance_threshold: float = 0.95
    normalize: bool = True
    proj_dim: Optional[int] = None
    trim_fraction: float = 0.25
    seed: int = 0

    def resolve(self, n_rows: int, n_cols: int) -> "FeatureConfig":
        """Fill defaults for an N x m dataset and validate every field."""
        method = self.method.replace("-", "_")
        if method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        l_p = default_landmark_count(n_rows) if self.landmarks is None else int(self.landmarks)
        if not 1 <= l_p < n_rows:
            raise ConfigError(f"landmarks must satisfy 1 <= l_p < N={n_rows}, got {l_p}")
        l_k = 1 if method == "randlocal" else int(self.nearest)
        if method == "randlocal":
            if l_p < 2:
                raise ConfigError("randlocal needs at least two landmarks")
        elif not 1 <= l_k < l_p:
            raise ConfigError(f"nearest must satisfy 1 <= l_k < l_p={l_p}, got {l_k}")
        if not self.reg_p > 0:
            raise ConfigError(f"reg_p must be positive, got {self.reg_p}")
        if not 0.0 < self.variance_threshold <= 1.0:
            raise ConfigError(f"variance_threshold must lie in (0, 1], got {self.variance_threshold}")
        k_eps = int(self.k_eps)
        if method.startswith("rulls"):
            if k_eps == FeatureConfig.k_eps and n_rows < k_eps:
                k_eps = n_rows
            if not 2 <= k_eps <= n_rows:
                raise ConfigError(f"k_eps must satisfy 2 <= k_eps <= N={n_rows}, got {k_eps}")
        if method == "rulls_robust":
            if not 0.0 <= self.trim_fraction < 0.5:
                raise ConfigError(f"trim_fraction must lie in [0, 0.5), got {self.trim_fraction}")
            if k_eps - math.floor(self.trim_fraction * k_eps) < 2:
                raise ConfigError("trim_fraction leaves fewer than two neighbors")
        proj_dim = max(1, math.floor(0.2 * n_cols)) if self.proj_dim is None else int(self.proj_dim)
        if method in ("variant1", "variant2", "randlocal") and not 1 <= proj_dim <= n_cols:
            raise ConfigError(f"proj_dim must satisfy 1 <= d <= m={n_cols}, got {proj_dim}")
        return replace(self, method=method, landmarks=l_p, nearest=l_k, k_eps=k_eps, proj_dim=proj_dim)


@dataclass
class SparseFeatureMatrix:
    """Row-major (CSR) non-negative feature matrix."""

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row(self, i: int):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def equals(self, other: "SparseFeatureMatrix") -> bool:
        """Bit-exact equality of shape, structure and values."""
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data.view(np.uint64), other.data.view(np.uint64))
        )

    @classmethod
    def from_blocks(cls, n_rows: int, l_p: int, blocks) -> "SparseFeatureMatrix":
        """Concatenate per-iteration ``(cols, vals)`` blocks, each ``(N, l_k)``."""
        blocks = list(blocks)
        if not blocks:
            return cls(n_rows, 0, np.zeros(n_rows + 1, np.int64), np.zeros(0, np.int64), np.zeros(0))
        cols = np.hstack([c + t * l_p for t, (c, _) in enumerate(blocks)])
        vals = np.hstack([v for _, v in blocks])
        per_row = cols.shape[1]
        indptr = np.arange(n_rows + 1, dtype=np.int64) * per_row
        return cls(n_rows, l_p * len(blocks), indptr, cols.ravel().astype(np.int64), vals.ravel())


def default_landmark_count(n: int) -> int:
    """``min(2^log2(N/2), 1024)``, which is simply ``min(floor(N/2), 1024)``."""
    if n < 4:
        raise ConfigError(f"default landmark count needs N >= 4, got {n}")
    return min(n // 2, 1024)


def iteration_rng(seed: int, t: int) -> np.random.Generator:
    """Independent generator for iteration ``t`` of a run with master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(t),)))


def pick_landmarks(d, l_p: int, seed) -> np.ndarray:
    """``l_p`` distinct rows drawn uniformly, returned in ascending order.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    n = d.n_rows if isinstance(d, Dataset) else int(np.shape(d)[0])
    if not 1 <= l_p < n:
        raise ConfigError(f"need 1 <= l_p < N={n}, got {l_p}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=l_p, replace=False)).astype(np.int64)


def encode_row(mean_dist: float, dist: float, reg_p: float) -> float:
    """Feature value of one (point, landmark) pair."""
    if not reg_p * mean_dist > 0:
        raise DegeneracyError(f"mean landmark distance too small to encode: {mean_dist}")
    return max(mean_dist - dist, reg_p * mean_dist)


def rulls_distance_block(
    values: np.ndarray,
    landmarks: np.ndarray,
    k_eps: int,
    variance_threshold: float,
    normalize: bool,
    trim_fraction: Optional[float] = None,
) -> np.ndarray:
    """N x l_p distances, column j measured inside landmark j's local subspace."""
    n = values.shape[0]
    D = np.empty((n, landmarks.size), dtype=np.float64)
    for lo in range(0, landmarks.size, _LANDMARK_CHUNK):
        chunk = landmarks[lo : lo + _LANDMARK_CHUNK]
        nbrs = knn_neighborhoods(values, chunk, k_eps)
        subs = fit_many(values, nbrs, variance_threshold, normalize, trim_fraction)
        W = np.vstack([s.weights for s in subs])
        offsets = np.zeros(len(subs) + 1, dtype=np.int64)
        np.cumsum([s.dim for s in subs], out=offsets[1:])
        # centring cancels in the difference to the landmark's own coordinates
        Y = values @ W.T
        D[:, lo : lo + chunk.size] = kernels.segment_dists(Y, offsets, chunk)
    return D


def _check_method(cfg: FeatureConfig, allowed) -> None:
    if cfg.method not in allowed:
        raise ConfigError(f"method {cfg.method!r} not handled here (expected {allowed})")


def _run(d: Dataset, cfg: FeatureConfig, block_fn, exclude_self: bool = False) -> SparseFeatureMatrix:
    values = d.values
    n = values.shape[0]
    blocks = []
    for t in range(cfg.iterations):
        rng = iteration_rng(cfg.seed, t)
        landmarks = pick_landmarks(values, cfg.landmarks, rng)
        D = block_fn(values, landmarks, rng)
        blocks.append(kernels.encode_nearest(D, cfg.nearest, cfg.reg_p, landmarks if exclude_self else None))
    out = SparseFeatureMatrix.from_blocks(n, cfg.landmarks, blocks)
    out.meta.update(method=cfg.method, landmarks=cfg.landmarks, iterations=cfg.iterations, nearest=cfg.nearest)
    return out


def rulls_features(d: Dataset, cfg: FeatureConfig) -> SparseFeatureMatrix:
    """Union-of-local-subspaces features (methods ``rulls`` and ``rulls_robust``)."""
    cfg = cfg.resolve(d.n_rows, d.n_cols)
    _check_method(cfg, ("rulls", "rulls_robust"))
    trim = cfg.trim_fraction if cfg.method == "rulls_robust" else None

    def block(values, landmarks, rng):
        return rulls_distance_block(values, landmarks, cfg.k_eps, cfg.variance_threshold, cfg.normalize, trim)

    return _run(d, cfg, block)


def _landmark_distances(xt: np.ndarray, landmarks: np.ndarray) -> np.ndarray:
    return np.sqrt(kernels.row_sq_dists(xt, landmarks)).T


def variant1_features(d: Dataset, cfg: FeatureConfig) -> SparseFeatureMatrix:
    """Landmark features in one random ``proj_dim``-dimensional projection per iteration."""
    cfg = cfg.resolve(d.n_rows, d.n_cols)
    _check_method(cfg, ("variant1",))

    def block(values, landmarks, rng):
        P = random_projection_matrix(values.shape[1], cfg.proj_dim, rng, orthogonal=True)
        return _landmark_distances(values @ P, landmarks)

    return _run(d, cfg, block)


def _subsample_block(proj_dim):
    def block(values, landmarks, rng):
        cols = np.sort(rng.choice(values.shape[1], size=proj_dim, replace=False))
        return _landmark_distances(np.ascontiguousarray(values[:, cols]), landmarks)

    return block


def variant2_features(d: Dataset, cfg: FeatureConfig) -> SparseFeatureMatrix:
    """Multi-landmark features on ``proj_dim`` randomly sampled columns per iteration."""
    cfg = cfg.resolve(d.n_rows, d.n_cols)
    _check_method(cfg, ("variant2",))
    return _run(d, cfg, _subsample_block(cfg.proj_dim))


def randlocal_features(d: Dataset, cfg: FeatureConfig) -> SparseFeatureMatrix:
    """Single-nearest-landmark baseline with the self-exclusion rule."""
    cfg = cfg.resolve(d.n_rows, d.n_cols)
    _check_method(cfg, ("randlocal",))
    return _run(d, cfg, _subsample_block(cfg.proj_dim), exclude_self=True)


_DISPATCH = {
    "rulls": rulls_features,
    "rulls_robust": rulls_features,
    "variant1": variant1_features,
    "variant2": variant2_features,
    "randlocal": randlocal_features,
}


def build_features(d: Dataset, cfg: FeatureConfig) -> SparseFeatureMatrix:
    method = cfg.method.replace("-", "_")
    if method not in _DISPATCH:
        raise ConfigError(f"unknown method {cfg.method!r}")
    return _DISPATCH[method](d, cfg)


def sparsity(f: SparseFeatureMatrix) -> int:
    """Number of stored (non-zero) entries."""
    return f.nnz


def sparsity_ratio(f: SparseFeatureMatrix, l_p: int, T: int) -> float:
    """Stored entries divided by ``N * l_p * T``; 0 for an empty shape."""
    total = f.n_rows * l_p * T
    if total == 0:
        return 0.0
    return f.nnz / total


def save_sparse(f: SparseFeatureMatrix, path: Union[str, Path]) -> None:
    """Write ``N COLS NNZ`` then one ``row<TAB>col<TAB>value`` line per entry (17 significant digits)."""
    rows = np.repeat(np.arange(f.n_rows), np.diff(f.indptr))
    lines = [f"{f.n_rows} {f.n_cols} {f.nnz}\n"]
    lines.extend(f"{r}\t{c}\t{v:.17g}\n" for r, c, v in zip(rows.tolist(), f.indices.tolist(), f.data.tolist()))
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_sparse(path: Union[str, Path]) -> SparseFeatureMatrix:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: empty sparse matrix file")
    try:
        n_rows, n_cols, nnz = (int(x) for x in lines[0].split())
    except ValueError:
        raise DataError(f"{path}: bad header {lines[0]!r}") from None
    body = lines[1:]
    if len(body) != nnz:
        raise DataError(f"{path}: header says {nnz} entries, found {len(body)}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for k, line in enumerate(body):
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"{path}:{k + 2}: expected 3 tab-separated fields")
        try:
            rows[k], cols[k], vals[k] = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise DataError(f"{path}:{k + 2}: malformed entry {line!r}") from None
    if nnz:
        if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
            raise DataError(f"{path}: entry index outside {n_rows}x{n_cols}")
        key = rows * max(n_cols, 1) + cols
        if np.any(np.diff(key) <= 0):
            raise DataError(f"{path}: entries not sorted by row then column")
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    return SparseFeatureMatrix(n_rows, n_cols, indptr, cols, vals)

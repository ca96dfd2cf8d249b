"""Loading, normalization, corruption and splitting of numeric tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "Dataset",
    "SplitIndices",
    "load_csv",
    "normalize_global",
    "add_column_noise",
    "add_row_noise",
    "split",
    "load_bundled",
]

ColumnSelector = Union[int, str]


@dataclass(frozen=True)
class Dataset:
    """Dense N x m table with optional integer labels.

    ``values`` is stored as a read-only float64 array so that operations
    returning new datasets can never alias-mutate their input.
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[tuple] = None
    label_names: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"dataset must be a non-empty 2-D table, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != values.shape[0]:
                raise DataError(
                    f"label count {labels.shape[0] if labels.ndim else 0} does not match row count {values.shape[0]}"
                )
            if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
                raise DataError("labels must be non-negative integers")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != values.shape[1]:
                raise DataError("feature_names length does not match column count")
            object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            raise DataError("dataset has no labels")
        return int(np.unique(self.labels).size)

    def with_values(self, values: np.ndarray) -> "Dataset":
        return replace(self, values=values)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        labels = None if self.labels is None else self.labels[rows]
        return replace(self, values=self.values[rows], labels=labels)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


def _resolve_label_column(selector: ColumnSelector, header: Optional[list], n_fields: int) -> int:
    if isinstance(selector, str):
        stripped = selector.strip()
        if header is not None and stripped in header:
            return header.index(stripped)
        try:
            selector = int(stripped)
        except ValueError:
            raise ConfigError(f"label column {selector!r} not found in header") from None
    idx = selector + n_fields if selector < 0 else selector
    if not 0 <= idx < n_fields:
        raise ConfigError(f"label column {selector} out of range for {n_fields} columns")
    return idx


def load_csv(
    path: Union[str, Path],
    label_column: Optional[ColumnSelector] = None,
    has_header: bool = False,
) -> Dataset:
    """Read a comma-separated numeric table.

    Empty cells are missing and get imputed with the column mean of the
    present entries. The label column, if any, may hold integers or
    arbitrary strings; strings are mapped to dense integers in order of
    first appearance.

    Parameters
    ----------
    path : str or Path
        UTF-8 text file, one record per line, no quoting.
    label_column : int or str, optional
        Column index (negative counts from the end) or header name.
    has_header : bool
        Whether the first non-blank line holds column names.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = None
    if has_header:
        if not lines:
            raise DataError(f"{path}: missing header line")
        header = [h.strip() for h in lines[0].split(",")]
        lines = lines[1:]
    if not lines:
        raise DataError(f"{path}: no data rows")

    rows = [ln.split(",") for ln in lines]
    n_fields = len(header) if header is not None else len(rows[0])
    for lineno, row in enumerate(rows, start=2 if has_header else 1):
        if len(row) != n_fields:
            raise DataError(f"{path}:{lineno}: expected {n_fields} fields, found {len(row)}")

    label_idx = None if label_column is None else _resolve_label_column(label_column, header, n_fields)
    feature_idx = [j for j in range(n_fields) if j != label_idx]
    if not feature_idx:
        raise DataError(f"{path}: no feature columns")

    values = np.empty((len(rows), len(feature_idx)), dtype=np.float64)
    for i, row in enumerate(rows):
        for out_j, j in enumerate(feature_idx):
            cell = row[j].strip()
            if cell == "":
                values[i, out_j] = np.nan
                continue
            try:
                values[i, out_j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}:{i + (2 if has_header else 1)}: non-numeric cell {cell!r} in column {j}"
                ) from None
            if not math.isfinite(values[i, out_j]):
                raise DataError(f"{path}: non-finite cell {cell!r} in column {j}")

    missing = np.isnan(values)
    if missing.any():
        present = ~missing
        counts = present.sum(axis=0)
        if np.any(counts == 0):
            bad = [feature_idx[j] for j in np.flatnonzero(counts == 0)]
            raise DataError(f"{path}: column(s) {bad} have no values to impute from")
        means = np.where(present, values, 0.0).sum(axis=0) / counts
        values = np.where(missing, means, values)

    labels = None
    label_names = None
    if label_idx is not None:
        raw = [row[label_idx].strip() for row in rows]
        if any(cell == "" for cell in raw):
            raise DataError(f"{path}: missing label cell")
        try:
            ints = [int(cell) for cell in raw]
        except ValueError:
            ints = None
        if ints is not None and min(ints) >= 0:
            labels = np.asarray(ints, dtype=np.int64)
        else:
            mapping: dict = {}
            for cell in raw:
                mapping.setdefault(cell, len(mapping))
            labels = np.asarray([mapping[c] for c in raw], dtype=np.int64)
            label_names = tuple(mapping)

    names = None if header is None else tuple(header[j] for j in feature_idx)
    return Dataset(values=values, labels=labels, feature_names=names, label_names=label_names)


def normalize_global(d: Dataset) -> Dataset:
    """Z-score every column; zero-variance columns become all zeros."""
    x = d.values
    # z-scores are scale free; dividing by max |x| first keeps the squares
    # away from underflow and overflow
    peak = np.abs(x).max(axis=0)
    x = x / np.where(peak > 0, peak, 1.0)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    # exact test: a rounded mean gives constant columns a spurious ~1e-16 std
    varies = (x.max(axis=0) > x.min(axis=0)) & (std > 0)
    std = np.where(varies, std, 1.0)
    z = np.where(varies, (x - mean) / std, 0.0)
    return d.with_values(z)


def _check_fraction(fraction: float) -> None:
    if not (0.0 < fraction <= 1.0):
        raise ConfigError(f"noise fraction must lie in (0, 1], got {fraction}")


def _uniform_fill(rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray, shape) -> np.ndarray:
    return lo + (hi - lo) * rng.random(shape)


def add_column_noise(d: Dataset, fraction: float, seed: int) -> Dataset:
    """Replace ``ceil(fraction * m)`` random columns by uniform noise over each column's range."""
    _check_fraction(fraction)
    x = d.values
    m = x.shape[1]
    count = math.ceil(fraction * m)
    rng = np.random.default_rng(seed)
    cols = np.sort(rng.choice(m, size=count, replace=False))
    out = x.copy()
    lo = x[:, cols].min(axis=0)
    hi = x[:, cols].max(axis=0)
    out[:, cols] = _uniform_fill(rng, lo, hi, (x.shape[0], count))
    return d.with_values(out)


def add_row_noise(d: Dataset, fraction: float, seed: int) -> Dataset:
    """Replace ``ceil(fraction * N)`` random rows by uniform noise within per-column ranges."""
    _check_fraction(fraction)
    x = d.values
    n = x.shape[0]
    count = math.ceil(fraction * n)
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(n, size=count, replace=False))
    out = x.copy()
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    out[rows] = _uniform_fill(rng, lo, hi, (count, x.shape[1]))
    return d.with_values(out)


def split(d: Dataset, train_fraction: float, seed: int) -> SplitIndices:
    """Shuffle rows with ``seed`` and cut at ``floor(train_fraction * N)``."""
    n = d.n_rows
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = math.floor(train_fraction * n)
    if n_train < 1 or n_train >= n:
        raise ConfigError(f"split of {n} rows at {train_fraction} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(train=perm[:n_train], test=perm[n_train:])


def load_bundled(name: str) -> Dataset:
    """Load one of the small fixtures shipped in ``rulls/data`` (label in last column)."""
    from importlib import resources

    ref = resources.files("rulls") / "data" / f"{name}.csv"
    with resources.as_file(ref) as p:
        if not Path(p).exists():
            raise DataError(f"no bundled dataset named {name!r}")
        return load_csv(p, label_column=-1, has_header=True)

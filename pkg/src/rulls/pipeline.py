"""Experiment drivers shared by the CLI and the acceptance suite.

Each driver returns an ordered dict of metrics; keys are stable so that
reports diff cleanly between runs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset, add_column_noise, add_row_noise, normalize_global, split
from .errors import ConfigError, DataError
from .evaluation import accuracy, kmeans, nmi, train_linear_classifier
from .featurize import FeatureConfig, build_features, sparsity, sparsity_ratio


def scale_rows(X):
    """Divide a feature matrix by its mean row L2 norm (keeps sparsity and relative geometry)."""
    if sp.issparse(X):
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    else:
        norms = np.linalg.norm(X, axis=1)
    mean = norms.mean()
    return X / mean if mean > 0 else X


def _require_labels(d: Dataset) -> None:
    if d.labels is None:
        raise DataError("this task needs labels; pass a label column")


def featurize_with_stats(d: Dataset, cfg: FeatureConfig):
    resolved = cfg.resolve(d.n_rows, d.n_cols)
    f = build_features(d, resolved)
    stats = {
        "sparsity": sparsity(f),
        "sparsity_ratio": sparsity_ratio(f, resolved.landmarks, resolved.iterations),
    }
    return f, resolved, stats


def classify(
    d: Dataset,
    cfg: FeatureConfig,
    train_fraction: float = 0.8,
    epochs: int = 50,
    lam: float = 1e-4,
    seed: int = 0,
) -> dict:
    """Test accuracy of the linear classifier on raw and on generated features.

    Features are built on the full table (unsupervised), the classifier
    sees only the training rows. Raw features are z-scored first.
    """
    _require_labels(d)
    parts = split(d, train_fraction, seed)
    y = d.labels
    raw = scale_rows(normalize_global(d).values)
    model = train_linear_classifier(raw[parts.train], y[parts.train], epochs=epochs, lam=lam, seed=seed)
    acc_raw = accuracy(model, raw[parts.test], y[parts.test])

    f, _, stats = featurize_with_stats(d, cfg)
    X = scale_rows(f.to_scipy())
    model = train_linear_classifier(X[parts.train], y[parts.train], epochs=epochs, lam=lam, seed=seed)
    acc_method = accuracy(model, X[parts.test], y[parts.test])
    return {"accuracy_raw": acc_raw, "accuracy_method": acc_method, **stats}


def cluster(d: Dataset, cfg: FeatureConfig, k: int = None, max_iter: int = 300, seed: int = 0) -> dict:
    """NMI of k-means on raw values and on generated features (k defaults to the class count)."""
    _require_labels(d)
    k = d.n_classes if k is None else k
    raw = kmeans(d.values, k, max_iter=max_iter, seed=seed)
    f, _, stats = featurize_with_stats(d, cfg)
    feats = kmeans(scale_rows(f.to_scipy()), k, max_iter=max_iter, seed=seed)
    return {"nmi_raw": nmi(d.labels, raw.labels), "nmi_method": nmi(d.labels, feats.labels), **stats}


def corrupt(d: Dataset, axis: str, fraction: float, seed: int) -> Dataset:
    """Noisy copy of ``d``; ``fraction == 0`` returns ``d`` unchanged."""
    if axis not in ("rows", "cols"):
        raise ConfigError(f"noise axis must be 'rows' or 'cols', got {axis!r}")
    if fraction == 0:
        return d
    fn = add_row_noise if axis == "rows" else add_column_noise
    return fn(d, fraction, seed)


def noise_eval(
    d: Dataset,
    cfg: FeatureConfig,
    axis: str = "rows",
    fraction: float = 0.1,
    task: str = "classify",
    seed: int = 0,
    **task_args,
) -> dict:
    """Run the task on clean and corrupted data; ``delta_*`` is clean minus noisy."""
    noisy = corrupt(d, axis, fraction, seed)
    run = _TASKS.get(task)
    if run is None:
        raise ConfigError(f"unknown task {task!r}")
    clean_m = run(d, cfg, seed=seed, **task_args)
    noisy_m = run(noisy, cfg, seed=seed, **task_args)
    metric = "accuracy" if task == "classify" else "nmi"
    out = {}
    for which in ("raw", "method"):
        key = f"{metric}_{which}"
        out[f"{key}_clean"] = clean_m[key]
        out[f"{key}_noisy"] = noisy_m[key]
    for which in ("raw", "method"):
        key = f"{metric}_{which}"
        out[f"delta_{which}"] = clean_m[key] - noisy_m[key]
    return out


_TASKS = {"classify": classify, "cluster": cluster}


def format_report(metrics: dict) -> str:
    lines = []
    for key, value in metrics.items():
        if isinstance(value, float):
            value = f"{value:.17g}"
        lines.append(f"{key}\t{value}\n")
    return "".join(lines)

"""NumPy implementations of the hot loops.

Same signatures and semantics as the compiled ``_ckernels`` module; used
when the extension is not built or ``RULLS_BACKEND=python`` is set.
"""

import numpy as np

from .errors import ConfigError, DegeneracyError

_ROW_CHUNK = 256


def row_sq_dists(X, rows):
    """Squared Euclidean distances from each row listed in ``rows`` to every row of ``X``.

    Differences are formed explicitly (no Gram expansion), so exact ties
    stay exact. Returns an array of shape ``(len(rows), N)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    out = np.empty((rows.shape[0], X.shape[0]), dtype=np.float64)
    for a, r in enumerate(rows):
        diff = X - X[r]
        out[a] = np.einsum("ij,ij->i", diff, diff)
    return out


def segment_dists(Y, offsets, anchors):
    """Distances inside column segments of ``Y``.

    ``D[i, j] = || Y[i, s_j] - Y[anchors[j], s_j] ||`` where ``s_j`` is the
    column range ``offsets[j]:offsets[j+1]``.
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    anchors = np.asarray(anchors, dtype=np.int64)
    n = Y.shape[0]
    n_seg = anchors.shape[0]
    out = np.empty((n, n_seg), dtype=np.float64)
    seg_of_col = np.repeat(np.arange(n_seg), np.diff(offsets))
    ref = Y[anchors[seg_of_col], np.arange(offsets[-1])]
    starts = offsets[:-1]
    for lo in range(0, n, _ROW_CHUNK):
        diff = Y[lo:lo + _ROW_CHUNK] - ref
        np.square(diff, out=diff)
        out[lo:lo + _ROW_CHUNK] = np.add.reduceat(diff, starts, axis=1)
    return np.sqrt(out, out=out)


def encode_nearest(D, l_k, reg_p, exclude=None):
    """Sparse landmark encoding of a distance block.

    For every row ``i`` the ``l_k`` smallest entries of ``D[i]`` are kept
    (ties to the smaller column), skipping column ``j`` when
    ``exclude[j] == i``. Each kept entry becomes
    ``max(mean_i - D[i, j], reg_p * mean_i)`` with ``mean_i`` the mean of
    the whole row.

    Returns ``(cols, vals)``, both ``(N, l_k)``, columns ascending per row.
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    n, n_land = D.shape
    if l_k < 1 or l_k > n_land - (exclude is not None):
        extra = " with self-exclusion" if exclude is not None else ""
        raise ConfigError(f"cannot keep {l_k} of {n_land} landmarks{extra}")
    mean = D.mean(axis=1)
    # the floor must itself be positive; subnormal means underflow to zero
    weak = ~(reg_p * mean > 0)
    if np.any(weak):
        bad = int(np.flatnonzero(weak)[0])
        raise DegeneracyError(f"row {bad} has a vanishing mean distance to the landmarks")
    key = D
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=np.int64)
        key = D.copy()
        hit = (exclude >= 0) & (exclude < n)
        key[exclude[hit], np.flatnonzero(hit)] = np.inf
    order = np.argsort(key, axis=1, kind="stable")[:, :l_k]
    cols = np.sort(order, axis=1)
    dist = np.take_along_axis(D, cols, axis=1)
    vals = np.maximum(mean[:, None] - dist, reg_p * mean[:, None])
    return cols.astype(np.int64), vals


def sgd_epoch(indptr, indices, data, targets, order, V, scale, lam, step):
    """One pass of one-vs-rest hinge-loss subgradient descent over CSR rows.

    The weight matrix is ``scale * V`` (last column is the bias, fed by a
    constant feature of 1). Step ``t`` uses learning rate ``1 / (lam * t)``.
    ``V`` is updated in place; returns the new ``(scale, step)``.
    """
    n_feat = V.shape[1] - 1
    for i in order:
        lo, hi = indptr[i], indptr[i + 1]
        idx = indices[lo:hi]
        x = data[lo:hi]
        y = targets[i]
        score = scale * (V[:, idx] @ x + V[:, n_feat])
        eta = 1.0 / (lam * step)
        shrink = 1.0 - eta * lam
        if shrink <= 0.0:
            V[:] = 0.0
            scale = 1.0
        else:
            scale *= shrink
            if scale < 1e-9:
                V *= scale
                scale = 1.0
        viol = np.flatnonzero(y * score < 1.0)
        if viol.size:
            coef = (eta / scale) * y[viol]
            V[np.ix_(viol, idx)] += coef[:, None] * x[None, :]
            V[viol, n_feat] += coef
        step += 1
    return scale, step

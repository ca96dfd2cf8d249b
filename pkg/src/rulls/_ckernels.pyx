# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_kernels_py``.

Semantics match the NumPy fallback; summation runs left to right, so the
two backends agree to rounding, not bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

from .errors import ConfigError, DegeneracyError

cnp.import_array()


def row_sq_dists(X, rows):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const long long[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], n_r = r.shape[0]
    out = np.empty((n_r, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t a, i, k, ref
    cdef double acc, diff
    with nogil:
        for a in range(n_r):
            ref = r[a]
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    diff = x[i, k] - x[ref, k]
                    acc = acc + diff * diff
                o[a, i] = acc
    return out


def segment_dists(Y, offsets, anchors):
    cdef const double[:, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const long long[::1] anc = np.ascontiguousarray(anchors, dtype=np.int64)
    cdef Py_ssize_t n = y.shape[0], n_seg = anc.shape[0]
    out = np.empty((n, n_seg), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, s, ref
    cdef double acc, diff
    with nogil:
        for i in range(n):
            for j in range(n_seg):
                ref = anc[j]
                acc = 0.0
                for s in range(off[j], off[j + 1]):
                    diff = y[i, s] - y[ref, s]
                    acc = acc + diff * diff
                o[i, j] = sqrt(acc)
    return out


def _check_nearest(Py_ssize_t l_k, Py_ssize_t n_land, bint has_ex):
    if l_k < 1 or l_k > n_land - (1 if has_ex else 0):
        raise ConfigError(f"cannot keep {l_k} of {n_land} landmarks" + (" with self-exclusion" if has_ex else ""))


def encode_nearest(D, Py_ssize_t l_k, double reg_p, exclude=None):
    cdef const double[:, ::1] d = np.ascontiguousarray(D, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], n_land = d.shape[1]
    cdef bint has_ex = exclude is not None
    cdef const long long[::1] ex
    _check_nearest(l_k, n_land, has_ex)
    if has_ex:
        ex = np.ascontiguousarray(exclude, dtype=np.int64)
    else:
        ex = np.zeros(1, dtype=np.int64)
    cols_arr = np.empty((n, l_k), dtype=np.int64)
    vals_arr = np.empty((n, l_k), dtype=np.float64)
    cdef long long[:, ::1] cols = cols_arr
    cdef double[:, ::1] vals = vals_arr
    sel_arr = np.empty(l_k, dtype=np.int64)
    cdef long long[::1] sel = sel_arr
    cdef Py_ssize_t i, j, a, filled, pos
    cdef double mean, dj, v, floor_v
    cdef long long tmp
    for i in range(n):
        mean = 0.0
        for j in range(n_land):
            mean = mean + d[i, j]
        mean = mean / n_land
        if not reg_p * mean > 0.0:
            raise DegeneracyError(f"row {i} has a vanishing mean distance to the landmarks")
        # insertion into a sorted buffer of the l_k best (distance, column)
        filled = 0
        for j in range(n_land):
            if has_ex and ex[j] == i:
                continue
            dj = d[i, j]
            if filled == l_k and dj >= d[i, sel[filled - 1]]:
                continue
            pos = filled if filled < l_k else l_k - 1
            while pos > 0 and d[i, sel[pos - 1]] > dj:
                if pos < l_k:
                    sel[pos] = sel[pos - 1]
                pos -= 1
            sel[pos] = j
            if filled < l_k:
                filled += 1
        # order selected columns ascending
        for a in range(1, filled):
            tmp = sel[a]
            pos = a
            while pos > 0 and sel[pos - 1] > tmp:
                sel[pos] = sel[pos - 1]
                pos -= 1
            sel[pos] = tmp
        floor_v = reg_p * mean
        for a in range(filled):
            v = mean - d[i, sel[a]]
            cols[i, a] = sel[a]
            vals[i, a] = v if v > floor_v else floor_v
    return cols_arr, vals_arr


def sgd_epoch(indptr, indices, data, targets, order, V, double scale, double lam, double step):
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] xv = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[:, ::1] tg = np.ascontiguousarray(targets, dtype=np.float64)
    cdef const long long[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef double[:, ::1] w = V
    cdef Py_ssize_t n_cls = w.shape[0], n_feat = w.shape[1] - 1
    scores_arr = np.empty(n_cls, dtype=np.float64)
    cdef double[::1] score = scores_arr
    cdef Py_ssize_t q, i, c, p, lo, hi
    cdef double eta, shrink, acc, coef
    with nogil:
        for q in range(od.shape[0]):
            i = od[q]
            lo = ip[i]
            hi = ip[i + 1]
            for c in range(n_cls):
                acc = 0.0
                for p in range(lo, hi):
                    acc = acc + w[c, ix[p]] * xv[p]
                score[c] = scale * (acc + w[c, n_feat])
            eta = 1.0 / (lam * step)
            shrink = 1.0 - eta * lam
            if shrink <= 0.0:
                w[:, :] = 0.0
                scale = 1.0
            else:
                scale = scale * shrink
                if scale < 1e-9:
                    for c in range(n_cls):
                        for p in range(n_feat + 1):
                            w[c, p] = w[c, p] * scale
                    scale = 1.0
            for c in range(n_cls):
                if tg[i, c] * score[c] < 1.0:
                    coef = (eta / scale) * tg[i, c]
                    for p in range(lo, hi):
                        w[c, ix[p]] = w[c, ix[p]] + coef * xv[p]
                    w[c, n_feat] = w[c, n_feat] + coef
            step = step + 1.0
    return scale, step

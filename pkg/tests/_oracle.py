"""Naive dense reference implementation used to check the optimized code.

Everything here is written for clarity: explicit loops, covariance
matrices and full sorts. Only the landmark draw is shared with the
package (it is the seeding protocol, not geometry).
"""

import math

import numpy as np

from rulls.featurize import iteration_rng


def knn(X, landmark, k):
    n = X.shape[0]
    dist = []
    for i in range(n):
        diff = X[i] - X[landmark]
        dist.append((0.0 if i == landmark else float(diff @ diff), 0 if i == landmark else 1, i))
    dist.sort()
    return [i for _, _, i in dist[:k]]


def local_pca(rows, threshold, normalize):
    center = rows.mean(axis=0)
    Z = rows - center
    scale = np.ones(rows.shape[1])
    if normalize:
        std = rows.std(axis=0)
        scale = np.array([1.0 / s if s > 0 else 0.0 for s in std])
        Z = Z * scale
    cov = Z.T @ Z / (rows.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    acc = 0.0
    d = len(evals)
    for j, v in enumerate(evals):
        acc += v
        if acc >= threshold * total * (1 - 1e-12):
            d = j + 1
            break
    rank = int(np.sum(evals > 1e-12 * total))
    d = max(1, min(d, rank))
    return center, scale, evecs[:, :d]


def distance_block(X, landmarks, k_eps, threshold, normalize):
    n = X.shape[0]
    D = np.zeros((n, len(landmarks)))
    for j, lm in enumerate(landmarks):
        members = knn(X, lm, k_eps)
        center, scale, basis = local_pca(X[members], threshold, normalize)
        ref = ((X[lm] - center) * scale) @ basis
        for i in range(n):
            p = ((X[i] - center) * scale) @ basis
            D[i, j] = math.sqrt(float((p - ref) @ (p - ref)))
    return D


def encode(D, l_k, reg_p):
    n, l_p = D.shape
    F = np.zeros((n, l_p))
    for i in range(n):
        mean = sum(D[i]) / l_p
        ranked = sorted(range(l_p), key=lambda j: (D[i, j], j))
        for j in ranked[:l_k]:
            F[i, j] = max(mean - D[i, j], reg_p * mean)
    return F


def rulls_dense(X, T, l_p, l_k, k_eps, seed, threshold=0.95, normalize=True, reg_p=1e-4):
    """Dense N x (T * l_p) RULLS feature matrix."""
    blocks = []
    for t in range(T):
        rng = iteration_rng(seed, t)
        landmarks = sorted(rng.choice(X.shape[0], size=l_p, replace=False).tolist())
        blocks.append(encode(distance_block(X, landmarks, k_eps, threshold, normalize), l_k, reg_p))
    return np.hstack(blocks)


def nmi(a, b):
    a, b = list(a), list(b)
    n = len(a)
    pa = {x: a.count(x) / n for x in set(a)}
    pb = {x: b.count(x) / n for x in set(b)}
    ha = -sum(p * math.log(p) for p in pa.values())
    hb = -sum(p * math.log(p) for p in pb.values())
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    mi = 0.0
    for x in pa:
        for y in pb:
            pxy = sum(1 for u, v in zip(a, b) if u == x and v == y) / n
            if pxy > 0:
                mi += pxy * math.log(pxy / (pa[x] * pb[y]))
    return mi / math.sqrt(ha * hb)

"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on identical inputs under both backends; the table shows
the best wall time per backend and the speedup. The last row is a full
feature build with each backend patched in.
"""

import argparse
import timeit

import numpy as np
import scipy.sparse as sp

import rulls.featurize as fz
import rulls.subspace as ss
from rulls import Dataset, FeatureConfig, build_features
from rulls._backend import get_kernels


def cases(rng):
    X = rng.normal(size=(2000, 16))
    rows = rng.choice(2000, 200, replace=False)
    offsets = np.cumsum(np.r_[0, rng.integers(1, 6, size=200)])
    Y = rng.normal(size=(4000, offsets[-1]))
    anchors = rng.integers(0, 4000, size=200)
    D = rng.random((4000, 200))
    excl = rng.integers(0, 4000, size=200)
    S = sp.random(2000, 3000, density=0.01, random_state=0, format="csr")
    targets = -np.ones((2000, 10))
    targets[np.arange(2000), rng.integers(0, 10, 2000)] = 1
    order = rng.permutation(2000).astype(np.int64)
    csr = (S.indptr.astype(np.int64), S.indices.astype(np.int64), S.data, targets, order)
    return {
        "row_sq_dists": lambda k: k.row_sq_dists(X, rows),
        "segment_dists": lambda k: k.segment_dists(Y, offsets, anchors),
        "encode_nearest": lambda k: k.encode_nearest(D, 10, 1e-4),
        "encode_nearest+exclude": lambda k: k.encode_nearest(D, 1, 1e-4, excl),
        "sgd_epoch": lambda k: k.sgd_epoch(*csr, np.zeros((10, 3001)), 1.0, 1e-4, 1.0),
    }


def end_to_end(rng):
    d = Dataset(rng.normal(size=(1500, 16)))
    cfg = FeatureConfig(iterations=5, seed=0)

    def run(k):
        saved = fz.kernels, ss.kernels
        fz.kernels = ss.kernels = k
        try:
            build_features(d, cfg)
        finally:
            fz.kernels, ss.kernels = saved

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    py = get_kernels("python")
    try:
        cy = get_kernels("cython")
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    jobs = cases(rng)
    jobs["featurize (end to end)"] = end_to_end(rng)
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in jobs.items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat))
        print(f"{name:<26}{1e3 * t_py:>12.2f}{1e3 * t_cy:>12.2f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

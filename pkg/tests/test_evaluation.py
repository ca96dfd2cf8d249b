import numpy as np
import pytest
import scipy.sparse as sp

import _oracle
from conftest import blobs
from rulls import ConfigError, DataError, accuracy, kmeans, nmi, train_linear_classifier
from rulls.evaluation import ClassifierModel, decision_scores, predict


def separable(rng, n=80):
    y = rng.integers(0, 2, n)
    X = rng.normal(scale=0.3, size=(n, 2)) + np.where(y[:, None] == 1, 2.0, -2.0)
    return X, y


class TestClassifier:
    def test_separable_blobs(self, rng):
        X, y = separable(rng)
        model = train_linear_classifier(X, y, epochs=50)
        assert accuracy(model, X, y) == 1.0

    def test_multiclass_and_sparse_input(self, rng):
        d = blobs(rng, 150, 5, centers=4, spread=6)
        model = train_linear_classifier(sp.csr_matrix(d.values), d.labels, epochs=20)
        assert model.weights.shape == (4, 5) and model.bias.shape == (4,)
        assert np.all(np.isfinite(model.weights))
        assert accuracy(model, d.values, d.labels) > 0.9

    def test_seeded(self, rng):
        X, y = separable(rng)
        a = train_linear_classifier(X, y, epochs=5, seed=3)
        b = train_linear_classifier(X, y, epochs=5, seed=3)
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)

    def test_order_sensitive(self, rng):
        X, y = separable(rng)
        perm = rng.permutation(len(y))
        a = train_linear_classifier(X, y, epochs=3, seed=3)
        b = train_linear_classifier(X[perm], y[perm], epochs=3, seed=3)
        assert not np.array_equal(a.weights, b.weights)

    def test_label_values_are_preserved(self, rng):
        X, y = separable(rng)
        model = train_linear_classifier(X, y * 5 + 2)
        assert set(predict(model, X).tolist()) <= {2, 7}

    def test_errors(self, rng):
        X, y = separable(rng)
        with pytest.raises(DataError):
            train_linear_classifier(X, np.zeros(len(y)))
        with pytest.raises(DataError):
            train_linear_classifier(X, y[:-1])
        with pytest.raises(ConfigError):
            train_linear_classifier(X, y, epochs=0)
        with pytest.raises(ConfigError):
            train_linear_classifier(X, y, lam=0)
        model = train_linear_classifier(X, y)
        with pytest.raises(DataError):
            decision_scores(model, np.zeros((2, 3)))


class TestAccuracy:
    model = ClassifierModel(weights=np.array([[-1.0], [1.0]]), bias=np.zeros(2), classes=np.array([0, 1]))

    def test_perfect(self):
        assert accuracy(self.model, [[-1.0], [2.0]], [0, 1]) == 1.0

    def test_half_flipped(self):
        X = np.array([[-1.0], [-2.0], [1.0], [2.0]])
        assert accuracy(self.model, X, [0, 1, 1, 0]) == 0.5

    def test_ties_go_to_first_class(self):
        assert predict(self.model, [[0.0]]).tolist() == [0]

    def test_empty(self):
        with pytest.raises(DataError):
            accuracy(self.model, np.zeros((0, 1)), [])


class TestKmeans:
    def test_single_cluster_is_mean(self, rng):
        X = rng.normal(size=(30, 3))
        res = kmeans(X, 1)
        assert np.allclose(res.centroids[0], X.mean(axis=0))
        assert res.labels.tolist() == [0] * 30

    def test_recovers_blobs(self, rng):
        d = blobs(rng, 120, 2, centers=3, spread=30)
        res = kmeans(d.values, 3, seed=1)
        assert nmi(res.labels, d.labels) == 1.0

    def test_inertia_monotone(self, rng):
        X = rng.normal(size=(200, 4))
        for seed in range(5):
            hist = kmeans(X, 6, seed=seed, n_init=1).inertia_history
            assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))

    def test_sparse_equals_dense(self, rng):
        X = np.abs(rng.normal(size=(50, 6))) * (rng.random((50, 6)) < 0.4)
        a = kmeans(X, 3, seed=2)
        b = kmeans(sp.csr_matrix(X), 3, seed=2)
        assert np.array_equal(a.labels, b.labels)
        assert np.allclose(a.centroids, b.centroids)

    def test_duplicate_points_fill_clusters(self):
        X = np.array([[0.0], [0.0], [0.0], [5.0]])
        res = kmeans(X, 3, seed=0)
        assert set(res.labels.tolist()) <= {0, 1, 2}
        assert np.all(np.isfinite(res.centroids))

    def test_bad_k(self):
        with pytest.raises(ConfigError):
            kmeans(np.zeros((3, 1)), 4)
        with pytest.raises(ConfigError):
            kmeans(np.zeros((3, 1)), 0)


class TestNmi:
    def test_identical(self):
        assert nmi([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == 1.0

    def test_constant_against_split(self):
        assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0

    def test_independent(self):
        assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_both_constant(self):
        assert nmi([1, 1], [3, 3]) == 1.0

    def test_frozen_values(self):
        # hand-checked with the naive double loop in tests/_oracle.py
        assert nmi([0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 1, 1]) == pytest.approx(0.7611702597222879, abs=1e-14)
        assert nmi([0, 0, 0, 1, 1, 2], [1, 1, 0, 0, 2, 2]) == pytest.approx(0.5211105196400003, abs=1e-14)

    def test_against_oracle(self, rng):
        for _ in range(20):
            a, b = rng.integers(0, 4, 40), rng.integers(0, 3, 40)
            assert nmi(a, b) == pytest.approx(_oracle.nmi(a, b), abs=1e-12)

    def test_errors(self):
        with pytest.raises(DataError):
            nmi([0, 1], [0])
        with pytest.raises(DataError):
            nmi([], [])

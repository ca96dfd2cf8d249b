import math

import numpy as np
import pytest

from rulls import (
    ConfigError,
    DataError,
    Dataset,
    add_column_noise,
    add_row_noise,
    load_bundled,
    load_csv,
    normalize_global,
    split,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_with_string_labels(tmp_path):
    d = load_csv(write(tmp_path, "1,2,A\n3,4,B\n5,6,A\n"), label_column=2)
    assert d.values.tolist() == [[1, 2], [3, 4], [5, 6]]
    assert d.labels.tolist() == [0, 1, 0]
    assert d.label_names == ("A", "B")


def test_missing_cell_gets_column_mean(tmp_path):
    d = load_csv(write(tmp_path, "2.0,1\n,1\n4.0,0\n"), label_column=-1)
    assert d.values[:, 0].tolist() == [2.0, 3.0, 4.0]


def test_baseball_like_missing_rows_load(tmp_path):
    rows = [f"{i},{'' if i % 7 == 0 else i * 0.5},{i % 2}" for i in range(1, 60)]
    d = load_csv(write(tmp_path, "\n".join(rows)), label_column=2)
    assert np.isfinite(d.values).all()
    assert d.n_rows == 59


def test_header_and_named_label(tmp_path):
    d = load_csv(write(tmp_path, "a,b,cls\n1,2,0\n3,4,1\n"), label_column="cls", has_header=True)
    assert d.feature_names == ("a", "b")
    assert d.labels.tolist() == [0, 1]


def test_integer_labels_kept(tmp_path):
    d = load_csv(write(tmp_path, "1,7\n2,3\n3,7\n"), label_column=1)
    assert d.labels.tolist() == [7, 3, 7]


def test_negative_integer_labels_are_categorical(tmp_path):
    d = load_csv(write(tmp_path, "1,-1\n2,1\n3,-1\n"), label_column=1)
    assert d.labels.tolist() == [0, 1, 0]


def test_no_label_column(tmp_path):
    d = load_csv(write(tmp_path, "1,2\n3,4\n"))
    assert d.labels is None
    with pytest.raises(DataError):
        d.n_classes


@pytest.mark.parametrize(
    "text, kwargs, err",
    [
        ("1,2\n3\n", {}, DataError),
        ("1,x\n", {}, DataError),
        ("1,inf\n", {}, DataError),
        (",1\n,2\n", {}, DataError),
        ("", {}, DataError),
        ("a,b\n", {"has_header": True}, DataError),
        ("1,2\n", {"label_column": 5}, ConfigError),
        ("a,b\n1,2\n", {"label_column": "zz", "has_header": True}, ConfigError),
        ("1,\n2,0\n", {"label_column": 1}, DataError),
        ("1\n2\n", {"label_column": 0}, DataError),
    ],
)
def test_load_errors(tmp_path, text, kwargs, err):
    with pytest.raises(err):
        load_csv(write(tmp_path, text), **kwargs)


def test_missing_file():
    with pytest.raises(DataError):
        load_csv("/nonexistent/file.csv")


def test_dataset_is_immutable():
    d = Dataset([[1.0, 2.0]], [0])
    with pytest.raises(ValueError):
        d.values[0, 0] = 5.0


def test_dataset_rejects_bad_input():
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 3)))
    with pytest.raises(DataError):
        Dataset([[np.nan]])
    with pytest.raises(DataError):
        Dataset([[1.0], [2.0]], [0])
    with pytest.raises(DataError):
        Dataset([[1.0]], [-1])


def test_normalize_examples():
    d = normalize_global(Dataset([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
    assert np.allclose(d.values[:, 0], [-1.2247, 0, 1.2247], atol=1e-4)
    assert d.values[:, 1].tolist() == [0, 0, 0]


def test_normalize_idempotent(rng):
    d = Dataset(rng.normal(3, 7, size=(50, 4)))
    once = normalize_global(d)
    assert np.allclose(normalize_global(once).values, once.values, atol=1e-9)


def test_normalize_keeps_labels(rng):
    d = Dataset(rng.normal(size=(5, 2)), [0, 1, 0, 1, 1])
    assert normalize_global(d).labels.tolist() == [0, 1, 0, 1, 1]


def test_column_noise(rng):
    d = Dataset(rng.normal(size=(30, 20)))
    out = add_column_noise(d, 0.1, seed=3)
    changed = np.flatnonzero(np.any(out.values != d.values, axis=0))
    assert changed.size == 2
    untouched = np.setdiff1d(np.arange(20), changed)
    assert np.array_equal(out.values[:, untouched], d.values[:, untouched])
    lo, hi = d.values.min(axis=0), d.values.max(axis=0)
    assert np.all((out.values >= lo) & (out.values <= hi))
    assert np.array_equal(add_column_noise(d, 0.1, seed=3).values, out.values)


def test_row_noise(rng):
    d = Dataset(rng.normal(size=(100, 4)), rng.integers(0, 3, 100))
    out = add_row_noise(d, 0.1, seed=5)
    changed = np.flatnonzero(np.any(out.values != d.values, axis=1))
    assert changed.size == 10
    lo, hi = d.values.min(axis=0), d.values.max(axis=0)
    assert np.all((out.values[changed] >= lo) & (out.values[changed] <= hi))
    assert np.array_equal(out.labels, d.labels)
    assert np.array_equal(add_row_noise(d, 0.1, seed=5).values, out.values)


@pytest.mark.parametrize("fraction", [0, -0.1, 1.5])
def test_noise_fraction_range(fraction):
    d = Dataset(np.ones((4, 2)))
    for fn in (add_row_noise, add_column_noise):
        with pytest.raises(ConfigError):
            fn(d, fraction, 0)


def test_noise_ceil():
    d = Dataset(np.arange(21.0).reshape(7, 3))
    out = add_row_noise(d, 0.2, 0)
    assert np.count_nonzero(np.any(out.values != d.values, axis=1)) <= math.ceil(0.2 * 7)


def test_split_examples():
    d = Dataset(np.arange(10.0)[:, None])
    s = split(d, 0.8, seed=1)
    assert s.train.size == 8 and s.test.size == 2
    assert sorted(np.concatenate([s.train, s.test]).tolist()) == list(range(10))
    again = split(d, 0.8, seed=1)
    assert np.array_equal(s.train, again.train) and np.array_equal(s.test, again.test)


@pytest.mark.parametrize("fraction", [0.0, 1.0, 0.05])
def test_split_rejects_empty_side(fraction):
    with pytest.raises(ConfigError):
        split(Dataset(np.arange(10.0)[:, None]), fraction, 0)


def test_bundled():
    iris = load_bundled("iris")
    assert iris.values.shape == (150, 4)
    assert iris.n_classes == 3
    digits = load_bundled("digits")
    assert digits.values.shape == (1797, 16)
    assert digits.n_classes == 10
    with pytest.raises(DataError):
        load_bundled("nope")

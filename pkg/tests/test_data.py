import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from hdlssd.data import (
    GrayImage, LabeledDataset, RegionMask, make_synthetic, rasterize, restrict, unrasterize,
)
from hdlssd.errors import DataError


def test_rasterize_column_concatenation():
    assert rasterize(GrayImage([[1, 2], [3, 4]])).tolist() == [1, 3, 2, 4]


def test_rasterize_constant():
    assert rasterize(GrayImage(np.full((3, 2), 7.0))).tolist() == [7.0] * 6


def test_rasterize_face_size():
    assert rasterize(GrayImage(np.zeros((248, 186)))).size == 248 * 186 == 46128


def test_rasterize_index_formula():
    I, J = 4, 3
    px = np.arange(I * J, dtype=float).reshape(I, J)
    v = rasterize(GrayImage(px))
    for i in range(1, I + 1):
        for j in range(1, J + 1):
            assert v[(j - 1) * I + i - 1] == px[i - 1, j - 1]


def test_unrasterize_inverse_and_clamp():
    assert unrasterize([1, 3, 2, 4], 2, 2).pixels.tolist() == [[1, 2], [3, 4]]
    assert unrasterize([300, 0, 0, 0], 2, 2).pixels[0, 0] == 255
    assert unrasterize([-5, 0, 0, 0], 2, 2).pixels[0, 0] == 0


def test_unrasterize_length_mismatch():
    with pytest.raises(DataError):
        unrasterize([1, 2, 3], 2, 2)


@pytest.mark.parametrize("px", [[[256.0]], [[-1.0]], [[np.nan]], np.zeros((0, 3))])
def test_gray_image_validation(px):
    with pytest.raises(DataError):
        GrayImage(px)


@given(hnp.arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.floats(-100, 400)))
def test_rasterize_unrasterize_is_clamp(a):
    img = unrasterize(a.ravel(order="F"), *a.shape)
    assert np.array_equal(rasterize(img), np.clip(a, 0, 255).ravel(order="F"))


@given(hnp.arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.floats(0, 255)))
def test_unrasterize_rasterize_identity(a):
    img = GrayImage(a)
    assert np.array_equal(unrasterize(rasterize(img), *a.shape).pixels, img.pixels)


def test_dataset_validation():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 3)), [1, -1])
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), [1, 0])
    with pytest.raises(DataError):
        LabeledDataset(np.array([[np.inf, 0.0]]), [1, -1])
    ds = LabeledDataset(np.zeros((2, 3)), [1, 1, 1])
    assert (ds.n_pos, ds.n_neg) == (3, 0)
    with pytest.raises(DataError):
        ds.require_both_classes()


def test_dataset_is_immutable():
    ds = LabeledDataset(np.zeros((2, 2)), [1, -1])
    with pytest.raises(ValueError):
        ds.data[0, 0] = 1.0


def test_mask_bounds_and_size():
    m = RegionMask(2, 3, 1, 2, (4, 5), "m")
    assert m.size == 4 == m.indices.size
    # column-major: (row 2, col 1) -> 1, (3, 1) -> 2, (2, 2) -> 5, (3, 2) -> 6
    assert m.indices.tolist() == [1, 2, 5, 6]
    for bad in [(0, 1, 1, 1), (2, 1, 1, 1), (1, 5, 1, 1), (1, 1, 3, 2), (1, 1, 1, 6)]:
        with pytest.raises(DataError):
            RegionMask(*bad, (4, 5))


def test_restrict_examples():
    rng = np.random.default_rng(0)
    ds = LabeledDataset(rng.normal(size=(12, 5)), [1, -1, 1, -1, 1])
    full = restrict(ds, RegionMask.full((4, 3)))
    assert np.array_equal(full.data, ds.data) and np.array_equal(full.labels, ds.labels)
    one = restrict(ds, RegionMask(2, 2, 3, 3, (4, 3)))
    assert one.d == 1 and np.array_equal(one.data[0], ds.data[(3 - 1) * 4 + 1])
    a, b = RegionMask(1, 2, 1, 3, (4, 3)), RegionMask(3, 4, 1, 3, (4, 3))
    assert not set(a.indices) & set(b.indices)
    ra, rb = restrict(ds, a), restrict(ds, b)
    assert ra.d + rb.d == ds.d


def test_restrict_out_of_range():
    ds = LabeledDataset(np.zeros((4, 2)), [1, -1])
    with pytest.raises(DataError):
        restrict(ds, np.array([0, 4]))
    with pytest.raises(DataError):
        restrict(ds, RegionMask.full((3, 3)))


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_restrict_preserves_labels(I, J, data):
    r0 = data.draw(st.integers(1, I))
    r1 = data.draw(st.integers(r0, I))
    c0 = data.draw(st.integers(1, J))
    c1 = data.draw(st.integers(c0, J))
    ds = LabeledDataset(np.arange(I * J * 3, dtype=float).reshape(I * J, 3), [1, -1, 1])
    m = RegionMask(r0, r1, c0, c1, (I, J))
    sub = restrict(ds, m)
    assert sub.n == ds.n and np.array_equal(sub.labels, ds.labels)
    assert sub.d == (r1 - r0 + 1) * (c1 - c0 + 1)


def test_synthetic_determinism():
    a = make_synthetic(20, 5, 1.5, seed=3)
    b = make_synthetic(20, 5, 1.5, seed=3)
    assert a.data.tobytes() == b.data.tobytes()
    assert np.array_equal(a.labels, b.labels)
    c = make_synthetic(20, 5, 1.5, "random", seed=3)
    assert not np.array_equal(a.data, c.data)


def test_synthetic_invalid():
    for args in [(0, 5, 1.0), (5, 0, 1.0), (5, 5, -1.0)]:
        with pytest.raises(DataError):
            make_synthetic(*args)
    with pytest.raises(DataError):
        make_synthetic(5, 5, 1.0, direction_mode="bogus")


def test_synthetic_zero_shift_is_chance():
    tr = make_synthetic(1, 5000, 0.0, seed=1)
    # any fixed rule, e.g. sign(x)
    err = np.mean(np.where(tr.data[0] >= 0, 1, -1) != tr.labels)
    assert abs(err - 0.5) < 0.02


def test_synthetic_bayes_error_one_dimension():
    # Bayes rule sign(x) errs with probability Phi(-mu/2)
    mu = 3.29
    bayes = 0.5 * math.erfc(mu / 2 / math.sqrt(2))
    assert abs(bayes - 0.05) < 1e-3
    ds = make_synthetic(1, 50_000, mu, seed=2)
    err = np.mean(np.where(ds.data[0] >= 0, 1, -1) != ds.labels)
    assert abs(err - bayes) < 0.005


@pytest.mark.parametrize("mode", ["ones", "random"])
def test_synthetic_class_means_converge(mode):
    d, n = 10, 10_000
    ds = make_synthetic(d, n, 2.0, mode, seed=4)
    pos, neg = ds.class_data(1).mean(axis=1), ds.class_data(-1).mean(axis=1)
    if mode == "ones":
        e = np.full(d, 1 / np.sqrt(d))
    else:
        # the documented draw order: direction first, from the same generator
        e = np.random.default_rng(4).standard_normal(d)
        e /= np.linalg.norm(e)
    assert np.linalg.norm(pos - e) <= 5 * np.sqrt(d / n)
    assert np.linalg.norm(neg + e) <= 5 * np.sqrt(d / n)

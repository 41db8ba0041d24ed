import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from protorefine.errors import DimensionMismatch, NonPositiveTemperature, ZeroVector
from protorefine.vecmath import cross_entropy, dot, l2_normalize, tempered_softmax

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = st.integers(2, 12).flatmap(lambda n: arrays(np.float64, n, elements=finite))


def test_normalize_345():
    np.testing.assert_allclose(l2_normalize([3, 4]), [0.6, 0.8])


def test_normalize_idempotent():
    v = l2_normalize([1.0, 2.0, -2.0])
    np.testing.assert_allclose(l2_normalize(v), v, atol=1e-15)


def test_normalize_zero():
    with pytest.raises(ZeroVector):
        l2_normalize([0.0, 0.0])


def test_normalize_rows(rng):
    x = l2_normalize(rng.standard_normal((50, 7)))
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)


def test_softmax_uniform():
    np.testing.assert_allclose(tempered_softmax([2.5] * 4, 0.3), [0.25] * 4)


def test_softmax_two_class():
    e = math.e
    np.testing.assert_allclose(tempered_softmax([1, 0], 1.0), [e / (e + 1), 1 / (e + 1)], rtol=1e-12)
    np.testing.assert_allclose(tempered_softmax([1, 0], 1.0), [0.7311, 0.2689], atol=1e-4)


def test_softmax_sharpening_limit():
    assert tempered_softmax([1, 0], 0.01)[0] > 1 - 1e-6


def test_softmax_bad_temperature():
    with pytest.raises(NonPositiveTemperature):
        tempered_softmax([1, 0], 0.0)


def test_softmax_large_scores_stable():
    p = tempered_softmax([1000.0, 0.0, -1000.0], 0.1)
    assert np.all(np.isfinite(p))
    assert p[0] == pytest.approx(1.0)


def test_ce_one_hot_perfect():
    assert cross_entropy([0, 1, 0], [0, 1, 0]) == pytest.approx(0.0, abs=1e-11)


def test_ce_half():
    assert cross_entropy([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-11)


def test_ce_is_entropy_on_diagonal():
    p = np.array([0.2, 0.3, 0.5])
    h = -sum(x * math.log(x) for x in p)
    assert cross_entropy(p, p) == pytest.approx(h, abs=1e-10)


def test_ce_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cross_entropy([1, 0], [0.5, 0.25, 0.25])


def test_dot_examples():
    a = l2_normalize([0.6, 0.8])
    assert dot(a, a) == pytest.approx(1.0)
    assert dot([1, 0, 0], [0, 1, 0]) == 0.0
    assert dot([0.6, 0.8], [0.8, 0.6]) == pytest.approx(0.96)
    with pytest.raises(DimensionMismatch):
        dot([1, 0], [1, 0, 0])


@given(vectors, st.floats(0.01, 10))
def test_softmax_sums_to_one(v, T):
    assert abs(tempered_softmax(v, T).sum() - 1) <= 1e-6


@given(vectors, st.floats(0.05, 10), st.floats(-100, 100))
def test_softmax_shift_invariant(v, T, c):
    np.testing.assert_allclose(tempered_softmax(v + c, T), tempered_softmax(v, T), atol=1e-9)


@settings(max_examples=200)
@given(st.integers(2, 10).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements=st.floats(0.001, 1)),
    arrays(np.float64, n, elements=st.floats(0.001, 1)))))
def test_gibbs_inequality(pair):
    t, p = (x / x.sum() for x in pair)
    assert cross_entropy(t, p) >= cross_entropy(t, t) - 1e-9

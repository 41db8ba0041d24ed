import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from protorefine.banks import ClusterLabelTable
from protorefine.refinement import (RunningMarginal, align, disagreement_rate, distribution_align,
                                    head_mean_cluster_label, refine, reliability)

probs = st.integers(2, 8).flatmap(
    lambda C: arrays(np.float64, C, elements=st.floats(0.01, 1.0))).map(lambda x: x / x.sum())


def table(rows, valid=None):
    z = np.asarray(rows, dtype=np.float64)
    return ClusterLabelTable(z, np.ones(len(z), bool) if valid is None else np.asarray(valid))


def test_uniform_marginal_is_identity():
    p = np.array([0.6, 0.3, 0.1])
    rm = RunningMarginal.uniform(3)
    np.testing.assert_allclose(distribution_align(p, rm), p)


def test_align_flattens_bias():
    np.testing.assert_allclose(align([0.5, 0.5], np.array([0.25, 0.75])), [0.75, 0.25])
    np.testing.assert_allclose(align([0.8, 0.2], np.array([0.8, 0.2])), [0.5, 0.5])


def test_marginal_ema_update():
    rm = RunningMarginal.uniform(2, momentum=0.99)
    distribution_align(np.array([[1.0, 0.0], [1.0, 0.0]]), rm)
    np.testing.assert_allclose(rm.p_bar, [0.505, 0.495])
    assert rm.warm


def test_bad_momentum():
    with pytest.raises(ValueError):
        RunningMarginal.uniform(3, momentum=1.0)


def test_refine_hand_example():
    out = refine(np.array([0.7, 0.3]), [table([[0.5, 0.5]])], np.array([0]), 0.8)
    np.testing.assert_allclose(out, [0.66, 0.34])


def test_refine_endpoints():
    p = np.array([[0.7, 0.3]])
    t = [table([[0.1, 0.9]])]
    a = np.array([[0]])
    np.testing.assert_allclose(refine(p, t, a, 1.0), p)
    np.testing.assert_allclose(refine(p, t, a, 0.0), [[0.1, 0.9]])


def test_refine_without_cluster_label():
    p = np.array([[0.7, 0.3], [0.4, 0.6]])
    t = [table([[0.1, 0.9], [0.5, 0.5]], [True, False])]
    out = refine(p, t, np.array([[-1], [1]]), 0.5)
    np.testing.assert_array_equal(out, p)
    np.testing.assert_array_equal(refine(p, [], np.array([[0], [0]]), 0.5), p)


def test_refine_bad_alpha():
    with pytest.raises(ValueError):
        refine(np.array([0.5, 0.5]), [], np.array([0]), 1.5)


def test_head_mean_skips_invalid_heads():
    t0 = table([[1.0, 0.0]])
    t1 = table([[0.0, 1.0], [0.5, 0.5]], [True, False])
    z, has = head_mean_cluster_label([t0, t1], np.array([[0, 0], [0, 1], [-1, 1]]))
    np.testing.assert_allclose(z[:2], [[0.5, 0.5], [1.0, 0.0]])
    assert has.tolist() == [True, True, False]


def test_reliability_boundary():
    assert reliability(np.array([[0.95, 0.05], [0.9499, 0.0501]]), 0.95).tolist() == [True, False]


def test_disagreement_rate():
    p = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
    z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert disagreement_rate(p, z, np.array([True, True, False])) == 0.5
    assert disagreement_rate(p, z, np.zeros(3, bool)) == 0.0


@given(probs)
def test_align_against_own_marginal_is_uniform(p):
    np.testing.assert_allclose(align(p, p), np.full(len(p), 1 / len(p)), atol=1e-9)


@given(probs, probs)
def test_align_twice_divides_by_marginal_squared(p, m):
    if len(m) != len(p):
        m = np.full(len(p), 1 / len(p))
    expected = p / m ** 2
    np.testing.assert_allclose(align(align(p, m), m), expected / expected.sum(), rtol=1e-9)


@settings(max_examples=200)
@given(probs, st.floats(0, 1), st.integers(0, 2**31))
def test_refined_is_convex_combination(p, alpha, seed):
    rng = np.random.default_rng(seed)
    z = rng.dirichlet(np.ones(len(p)))
    out = refine(p, [table([z])], np.array([0]), alpha)
    assert out.sum() == pytest.approx(1.0)
    lo, hi = np.minimum(p, z), np.maximum(p, z)
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


@settings(max_examples=200)
@given(probs, st.floats(0, 1), st.integers(0, 2**31))
def test_disagreeing_cluster_damps_confidence(p, alpha, seed):
    # if the cluster label puts no more mass on the classifier's top class
    # than the classifier does, the refined max cannot exceed the original max
    rng = np.random.default_rng(seed)
    z = rng.dirichlet(np.ones(len(p)))
    z = np.roll(z, 1) if np.argmax(z) == np.argmax(p) else z
    out = refine(p, [table([z])], np.array([0]), alpha)
    assert out.max() <= max(p.max(), z.max()) + 1e-12
    if z.max() <= p.max():
        assert out.max() <= p.max() + 1e-12

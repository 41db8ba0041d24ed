import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protorefine.banks import (ClusterLabelTable, SampleBanks, TableBuffer, footprint,
                               footprint_slots, naive_footprint_slots)
from protorefine.errors import IndexOutOfRange
from protorefine.verify import cluster_labels_from_dump, random_banks


def test_fresh_banks_empty():
    b = SampleBanks(5, 2)
    assert np.all(b.hard_label == -1) and not b.reliable.any()
    assert b.assignment(3, 1) is None


def test_record_prediction_reliable():
    b = SampleBanks(4)
    b.record_prediction(2, [0.97, 0.03], 0.95)
    assert b.hard_label[2] == 0 and b.reliable[2]


def test_record_prediction_threshold_inclusive():
    b = SampleBanks(2)
    b.record_prediction(0, [0.95, 0.05], 0.95)
    b.record_prediction(1, [0.94, 0.06], 0.95)
    assert b.reliable.tolist() == [True, False]


def test_record_prediction_overwrites():
    b = SampleBanks(1)
    b.record_prediction(0, [0.97, 0.03], 0.95)
    b.record_prediction(0, [0.2, 0.8], 0.95)
    assert b.hard_label[0] == 1 and not b.reliable[0]


def test_record_prediction_bad_tau():
    with pytest.raises(ValueError):
        SampleBanks(1).record_prediction(0, [1.0, 0.0], 1.0)


def test_index_errors():
    b = SampleBanks(3, 1)
    with pytest.raises(IndexOutOfRange):
        b.record_prediction(3, [1.0, 0.0], 0.5)
    with pytest.raises(IndexOutOfRange):
        b.record_assignment(0, 1, 0, 0.5)


def test_assignment_round_trip():
    b = SampleBanks(3, 2)
    b.record_assignment(1, 1, 4, 0.25)
    assert b.assignment(1, 1) == (4, 0.25)
    assert b.assignment(1, 0) is None


def test_cluster_label_even_split():
    b = SampleBanks(2)
    b.record_prediction(np.array([0, 1]), np.array([[0.9, 0.1], [0.1, 0.9]]), 0.95)
    b.record_assignment(np.array([0, 1]), 0, np.array([0, 0]), np.array([0.7, 0.7]))
    t = b.build_cluster_labels(0, 2, 2)
    np.testing.assert_allclose(t.z[0], [0.5, 0.5])
    assert t.valid.tolist() == [True, False]
    np.testing.assert_allclose(t.z[1], [0.5, 0.5])


def test_cluster_label_weighted_by_similarity():
    b = SampleBanks(3)
    b.record_prediction(np.arange(3), np.array([[1, 0, 0], [1, 0, 0], [0, 0, 1.0]]), 0.5)
    b.record_assignment(np.arange(3), 0, np.zeros(3, int), np.array([0.5, 0.25, 0.25]))
    np.testing.assert_allclose(b.build_cluster_labels(0, 1, 3).z[0], [0.75, 0.0, 0.25])


def test_cluster_label_negative_similarity_floored():
    b = SampleBanks(2)
    b.record_prediction(np.arange(2), np.array([[1, 0.0], [0, 1.0]]), 0.5)
    b.record_assignment(np.arange(2), 0, np.zeros(2, int), np.array([-0.4, -0.9]))
    t = b.build_cluster_labels(0, 1, 2)
    np.testing.assert_allclose(t.z[0], [0.5, 0.5])
    assert t.valid[0]


def test_footprint_reference_scale():
    assert footprint_slots(50000, 1, 200, 10) == 202000
    assert naive_footprint_slots(50000, 128) == 6_400_000


def test_footprint_from_objects():
    b = SampleBanks(100, 2)
    t = ClusterLabelTable(np.full((7, 3), 1 / 3), np.zeros(7, bool))
    assert footprint(b, t) == 4 * 100 * 2 + 21 == b.slots + 21


def test_table_buffer_swap():
    tb = TableBuffer()
    t = [ClusterLabelTable(np.eye(2), np.ones(2, bool))]
    tb.stage(t)
    assert tb.previous is None
    tb.swap()
    assert tb.previous == t and tb.current is None


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.integers(1, 12), st.integers(2, 8), st.integers(0, 2**31))
def test_table_rows_normalized(N, K, C, seed):
    b = random_banks(np.random.default_rng(seed), N, K, C)
    t = b.build_cluster_labels(0, K, C)
    np.testing.assert_allclose(t.z.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(t.z >= 0)
    members = np.bincount(b.cluster_of[b.cluster_of[:, 0] >= 0, 0], minlength=K)
    assert np.array_equal(t.valid, members > 0)


def test_table_matches_dump_oracle(tmp_path, rng):
    b = random_banks(rng, 2000, 15, 6)
    b.dump_csv(tmp_path / "banks.csv")
    z, valid = cluster_labels_from_dump(tmp_path / "banks.csv", 0, 15, 6)
    t = b.build_cluster_labels(0, 15, 6)
    np.testing.assert_allclose(t.z[valid], z[valid], atol=1e-12)
    np.testing.assert_array_equal(t.valid, valid)


def test_banks_csv_round_trip(tmp_path):
    b = SampleBanks(4, 2)
    b.record_prediction(np.arange(3), np.array([[0.99, 0.01], [0.3, 0.7], [0.5, 0.5]]), 0.9)
    b.record_assignment(np.arange(3), 0, np.array([1, 0, 1]), np.array([0.1, 0.2, 1 / 3]))
    b.record_assignment(2, 1, 5, -0.125)
    b.dump_csv(tmp_path / "b.csv")
    back = SampleBanks.load_csv(tmp_path / "b.csv")
    for name in ("hard_label", "reliable", "cluster_of"):
        np.testing.assert_array_equal(getattr(back, name), getattr(b, name))
    np.testing.assert_array_equal(np.isnan(back.sim_score), np.isnan(b.sim_score))
    m = ~np.isnan(b.sim_score)
    np.testing.assert_array_equal(back.sim_score[m], b.sim_score[m])


def test_table_csv_round_trip(tmp_path):
    t = ClusterLabelTable(np.array([[0.2, 0.8], [0.5, 0.5], [1 / 3, 2 / 3]]),
                          np.array([True, False, True]))
    t.dump_csv(tmp_path / "t.csv")
    back = ClusterLabelTable.load_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.z, t.z)
    np.testing.assert_array_equal(back.valid, t.valid)

"""Tests for partitions, synthetic data, splitting and the taxonomy check."""

import numpy as np
import pytest

from datasets import (
    DatasetPartition,
    SyntheticSpec,
    classify_partition,
    combine_horizontal,
    combine_vertical,
    generate,
    holdout_split,
    partition_horizontal,
    partition_vertical,
    read_csv,
    write_csv,
)
from errors import InvalidDatasetError, InvalidParameterError
from oracles import ridge_closed_form


class TestDatasetPartition:
    def test_duplicate_ids(self):
        with pytest.raises(InvalidDatasetError):
            DatasetPartition(ids=["a", "a"], features=[[1.0], [2.0]])

    def test_row_count_mismatch(self):
        with pytest.raises(InvalidDatasetError):
            DatasetPartition(ids=["a"], features=[[1.0], [2.0]])

    def test_label_count_mismatch(self):
        with pytest.raises(InvalidDatasetError):
            DatasetPartition(ids=["a", "b"], features=[[1.0], [2.0]], labels=[1.0])

    def test_default_feature_names(self):
        assert DatasetPartition(ids=["a"], features=[[1.0, 2.0]]).feature_names == ["x0", "x1"]


class TestGenerate:
    def test_noiseless_recovers_weights(self):
        spec = SyntheticSpec(n_samples=100, n_features_a=2, n_features_b=2, true_weights=[1.0, -2.0, 0.5, 3.0],
                             noise_sigma=0.0, seed=1)
        pooled = combine_vertical(*generate(spec))
        theta = ridge_closed_form(pooled.features, pooled.labels, 0.0)
        np.testing.assert_allclose(theta, [1.0, -2.0, 0.5, 3.0], atol=1e-8)

    def test_regeneration_is_identical(self):
        spec = SyntheticSpec(n_samples=30, n_features_a=1, n_features_b=2, noise_sigma=0.3, seed=4)
        first, second = generate(spec), generate(spec)
        np.testing.assert_array_equal(first[1].labels, second[1].labels)
        np.testing.assert_array_equal(first[0].features, second[0].features)

    def test_zero_samples(self):
        part_a, part_b = generate(SyntheticSpec(n_samples=0, n_features_a=2, n_features_b=1))
        assert part_a.n_samples == part_b.n_samples == 0
        assert part_a.n_features == 2

    def test_labels_only_at_b(self):
        part_a, part_b = generate(SyntheticSpec(n_samples=10, n_features_a=2, n_features_b=1))
        assert not part_a.has_labels and part_b.has_labels

    def test_non_overlapping_ids(self):
        part_a, part_b = generate(SyntheticSpec(n_samples=10, n_features_a=1, n_features_b=1, n_only_a=3, n_only_b=4))
        assert part_a.n_samples == 13 and part_b.n_samples == 14
        assert len(set(part_a.ids) & set(part_b.ids)) == 10

    def test_weight_length_checked(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_samples=5, n_features_a=1, n_features_b=1, true_weights=[1.0])


class TestPartitioning:
    def test_k_one_is_identity(self, pooled_data):
        (only,) = partition_horizontal(pooled_data, 1)
        assert only.ids == pooled_data.ids

    def test_equal_iid_sizes(self, pooled_data):
        data = pooled_data.take(range(100))
        assert sorted(p.n_samples for p in partition_horizontal(data, 4, seed=2)) == [25, 25, 25, 25]

    def test_union_equals_input(self, pooled_data):
        parts = partition_horizontal(pooled_data, 7, seed=3)
        pooled = combine_horizontal(parts)
        order = np.argsort(pooled.ids)
        reference = np.argsort(pooled_data.ids)
        np.testing.assert_array_equal(pooled.features[order], pooled_data.features[reference])

    def test_label_skew_sorts_labels(self, pooled_data):
        parts = partition_horizontal(pooled_data, 2, scheme="label-skew")
        assert parts[0].labels.max() <= parts[1].labels.min()

    def test_too_many_parts(self, pooled_data):
        with pytest.raises(InvalidDatasetError):
            partition_horizontal(pooled_data.take(range(3)), 4)

    def test_vertical_split(self):
        data = DatasetPartition(ids=["a", "b"], features=[[1.0, 2.0], [3.0, 4.0]], labels=[5.0, 6.0],
                                feature_names=["f0", "f1"])
        part_a, part_b = partition_vertical(data, [0])
        assert part_a.feature_names == ["f0"] and part_b.feature_names == ["f1"]
        assert not part_a.has_labels and part_b.has_labels
        np.testing.assert_array_equal(combine_vertical(part_a, part_b).features, data.features)

    def test_vertical_split_needs_both_sides(self, pooled_data):
        with pytest.raises(InvalidDatasetError):
            partition_vertical(pooled_data, [])
        with pytest.raises(InvalidDatasetError):
            partition_vertical(pooled_data, range(pooled_data.n_features))


class TestClassify:
    def test_horizontal(self, pooled_data):
        assert classify_partition(partition_horizontal(pooled_data, 3)) == "horizontal"

    def test_vertical(self, pooled_data):
        assert classify_partition(list(partition_vertical(pooled_data, [0, 2]))) == "vertical"

    def test_transfer(self):
        one = DatasetPartition(ids=["a"], features=[[1.0]], feature_names=["x"])
        two = DatasetPartition(ids=["b"], features=[[1.0]], feature_names=["y"])
        assert classify_partition([one, two]) == "transfer"

    def test_mixed(self):
        one = DatasetPartition(ids=["a", "b"], features=[[1.0], [2.0]], feature_names=["x"])
        two = DatasetPartition(ids=["b", "c"], features=[[1.0], [2.0]], feature_names=["x"])
        assert classify_partition([one, two]) == "mixed"

    def test_needs_two_parts(self, pooled_data):
        with pytest.raises(InvalidParameterError):
            classify_partition([pooled_data])


def test_holdout_split_is_disjoint():
    train, test = holdout_split(50, seed=1)
    assert len(test) == 10 and len(train) == 40
    assert not set(train) & set(test)


def test_csv_round_trip(tmp_path, pooled_data):
    path = tmp_path / "pooled.csv"
    write_csv(pooled_data, str(path))
    loaded = read_csv(str(path))
    assert loaded.ids == pooled_data.ids
    assert loaded.feature_names == pooled_data.feature_names
    np.testing.assert_array_equal(loaded.features, pooled_data.features)
    np.testing.assert_array_equal(loaded.labels, pooled_data.labels)


def test_csv_needs_id_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,label\n1,2\n")
    with pytest.raises(InvalidDatasetError):
        read_csv(str(path))


def test_csv_missing_file(tmp_path):
    with pytest.raises(InvalidDatasetError, match="cannot read"):
        read_csv(str(tmp_path / "absent.csv"))


@pytest.mark.parametrize("text", ["", "id,x0\nu1,1.0\nu2,oops\n", "id,x0,label\nu1,1.0,high\n"])
def test_csv_rejects_unparsable_content(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(InvalidDatasetError):
        read_csv(str(path))

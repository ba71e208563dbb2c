import os

import numpy as np
import pytest

from gdakit import (
    DimensionMismatch,
    DTypeMismatch,
    FeatureMatrix,
    IoFailure,
    MalformedHeader,
    ZeroRow,
    l2_normalize,
    load_bundle,
    load_labels,
    load_matrix,
    partition_longtail,
    sample_fewshot,
    save_labels,
    save_matrix,
)
from gdakit.data import read_npy, write_npy


class TestNpyFormat:
    def test_written_file_round_trips(self, tmp_path):
        path = tmp_path / "a.npy"
        values = np.array([[1, 0], [0, 1], [1, 1]], dtype=np.float32)
        save_matrix(path, FeatureMatrix(values))
        loaded = load_matrix(path)
        assert loaded.n == 3 and loaded.d == 2
        assert np.array_equal(loaded.values, values)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "bad.npy"
        header = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }"
        header += " " * (64 - (10 + len(header) + 1) % 64) + "\n"
        blob = b"\x93NUMPY\x01\x00" + len(header).to_bytes(2, "little")
        blob += header.encode() + np.zeros(3, np.float32).tobytes()  # 3 of 4 values
        path.write_bytes(blob)
        with pytest.raises(MalformedHeader):
            load_matrix(path)

    def test_save_load_byte_identical(self, tmp_path):
        # files produced by numpy itself must survive load->save unchanged
        rng = np.random.default_rng(7)
        for i in range(20):
            shape = (int(rng.integers(1, 40)), int(rng.integers(1, 40)))
            arr = rng.standard_normal(shape).astype(np.float32)
            original = tmp_path / f"orig_{i}.npy"
            rewritten = tmp_path / f"rewritten_{i}.npy"
            np.save(original, arr)
            save_matrix(rewritten, load_matrix(original))
            assert original.read_bytes() == rewritten.read_bytes()

    def test_non_2d_rejected(self, tmp_path):
        path = tmp_path / "vec.npy"
        np.save(path, np.zeros(5, np.float32))
        with pytest.raises(MalformedHeader):
            load_matrix(path)

    def test_dtype_mismatch(self, tmp_path):
        path = tmp_path / "f8.npy"
        np.save(path, np.zeros((2, 2), np.float64))
        with pytest.raises(DTypeMismatch):
            load_matrix(path)

    def test_missing_file_is_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            load_matrix(tmp_path / "nope.npy")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.npy"
        path.write_bytes(b"not an npy file at all")
        with pytest.raises(MalformedHeader):
            load_matrix(path)

    def test_fortran_order_rejected(self, tmp_path):
        path = tmp_path / "fortran.npy"
        np.save(path, np.asfortranarray(np.zeros((3, 2), np.float32)))
        with pytest.raises(MalformedHeader):
            load_matrix(path)

    def test_labels_round_trip(self, tmp_path):
        path = tmp_path / "labels.npy"
        labels = np.array([0, 2, 1, 2], dtype=np.int64)
        save_labels(path, labels)
        assert np.array_equal(load_labels(path), labels)
        # numpy reads our files too
        assert np.array_equal(np.load(path), labels)

    def test_negative_labels_rejected(self, tmp_path):
        path = tmp_path / "neg.npy"
        np.save(path, np.array([0, -1], dtype=np.int64))
        with pytest.raises(MalformedHeader):
            load_labels(path)

    def test_nan_payload_rejected(self, tmp_path):
        path = tmp_path / "nan.npy"
        np.save(path, np.full((2, 2), np.nan, np.float32))
        with pytest.raises(MalformedHeader):
            load_matrix(path)

    def test_zero_row_matrix_allowed_by_raw_reader(self, tmp_path):
        path = tmp_path / "empty.npy"
        np.save(path, np.zeros((0, 4), np.float32))
        assert read_npy(path, "<f4", ndim=2).shape == (0, 4)
        with pytest.raises(MalformedHeader):
            load_matrix(path)  # FeatureMatrix requires n >= 1


class TestFeatureMatrix:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.array([[np.nan, 1.0]]))

    def test_rejects_non_unit_when_flagged(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.array([[3.0, 4.0]]), normalized=True)

    def test_values_read_only(self):
        m = FeatureMatrix(np.ones((2, 2), np.float32))
        with pytest.raises(ValueError):
            m.values[0, 0] = 5.0


class TestL2Normalize:
    def test_three_four_five(self):
        m = l2_normalize(FeatureMatrix(np.array([[3.0, 4.0]])))
        np.testing.assert_allclose(m.values, [[0.6, 0.8]], atol=1e-7)
        assert m.normalized

    def test_unit_row_unchanged(self):
        m = l2_normalize(FeatureMatrix(np.array([[1.0, 0.0]])))
        np.testing.assert_array_equal(m.values, [[1.0, 0.0]])

    def test_random_rows_unit_norm(self, rng):
        m = l2_normalize(FeatureMatrix(rng.standard_normal((10, 8))))
        norms = np.linalg.norm(m.values.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-6)

    def test_idempotent(self, rng):
        m = l2_normalize(FeatureMatrix(rng.standard_normal((30, 12)) * 100))
        again = l2_normalize(m)
        np.testing.assert_allclose(again.values, m.values, atol=1e-6)

    def test_zero_row(self):
        with pytest.raises(ZeroRow):
            l2_normalize(FeatureMatrix(np.array([[0.0, 0.0], [1.0, 0.0]])))


class TestSampleFewshot:
    def test_budget_equals_supply(self):
        split = sample_fewshot(np.array([0, 0, 1, 1]), shots=2, seed=3)
        assert np.array_equal(split.indices, [0, 1, 2, 3])

    def test_one_per_class(self):
        labels = np.array([0, 0, 0, 1])
        split = sample_fewshot(labels, shots=1, seed=7)
        assert len(split.indices) == 2
        assert set(labels[split.indices]) == {0, 1}

    def test_deterministic(self, rng):
        labels = rng.integers(0, 6, size=200)
        for seed in (0, 1, 99):
            a = sample_fewshot(labels, shots=4, seed=seed)
            b = sample_fewshot(labels, shots=4, seed=seed)
            assert np.array_equal(a.indices, b.indices)

    def test_seed_changes_selection(self, rng):
        labels = rng.integers(0, 4, size=400)
        a = sample_fewshot(labels, shots=8, seed=0)
        b = sample_fewshot(labels, shots=8, seed=1)
        assert not np.array_equal(a.indices, b.indices)

    def test_per_class_budget_never_exceeded(self, rng):
        for trial in range(25):
            labels = rng.integers(0, 5, size=int(rng.integers(5, 120)))
            shots = int(rng.integers(1, 10))
            split = sample_fewshot(labels, shots, seed=trial)
            assert np.array_equal(split.indices, np.unique(split.indices))
            for c in range(int(labels.max()) + 1):
                available = int((labels == c).sum())
                got = int((labels[split.indices] == c).sum())
                assert got == min(shots, available)


class TestPartitionLongtail:
    def test_definition(self):
        labels = np.concatenate([np.zeros(150), np.ones(50), np.full(5, 2)]).astype(int)
        groups = partition_longtail(labels)
        assert groups.many == {0}
        assert groups.medium == {1}
        assert groups.few == {2}

    def test_boundary_100_is_medium(self):
        groups = partition_longtail(np.zeros(100, dtype=int))
        assert groups.medium == {0} and not groups.many

    def test_boundary_20_is_medium(self):
        groups = partition_longtail(np.zeros(20, dtype=int))
        assert groups.medium == {0} and not groups.few

    def test_partitions_all_classes(self, rng):
        for trial in range(20):
            k = int(rng.integers(1, 8))
            labels = rng.integers(0, k, size=int(rng.integers(k, 600)))
            groups = partition_longtail(labels, n_classes=k)
            combined = sorted(groups.many | groups.medium | groups.few)
            assert combined == list(range(k))
            assert not (groups.many & groups.medium)
            assert not (groups.many & groups.few)
            assert not (groups.medium & groups.few)


def write_bundle_dir(root, rng, n_classes=3, d=8, per_split=(30, 10, 10)):
    """Write a consistent synthetic dataset directory; returns class directions."""
    os.makedirs(root, exist_ok=True)
    directions = rng.standard_normal((n_classes, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    for split, per_class in zip(("train", "val", "test"), per_split):
        y = np.repeat(np.arange(n_classes), per_class)
        x = directions[y] + 0.15 * rng.standard_normal((len(y), d))
        write_npy(os.path.join(root, f"{split}_features.npy"), x.astype(np.float32))
        write_npy(os.path.join(root, f"{split}_labels.npy"), y.astype(np.int64))
    write_npy(os.path.join(root, "zeroshot_weights.npy"), directions.astype(np.float32))
    with open(os.path.join(root, "class_names.txt"), "w") as fh:
        fh.writelines(f"class {i}\n" for i in range(n_classes))
    return directions


class TestLoadBundle:
    def test_loads_and_normalizes(self, tmp_path, rng):
        write_bundle_dir(tmp_path / "toy", rng)
        bundle = load_bundle(tmp_path / "toy")
        assert bundle.name == "toy"
        assert bundle.zeroshot.k == 3 == len(bundle.class_names)
        assert bundle.train[0].normalized
        norms = np.linalg.norm(bundle.train[0].values, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-4)

    def test_normalize_can_be_disabled(self, tmp_path, rng):
        write_bundle_dir(tmp_path / "toy", rng)
        bundle = load_bundle(tmp_path / "toy", normalize=False)
        assert not bundle.train[0].normalized

    def test_missing_head_fails(self, tmp_path, rng):
        write_bundle_dir(tmp_path / "toy", rng)
        os.remove(tmp_path / "toy" / "zeroshot_weights.npy")
        with pytest.raises(IoFailure):
            load_bundle(tmp_path / "toy")

    def test_head_class_count_mismatch(self, tmp_path, rng):
        write_bundle_dir(tmp_path / "toy", rng)
        with open(tmp_path / "toy" / "class_names.txt", "a") as fh:
            fh.write("extra class\n")
        with pytest.raises(DimensionMismatch):
            load_bundle(tmp_path / "toy")

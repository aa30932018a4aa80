import math

import numpy as np
import pytest

from pursuitbench import data


def toy_dataset(n_per_class=4, length=40, seed=0, float_coords=False):
    rng = np.random.default_rng(seed)
    n = 3 * n_per_class
    u = rng.integers(0, 4097, size=(n, length, 2)).astype(np.int64)
    v = rng.integers(0, 4097, size=(n, length, 2)).astype(np.int64)
    if float_coords:
        u = u + rng.uniform(-0.25, 0.25, size=u.shape)
        v = v + rng.uniform(-0.25, 0.25, size=v.shape)
    labels = np.repeat(np.arange(3, dtype=np.int64), n_per_class)
    return data.Dataset(u=u, v=v, labels=labels,
                        ids=np.arange(n, dtype=np.int64))


class TestSplit:
    def test_paper_split_arithmetic(self, full_dataset):
        train, test = data.split_test(full_dataset, data.SplitSpec(seed=1))
        assert len(train) == 255
        assert len(test) == 45
        assert test.class_counts() == {0: 15, 1: 15, 2: 15}

    def test_disjoint_and_union(self):
        ds = toy_dataset()
        train, test = data.split_test(ds, data.SplitSpec(test_per_class=1, seed=3))
        train_ids, test_ids = set(train.ids), set(test.ids)
        assert not (train_ids & test_ids)
        assert train_ids | test_ids == set(ds.ids)

    def test_minimal_split_leaves_empty_train(self):
        ds = toy_dataset(n_per_class=1)
        train, test = data.split_test(ds, data.SplitSpec(test_per_class=1, seed=0))
        assert len(train) == 0
        assert len(test) == 3

    def test_insufficient_class_rejected(self):
        ds = toy_dataset(n_per_class=2)
        with pytest.raises(ValueError, match="class 0"):
            data.split_test(ds, data.SplitSpec(test_per_class=3, seed=0))

    def test_deterministic(self):
        ds = toy_dataset()
        a = data.split_test(ds, data.SplitSpec(test_per_class=2, seed=9))
        b = data.split_test(ds, data.SplitSpec(test_per_class=2, seed=9))
        assert np.array_equal(a[0].ids, b[0].ids)
        assert np.array_equal(a[1].ids, b[1].ids)


class TestRotation:
    def test_quarter_turn(self):
        out = data.rotate_points(np.array([[1.0, 0.0]]), math.pi / 2)
        assert np.allclose(out, [[0.0, 1.0]], atol=1e-12)

    def test_identity(self):
        pts = np.array([[3.0, 4.0], [5.0, -2.0]])
        assert np.allclose(data.rotate_points(pts, 0.0), pts, atol=0)

    def test_eighth_turn(self):
        out = data.rotate_points(np.array([[1.0, 1.0]]), math.pi / 4)
        assert np.allclose(out, [[0.0, math.sqrt(2)]], atol=1e-12)

    def test_composition(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-10, 10, size=(50, 2))
        for a, b in [(0.3, 1.1), (2.0, 4.0), (5.5, 1.2)]:
            via_two = data.rotate_points(data.rotate_points(pts, a), b)
            direct = data.rotate_points(pts, a + b)
            assert np.allclose(via_two, direct, rtol=1e-9, atol=1e-9)

    def test_augment_preserves_size_and_labels(self):
        ds = toy_dataset()
        rot = data.augment_rotations(ds, np.random.default_rng(4))
        assert len(rot) == len(ds)
        assert np.array_equal(rot.labels, ds.labels)
        assert np.array_equal(rot.ids, ds.ids)

    def test_augment_deterministic(self):
        ds = toy_dataset()
        a = data.augment_rotations(ds, np.random.default_rng(4))
        b = data.augment_rotations(ds, np.random.default_rng(4))
        assert np.array_equal(a.u, b.u)

    def test_isometry(self):
        ds = toy_dataset(n_per_class=2, length=30)
        rot = data.augment_rotations(ds, np.random.default_rng(8))
        for i in range(len(ds)):
            orig = ds.u[i].astype(np.float64)
            d_orig = np.linalg.norm(orig[:, None] - orig[None, :], axis=2)
            d_rot = np.linalg.norm(rot.u[i][:, None] - rot.u[i][None, :], axis=2)
            assert np.allclose(d_rot, d_orig, rtol=1e-9, atol=1e-6)


class TestNormalizeTruncate:
    def test_normalize_examples(self):
        ds = toy_dataset(n_per_class=1, length=3)
        ds = data.Dataset(u=np.array([[[2048, 2048], [0, 0], [4096, 4096]]]),
                          v=ds.v[:1, :3], labels=ds.labels[:1], ids=ds.ids[:1])
        out = data.normalize(ds)
        assert out.u[0].tolist() == [[0.5, 0.5], [0.0, 0.0], [1.0, 1.0]]

    def test_truncate_identity_prefix(self):
        ds = toy_dataset(length=60)
        assert np.array_equal(data.truncate(ds, 60).u, ds.u)

    def test_truncate_composition(self):
        ds = toy_dataset(length=60)
        once = data.truncate(ds, 20)
        twice = data.truncate(data.truncate(ds, 40), 20)
        assert np.array_equal(once.u, twice.u)

    def test_truncate_range_check(self):
        ds = toy_dataset(length=60)
        with pytest.raises(ValueError):
            data.truncate(ds, 61)
        with pytest.raises(ValueError):
            data.truncate(ds, 0)


class TestKFold:
    def test_fold_sizes(self):
        ds = toy_dataset(n_per_class=5, length=10)   # 15 samples
        pairs = data.kfold_split(ds, 5, np.random.default_rng(0))
        assert len(pairs) == 5
        assert all(len(val) == 3 for _, val in pairs)
        assert all(len(train) == 12 for train, _ in pairs)

    def test_partition_property(self):
        ds = toy_dataset(n_per_class=4, length=10)
        pairs = data.kfold_split(ds, 5, np.random.default_rng(1))
        val_ids = [set(val.ids) for _, val in pairs]
        for i in range(len(val_ids)):
            for j in range(i + 1, len(val_ids)):
                assert not (val_ids[i] & val_ids[j])
        assert set().union(*val_ids) == set(ds.ids)
        for train, val in pairs:
            assert set(train.ids) == set(ds.ids) - set(val.ids)

    def test_too_many_folds_rejected(self):
        ds = toy_dataset(n_per_class=1, length=10)
        with pytest.raises(ValueError):
            data.kfold_split(ds, 5, np.random.default_rng(0))


class TestCsv:
    def test_row_count_and_round_trip_integers(self, tmp_path):
        ds = toy_dataset(n_per_class=2, length=25)
        path = tmp_path / "ds.csv"
        data.export_csv(ds, path)
        assert len(path.read_text().splitlines()) == 1 + 6 * 25
        back = data.import_csv(path)
        assert np.array_equal(back.u, ds.u.astype(np.float64))
        assert np.array_equal(back.v, ds.v.astype(np.float64))
        assert np.array_equal(back.labels, ds.labels)
        assert np.array_equal(back.ids, ds.ids)

    def test_emitted_file_is_fixed_point(self, tmp_path):
        # After one export/import cycle (which quantizes reals to 9
        # significant digits), further round trips are byte-identical.
        ds = data.augment_rotations(toy_dataset(n_per_class=2, length=20),
                                    np.random.default_rng(3))
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        data.export_csv(ds, first)
        data.export_csv(data.import_csv(first), second)
        assert first.read_bytes() == second.read_bytes()
        back = data.import_csv(second)
        again = data.import_csv(first)
        assert np.array_equal(back.u, again.u)

    def test_unknown_label_rejected_with_row(self, tmp_path):
        ds = toy_dataset(n_per_class=1, length=4)
        bad = data.Dataset(u=ds.u, v=ds.v,
                           labels=np.array([0, 7, 2]), ids=ds.ids)
        path = tmp_path / "bad.csv"
        data.export_csv(bad, path)
        with pytest.raises(data.CsvFormatError, match="label 7 at data row 5"):
            data.import_csv(path)

    def test_ragged_trajectory_rejected(self, tmp_path):
        ds = toy_dataset(n_per_class=1, length=4)
        path = tmp_path / "ragged.csv"
        data.export_csv(ds, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")   # drop final step row
        with pytest.raises(data.CsvFormatError, match="length"):
            data.import_csv(path)

    def test_bad_time_index_rejected(self, tmp_path):
        ds = toy_dataset(n_per_class=1, length=3)
        path = tmp_path / "badt.csv"
        data.export_csv(ds, path)
        lines = path.read_text().splitlines()
        parts = lines[2].split(",")
        parts[2] = "9"
        lines[2] = ",".join(parts)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(data.CsvFormatError, match="data row 2"):
            data.import_csv(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("traj_id,label,t,ux,uy\n0,0,0,1,2\n")
        with pytest.raises(data.CsvFormatError, match="columns"):
            data.import_csv(path)

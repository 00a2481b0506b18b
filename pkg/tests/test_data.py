# tests/test_data.py

import os
import sys
import tempfile
import unittest

import numpy as np

REPO_ROOT = os.path.join(os.path.dirname(__file__), '..')
if REPO_ROOT not in sys.path:
    sys.path.insert(0, REPO_ROOT)

from gatesel.data import (
    Dataset,
    HsiCube,
    SplitSpec,
    load_cube,
    load_delimited,
    mean_center_channels,
    minmax_scale,
    smote_oversample,
    standardize,
    stratified_split,
    stratified_split_indices,
)
from gatesel.errors import ConfigError, DataError
from synthetic import two_class_cube, write_cube


def sized_dataset(sizes, n_features=3, seed=0):
    rng = np.random.default_rng(seed)
    Z = np.repeat(np.arange(len(sizes)), sizes)
    X = rng.normal(size=(Z.shape[0], n_features))
    return Dataset(X, Z, tuple(f"f{j}" for j in range(n_features)), tuple(f"c{k}" for k in range(len(sizes))))


class TestDataset(unittest.TestCase):
    def test_missing_class_rejected(self):
        with self.assertRaises(DataError):
            Dataset(np.zeros((2, 1)), np.array([0, 0]), ("a",), ("x", "y"))

    def test_non_finite_rejected(self):
        with self.assertRaises(DataError):
            Dataset(np.array([[np.nan], [1.0]]), np.array([0, 1]), ("a",), ("x", "y"))

    def test_helpers(self):
        d = sized_dataset([3, 2])
        self.assertEqual((d.n_rows, d.n_features, d.class_count), (5, 3, 2))
        np.testing.assert_array_equal(d.class_sizes(), [3, 2])
        np.testing.assert_array_equal(d.onehot().sum(axis=0), [3, 2])
        cols = d.select_columns([2, 0])
        self.assertEqual(cols.feature_names, ("f2", "f0"))
        np.testing.assert_array_equal(cols.X[:, 1], d.X[:, 0])


class TestLoadDelimited(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text, name="data.csv"):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_shape_and_relabeling(self):
        rng = np.random.default_rng(1)
        lines = ["a,b,c,label"]
        labels = ["cp", "im", "pp", "om", "cp", "im", "pp", "om"] * 3
        for lab in labels:
            lines.append(",".join(f"{v:.3f}" for v in rng.random(3)) + f",{lab}")
        d = load_delimited(self._write("\n".join(lines)), label_column="label")
        self.assertEqual((d.n_rows, d.n_features, d.class_count), (24, 3, 4))
        self.assertEqual(d.class_names, ("cp", "im", "om", "pp"))
        # file row order is kept
        self.assertEqual(d.class_names[d.Z[1]], "im")

    def test_tab_separated_without_header(self):
        path = self._write("0.1\t0.2\t1\n0.3\t0.4\t2\n", "data.tsv")
        d = load_delimited(path, label_column=-1, delimiter="\t", header=False)
        self.assertEqual(d.feature_names, ("x0", "x1"))
        np.testing.assert_array_equal(d.Z, [0, 1])

    def test_missing_file(self):
        with self.assertRaises(DataError):
            load_delimited(os.path.join(self.tmp.name, "absent.csv"))

    def test_non_numeric_cell(self):
        with self.assertRaises(DataError):
            load_delimited(self._write("a,label\n1.0,x\nfoo,y\n"))

    def test_single_row_loads_as_one_class(self):
        d = load_delimited(self._write("a,label\n1.0,x\n"))
        self.assertEqual(d.class_count, 1)


class TestScaling(unittest.TestCase):
    def test_per_feature_endpoints(self):
        d = Dataset(np.array([[2.0], [4.0], [6.0]]), np.array([0, 1, 1]), ("a",), ("x", "y"))
        np.testing.assert_allclose(minmax_scale(d).X[:, 0], [0.0, 0.5, 1.0])

    def test_unit_interval_data_unchanged(self):
        d = Dataset(np.array([[0.0, 1.0], [0.25, 0.0], [1.0, 0.5]]), np.array([0, 1, 1]), ("a", "b"), ("x", "y"))
        np.testing.assert_allclose(minmax_scale(d).X, d.X)

    def test_constant_feature_warns(self):
        d = Dataset(np.array([[5.0], [5.0], [5.0]]), np.array([0, 1, 1]), ("a",), ("x", "y"))
        with self.assertLogs("gatesel.data", level="WARNING"):
            scaled = minmax_scale(d)
        np.testing.assert_array_equal(scaled.X, 0.0)

    def test_idempotent(self):
        d = sized_dataset([10, 10], n_features=4)
        once = minmax_scale(d)
        np.testing.assert_allclose(minmax_scale(once).X, once.X, atol=1e-12)

    def test_cube_scope_is_global(self):
        cube = HsiCube(np.array([[[0.0, 10.0]], [[5.0, 20.0]]]), np.array([[1], [1]]))
        scaled = minmax_scale(cube)
        np.testing.assert_allclose(scaled.pixels[:, 0, 0], [0.0, 0.25])
        np.testing.assert_allclose(scaled.pixels[:, 0, 1], [0.5, 1.0])

    def test_mean_center_channels(self):
        pixels = np.zeros((1, 3, 2))
        pixels[0, :, 0] = [0.0, 0.5, 1.0]
        pixels[0, :, 1] = [1.0, 2.0, 6.0]
        centered = mean_center_channels(HsiCube(pixels, np.ones((1, 3), dtype=int)))
        np.testing.assert_allclose(centered.pixels[0, :, 0], [-0.5, 0.0, 0.5])
        np.testing.assert_allclose(centered.flat_pixels().mean(axis=0), 0.0, atol=1e-9)

    def test_standardize(self):
        d = standardize(sized_dataset([6, 6]))
        np.testing.assert_allclose(d.X.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(d.X.std(axis=0), 1.0)


class TestSplit(unittest.TestCase):
    def test_ecoli_like_class_sizes(self):
        d = sized_dataset([143, 77, 52, 35, 20, 5, 2, 2])
        train_idx, test_idx = stratified_split_indices(d, SplitSpec(test_fraction=0.1, seed=3))
        self.assertEqual(test_idx.size, 36)
        self.assertTrue(30 <= test_idx.size <= 38)
        np.testing.assert_array_equal(np.sort(np.concatenate([train_idx, test_idx])), np.arange(336))
        self.assertEqual(np.intersect1d(train_idx, test_idx).size, 0)
        self.assertEqual(np.unique(d.Z[test_idx]).size, 8)

    def test_deterministic(self):
        d = sized_dataset([20, 30])
        spec = SplitSpec(test_fraction=0.2, seed=7)
        a = stratified_split_indices(d, spec)
        b = stratified_split_indices(d, spec)
        np.testing.assert_array_equal(a[1], b[1])

    def test_two_per_class_half(self):
        d = sized_dataset([2, 2])
        train, test = stratified_split(d, SplitSpec(test_fraction=0.5))
        np.testing.assert_array_equal(test.class_sizes(), [1, 1])
        np.testing.assert_array_equal(train.class_sizes(), [1, 1])

    def test_class_too_small(self):
        d = sized_dataset([5, 1])
        with self.assertRaises(DataError):
            stratified_split_indices(d, SplitSpec())

    def test_fraction_bounds(self):
        with self.assertRaises(ConfigError):
            SplitSpec(test_fraction=1.0)


class TestSmote(unittest.TestCase):
    def test_segment_geometry(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 5.0], [5.0, 6.0], [6.0, 6.0]])
        d = Dataset(X, np.array([0, 0, 1, 1, 1, 1]), ("a", "b"), ("x", "y"))
        out = smote_oversample(d, per_class_target=4, seed=1)
        np.testing.assert_array_equal(out.class_sizes(), [4, 4])
        minority = out.X[out.Z == 0]
        np.testing.assert_array_equal(minority[:2], X[:2])
        for p in minority[2:]:
            self.assertAlmostEqual(p[0], p[1])
            self.assertTrue(0.0 <= p[0] <= 1.0)

    def test_class_at_target_is_drawn_without_replacement(self):
        d = sized_dataset([200, 50])
        out = smote_oversample(d, per_class_target=200, seed=0)
        majority = out.X[out.Z == 0]
        self.assertEqual(np.unique(majority, axis=0).shape[0], 200)
        self.assertEqual(np.unique(np.vstack([majority, d.X[d.Z == 0]]), axis=0).shape[0], 200)

    def test_target_equal_to_sizes_keeps_rows(self):
        d = sized_dataset([4, 4])
        out = smote_oversample(d, per_class_target=4)
        self.assertEqual(
            sorted(map(tuple, out.X.tolist())),
            sorted(map(tuple, d.X.tolist())),
        )

    def test_single_row_class(self):
        d = sized_dataset([4, 1])
        with self.assertRaises(DataError):
            smote_oversample(d, per_class_target=4)


class TestCube(unittest.TestCase):
    def test_load_binary_descriptor(self):
        cube = two_class_cube()
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_cube(write_cube(tmp, cube))
        self.assertEqual((loaded.height, loaded.width, loaded.band_count), (4, 4, 3))
        np.testing.assert_allclose(loaded.pixels, cube.pixels.astype(np.float32), rtol=1e-6)
        np.testing.assert_array_equal(loaded.labels, cube.labels)

    def test_to_dataset_skips_unknown(self):
        cube = two_class_cube()
        data, flat_idx = cube.to_dataset()
        self.assertEqual(data.n_rows, 12)
        self.assertEqual(data.class_names, ("1", "2"))
        self.assertTrue(np.all(cube.labels.ravel()[flat_idx] != HsiCube.UNKNOWN))

    def test_label_grid_shape_checked(self):
        with self.assertRaises(DataError):
            HsiCube(np.zeros((2, 2, 1)), np.zeros((2, 3)))


if __name__ == '__main__':
    unittest.main()

# tests/test_clustering.py

import os
import sys
import unittest

import numpy as np

REPO_ROOT = os.path.join(os.path.dirname(__file__), '..')
if REPO_ROOT not in sys.path:
    sys.path.insert(0, REPO_ROOT)

from gatesel.clustering import FuzzyPartition, fcm, harden
from gatesel.errors import ConfigError, DimensionMismatchError
from synthetic import blobs

FOUR_POINTS = np.array([[0.0, 0.0], [0.0, 1.0], [100.0, 100.0], [100.0, 101.0]])


class TestFcm(unittest.TestCase):
    def test_single_cluster(self):
        X = np.random.default_rng(0).normal(size=(15, 3))
        p = fcm(X, 1, seed=0)
        np.testing.assert_array_equal(p.U, 1.0)
        np.testing.assert_allclose(p.centers[0], X.mean(axis=0))

    def test_two_far_blobs(self):
        p = fcm(FOUR_POINTS, 2, seed=1)
        labels = harden(p)
        self.assertEqual(labels[0], labels[1])
        self.assertEqual(labels[2], labels[3])
        self.assertNotEqual(labels[0], labels[2])
        self.assertTrue(np.all(p.U.max(axis=1) > 0.99))
        means = {(0.0, 0.5), (100.0, 100.5)}
        for center in p.centers:
            self.assertTrue(any(np.allclose(center, m, atol=1e-3) for m in means))

    def test_point_on_center_is_crisp(self):
        X = np.array([[0.0], [1.0], [10.0]])
        p = fcm(X, 2, init_centers=[[0.0], [10.0]], max_iter=1)
        np.testing.assert_array_equal(p.U[0], [1.0, 0.0])
        np.testing.assert_array_equal(p.U[2], [0.0, 1.0])

    def test_rows_sum_to_one_and_objective_monotone(self):
        X = blobs(n_per_class=40, centers=((0, 0), (1, 1), (0, 2)), spread=0.6, seed=2).X
        p = fcm(X, 3, seed=3)
        np.testing.assert_allclose(p.U.sum(axis=1), 1.0, atol=1e-9)
        trace = np.asarray(p.objective_trace)
        self.assertTrue(np.all(np.diff(trace) <= 1e-9 * trace[:-1]))
        self.assertEqual(len(trace), p.n_iter)
        self.assertEqual(p.n_clusters, 3)

    def test_deterministic(self):
        X = blobs(seed=4).X
        a, b = fcm(X, 2, seed=7), fcm(X, 2, seed=7)
        np.testing.assert_array_equal(a.U, b.U)

    def test_row_permutation_equivariance(self):
        X = blobs(n_per_class=20, seed=5).X
        perm = np.random.default_rng(6).permutation(X.shape[0])
        a = fcm(X, 2, seed=8)
        b = fcm(X[perm], 2, seed=8)
        np.testing.assert_allclose(b.U, a.U[perm], atol=1e-6)

    def test_arguments(self):
        X = np.zeros((3, 2)) + np.arange(3)[:, None]
        with self.assertRaises(ConfigError):
            fcm(X, 4)
        with self.assertRaises(ConfigError):
            fcm(X, 2, m=1.0)
        with self.assertRaises(ConfigError):
            fcm(X, 2, max_iter=0)
        with self.assertRaises(DimensionMismatchError):
            fcm(X, 2, init_centers=np.zeros((2, 3)))


class TestHarden(unittest.TestCase):
    def test_crisp_and_ties(self):
        U = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        p = FuzzyPartition(U, np.zeros((2, 1)))
        np.testing.assert_array_equal(harden(p), [0, 1, 0])


if __name__ == '__main__':
    unittest.main()

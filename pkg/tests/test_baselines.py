# tests/test_baselines.py

import math
import os
import sys
import unittest

import numpy as np

REPO_ROOT = os.path.join(os.path.dirname(__file__), '..')
if REPO_ROOT not in sys.path:
    sys.path.insert(0, REPO_ROOT)

from gatesel.baselines import (
    FISHER_SENTINEL,
    FeatureRanking,
    equal_width_codes,
    fisher_score_rank,
    mutual_info_rank,
)
from gatesel.data import Dataset
from gatesel.errors import ConfigError, DataError


def dataset(X, Z):
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z)
    return Dataset(X, Z, tuple(f"f{j}" for j in range(X.shape[1])), tuple(f"c{k}" for k in range(Z.max() + 1)))


class TestFisherScore(unittest.TestCase):
    def test_label_feature_beats_noise(self):
        rng = np.random.default_rng(0)
        Z = np.array([0, 1] * 5)
        X = np.column_stack([Z + rng.normal(0, 0.05, size=10), rng.normal(size=10), np.full(10, 3.0)])
        ranking = fisher_score_rank(dataset(X, Z))
        self.assertEqual(ranking.order[0], 0)
        self.assertEqual(ranking.order[-1], 2)
        self.assertEqual(ranking.scores[2], 0.0)
        self.assertEqual(ranking.method, "fisher")

    def test_matches_formula(self):
        X = np.array([[1.0], [2.0], [4.0], [6.0]])
        Z = np.array([0, 0, 1, 1])
        # means 1.5 / 5 / 3.25, variances 0.25 / 1
        expected = (2 * 1.75 ** 2 + 2 * 1.75 ** 2) / (2 * 0.25 + 2 * 1.0)
        self.assertAlmostEqual(fisher_score_rank(dataset(X, Z)).scores[0], expected)

    def test_duplicate_columns_tie_to_lower_index(self):
        rng = np.random.default_rng(1)
        Z = rng.integers(0, 2, size=20)
        Z[:2] = [0, 1]
        col = rng.normal(size=20) + Z
        X = np.column_stack([rng.normal(size=20) * 0.01, col, col])
        ranking = fisher_score_rank(dataset(X, Z))
        self.assertEqual(ranking.scores[1], ranking.scores[2])
        self.assertLess(list(ranking.order).index(1), list(ranking.order).index(2))

    def test_affine_invariance(self):
        rng = np.random.default_rng(2)
        Z = np.repeat([0, 1, 2], 10)
        X = rng.normal(size=(30, 2)) + Z[:, None]
        a = fisher_score_rank(dataset(X, Z)).scores
        b = fisher_score_rank(dataset(X * np.array([-3.0, 0.5]) + 7.0, Z)).scores
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_zero_within_class_variance(self):
        Z = np.array([0, 0, 1, 1])
        X = np.column_stack([Z.astype(float), [0.1, 0.9, 0.2, 0.4]])
        with self.assertLogs("gatesel.baselines", level="WARNING"):
            ranking = fisher_score_rank(dataset(X, Z))
        self.assertEqual(ranking.scores[0], FISHER_SENTINEL)
        self.assertEqual(ranking.order[0], 0)
        self.assertTrue(np.all(np.isfinite(ranking.scores)))

    def test_single_class(self):
        with self.assertRaises(DataError):
            fisher_score_rank(Dataset(np.ones((3, 1)), np.zeros(3, dtype=int), ("a",), ("only",)))


class TestMutualInfo(unittest.TestCase):
    def test_label_feature(self):
        Z = np.array([0, 1] * 50)
        X = np.column_stack([Z.astype(float), np.full(100, 2.0)])
        ranking = mutual_info_rank(dataset(X, Z))
        self.assertAlmostEqual(ranking.scores[0], math.log(2), places=12)
        self.assertEqual(ranking.scores[1], 0.0)
        np.testing.assert_array_equal(ranking.order, [0, 1])

    def test_independent_feature_ranks_below_informative(self):
        rng = np.random.default_rng(3)
        Z = rng.integers(0, 2, size=200)
        Z[:2] = [0, 1]
        informative = Z + rng.normal(0, 0.3, size=200)
        shuffled = rng.permutation(informative)
        ranking = mutual_info_rank(dataset(np.column_stack([shuffled, informative]), Z))
        self.assertEqual(ranking.order[0], 1)
        self.assertLess(ranking.scores[0], 0.1)
        self.assertTrue(np.all(ranking.scores >= 0.0))

    def test_bins(self):
        with self.assertRaises(ConfigError):
            mutual_info_rank(dataset([[0.0], [1.0]], [0, 1]), bins=1)

    def test_equal_width_codes(self):
        np.testing.assert_array_equal(equal_width_codes(np.array([0.0, 0.49, 0.5, 1.0]), 2), [0, 0, 1, 1])
        np.testing.assert_array_equal(equal_width_codes(np.full(3, 4.0), 5), [0, 0, 0])


class TestFeatureRanking(unittest.TestCase):
    def test_top(self):
        ranking = FeatureRanking.from_scores([0.2, 0.9, 0.2, 0.5])
        np.testing.assert_array_equal(ranking.order, [1, 3, 0, 2])
        np.testing.assert_array_equal(ranking.top(2), [1, 3])
        with self.assertRaises(ConfigError):
            ranking.top(5)


if __name__ == '__main__':
    unittest.main()

# tests/test_persistence.py

import json
import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd

REPO_ROOT = os.path.join(os.path.dirname(__file__), '..')
if REPO_ROOT not in sys.path:
    sys.path.insert(0, REPO_ROOT)

from gatesel.errors import ConfigError
from gatesel.losses import LossConfig
from gatesel.persistence import (
    CheckpointStore,
    export_loss_trace,
    load_selector,
    save_selector,
    selector_from_dict,
    selector_to_dict,
)
from gatesel.trainer import PretrainSpec, TrainSpec, train
from synthetic import planted_dataset


def small_selector(seed=0):
    spec = TrainSpec(hidden_sizes=(4,), loss_config=LossConfig(beta=1.0, n_select=2), iterations=15,
                     seed=seed, pretrain=PretrainSpec(max_iters=10))
    return train(spec, planted_dataset(n=40, seed=seed))


class TestSelectorFiles(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.selector = small_selector()

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_save_and_load(self):
        path = os.path.join(self.tmp.name, "nested", "selector.json")
        save_selector(self.selector, path)
        loaded = load_selector(path)
        np.testing.assert_array_equal(loaded.network.lambdas, self.selector.network.lambdas)
        for a, b in zip(loaded.network.parameters(), self.selector.network.parameters()):
            np.testing.assert_array_equal(a, b)
        self.assertEqual(loaded.spec, self.selector.spec)
        self.assertEqual(loaded.loss_trace, self.selector.loss_trace)
        np.testing.assert_array_equal(loaded.selected(2), self.selector.selected(2))

    def test_unknown_format(self):
        payload = selector_to_dict(self.selector)
        payload["format"] = 99
        with self.assertRaises(ConfigError):
            selector_from_dict(payload)

    def test_missing_and_corrupt_files(self):
        with self.assertRaises(ConfigError):
            load_selector(os.path.join(self.tmp.name, "absent.json"))
        path = os.path.join(self.tmp.name, "broken.json")
        with open(path, "w") as f:
            f.write("{not json")
        with self.assertRaises(ConfigError):
            load_selector(path)

    def test_export_loss_trace(self):
        path = os.path.join(self.tmp.name, "trace.csv")
        frame = export_loss_trace(self.selector, path)
        self.assertEqual(len(frame), 15)
        read = pd.read_csv(path, index_col="iteration")
        self.assertEqual(list(read.columns), ["e_class", "e_select", "e_q", "e_struct", "e_total"])
        self.assertAlmostEqual(read["e_total"].iloc[0], self.selector.loss_trace[0].e_total)


class TestCheckpointStore(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.selector = small_selector(seed=1)

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.store = CheckpointStore(os.path.join(self.tmp.name, "ckpt"), run_id="unit")

    def tearDown(self):
        self.tmp.cleanup()

    def _save_aged(self, names):
        for age, name in enumerate(names):
            path = self.store.save(name, self.selector)
            os.utime(path, (1_000_000 + age, 1_000_000 + age))

    def test_save_records_run_metadata(self):
        path = self.store.save("a.json", self.selector)
        with open(path) as f:
            payload = json.load(f)
        self.assertEqual(payload["run_id"], "unit")
        self.assertIn("timestamp", payload)
        self.assertIsNotNone(self.store.load("a.json"))

    def test_list_and_missing(self):
        self._save_aged(["b.json", "a.json"])
        self.assertEqual(self.store.list_checkpoints(), ["a.json", "b.json"])
        self.assertIsNone(self.store.load("absent.json"))

    def test_latest(self):
        self.assertIsNone(self.store.latest())
        self._save_aged(["old.json", "new.json"])
        latest = self.store.latest()
        np.testing.assert_array_equal(latest.network.lambdas, self.selector.network.lambdas)
        os.utime(self.store._path("old.json"), (2_000_000, 2_000_000))
        self.assertEqual(self.store._by_age()[-1], "old.json")


if __name__ == '__main__':
    unittest.main()

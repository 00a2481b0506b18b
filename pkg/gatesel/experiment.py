"""
Experiment runner: data pipeline, the (method, beta, Q) grid of selectors,
metric tables, the JSON report and thematic-map rasters.
"""

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from . import __version__
from .baselines import FeatureRanking, fisher_score_rank, mutual_info_rank
from .config import ExperimentConfig, config_hash
from .data import (
    Dataset,
    HsiCube,
    SplitSpec,
    load_cube,
    load_delimited,
    mean_center_channels,
    minmax_scale,
    smote_oversample,
    standardize,
    stratified_split_indices,
)
from .errors import ConfigError, DimensionMismatchError
from .evaluation import Classifier, ClassifierSpec, cv_grid_search, predict, train_classifier
from .metrics import MetricsReport, cluster_agreement, oca, stress_of_subset
from .parallel import run_parallel
from .persistence import CheckpointStore, export_loss_trace
from .trainer import TrainedSelector, multi_restart, select_features

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")
TABLE_COLUMNS = ["method", "beta", "split", "SS", "NMI", "ARI", "JI", "OCA", "classifier", "runs", "reason"]

# unknown pixels are black; classes never are
PALETTE = np.array([
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (255, 250, 200), (128, 0, 0),
    (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
], dtype=np.uint8)


def derive_q(n_features: int, ratio: float) -> int:
    """ceil(ratio * P), with the product rounded to 9 decimals so 0.35 * 60 stays 21."""
    if not 0 < ratio <= 1:
        raise ConfigError(f"Q ratio must lie in (0, 1], got {ratio}")
    return min(max(math.ceil(round(ratio * n_features, 9)), 1), n_features)


def q_list(config: ExperimentConfig, n_features: int) -> List[int]:
    values = config.q_values or tuple(derive_q(n_features, r) for r in config.q_ratios)
    for q in values:
        if q > n_features:
            raise ConfigError(f"Q={q} exceeds the {n_features} available features")
    return list(dict.fromkeys(values))


def method_label(beta: float) -> str:
    return "FSMLP" if beta == 0 else "FSMLP_struct"


@dataclass
class PreparedData:
    name: str
    train: Dataset  # training rows as split, used for metrics
    test: Dataset
    fit: Dataset  # training rows seen by selectors and classifiers (maybe oversampled)
    train_idx: np.ndarray
    test_idx: np.ndarray
    cube: Optional[HsiCube] = None


def prepare_data(config: ExperimentConfig) -> PreparedData:
    """load -> scale (-> centre) -> stratified split (-> oversample the training part)."""
    source = config.dataset
    cube = None
    if source.format == "cube":
        cube = minmax_scale(load_cube(source.path))
        if source.center_channels:
            cube = mean_center_channels(cube)
        full, _ = cube.to_dataset()
    else:
        full = load_delimited(source.path, source.label_column, source.delimiter, source.header)
        if source.scale == "minmax":
            full = minmax_scale(full)
        elif source.scale == "standardize":
            full = standardize(full)

    train_idx, test_idx = stratified_split_indices(full, config.split)
    logger.info("Split of %s: train rows %s", source.name, train_idx.tolist())
    logger.info("Split of %s: test rows %s", source.name, test_idx.tolist())
    train, test = full.take(train_idx), full.take(test_idx)

    fit = train
    if config.oversample.enabled:
        fit = smote_oversample(train, config.oversample.per_class_target, config.oversample.k, config.seed)
        logger.info("Training part rebalanced to %d rows per class (%d rows)",
                    config.oversample.per_class_target, fit.n_rows)
    return PreparedData(source.name, train, test, fit, train_idx, test_idx, cube)


@dataclass
class Cell:
    method: str
    beta: Optional[float]
    q: int


@dataclass
class CellResult:
    method: str
    beta: Optional[float]
    q: int
    runs: int = 0
    mean: Dict[str, MetricsReport] = field(default_factory=dict)
    raw: Dict[str, List[MetricsReport]] = field(default_factory=dict)
    classifier_settings: List[float] = field(default_factory=list)
    reason: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.reason

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "beta": self.beta,
            "q": self.q,
            "runs": self.runs,
            "status": "ok" if self.ok else "failed",
            "reason": self.reason,
            "classifier_settings": list(self.classifier_settings),
            "mean": {s: _json_safe(r.to_dict()) for s, r in self.mean.items()},
            "raw": {s: [_json_safe(r.to_dict()) for r in rs] for s, rs in self.raw.items()},
        }


@dataclass
class ExperimentReport:
    dataset: str
    config_hash: str
    n_rows: int
    n_features: int
    class_count: int
    q_values: List[int]
    train_idx: List[int]
    test_idx: List[int]
    cells: List[CellResult]
    classifier_kind: str
    timing: Dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> List[CellResult]:
        return [c for c in self.cells if not c.ok]

    def to_dict(self, include_timing: bool = True) -> dict:
        payload = {
            "gatesel_version": __version__,
            "dataset": self.dataset,
            "config_hash": self.config_hash,
            "n_rows": self.n_rows,
            "n_features": self.n_features,
            "class_count": self.class_count,
            "q_values": self.q_values,
            "classifier": self.classifier_kind,
            "split": {"train": self.train_idx, "test": self.test_idx},
            "cells": [c.to_dict() for c in self.cells],
        }
        if include_timing:
            payload["timing"] = dict(self.timing)
        return payload


def _json_safe(payload: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in payload.items()}


def report_json(report: ExperimentReport, include_timing: bool = True) -> str:
    return json.dumps(report.to_dict(include_timing), sort_keys=True, indent=2)


def report_digest(report: ExperimentReport) -> str:
    """sha256 of the report without its wall-clock section."""
    return hashlib.sha256(report_json(report, include_timing=False).encode("utf-8")).hexdigest()


def _metric_rows(data: Dataset, limit: int, seed: int) -> np.ndarray:
    if not limit or data.n_rows <= limit:
        return data.X
    rows = np.sort(np.random.default_rng(seed).choice(data.n_rows, size=limit, replace=False))
    return data.X[rows]


def evaluate_subset(subset: Sequence[int], prepared: PreparedData,
                    config: ExperimentConfig) -> Tuple[Dict[str, MetricsReport], Classifier]:
    """SS, NMI, ARI, JI and OCA of one column subset on both splits."""
    subset = np.asarray(subset, dtype=np.int64)
    fit = prepared.fit.select_columns(subset)
    setting, _ = cv_grid_search(fit, config.classifier)
    classifier = train_classifier(fit, setting, config.classifier)
    fcm_params = {"m": config.fcm.m, "tol": config.fcm.tol, "max_iter": config.fcm.max_iter}

    reports = {}
    for split, data in (("train", prepared.train), ("test", prepared.test)):
        X = _metric_rows(data, config.metric_rows, config.seed)
        if X.shape[0] < data.class_count:
            raise ConfigError(f"{split} split has {X.shape[0]} rows for {data.class_count} clusters")
        ss = stress_of_subset(X, subset)
        nmi_value, ari_value, ji_value = cluster_agreement(X, X[:, subset], data.class_count,
                                                           fcm_params, seed=config.seed)
        accuracy = oca(predict(classifier, data.X[:, subset]), data.Z)
        reports[split] = MetricsReport(ss, nmi_value, ari_value, ji_value, accuracy,
                                       tuple(int(i) for i in subset), split)
    return reports, classifier


def _collect(result: CellResult, per_run: List[Dict[str, MetricsReport]]):
    result.runs = len(per_run)
    for split in SPLITS:
        result.raw[split] = [run[split] for run in per_run]
        result.mean[split] = MetricsReport.mean(result.raw[split])


def _cell_tag(cell: Cell) -> str:
    beta = "" if cell.beta is None else f"_beta{cell.beta:g}"
    return f"{cell.method}{beta}_Q{cell.q}"


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, prepared: PreparedData):
        self.config = config
        self.prepared = prepared
        self.rankings: Dict[str, FeatureRanking] = {}
        if config.baselines.fisher:
            self.rankings["fisher"] = fisher_score_rank(prepared.fit)
        if config.baselines.mutual_info:
            self.rankings["mutual_info"] = mutual_info_rank(prepared.fit, config.baselines.mi_bins)

    def cells(self) -> List[Cell]:
        qs = q_list(self.config, self.prepared.fit.n_features)
        grid = [Cell(method, None, q) for method in self.rankings for q in qs]
        grid += [Cell(method_label(beta), beta, q) for beta in self.config.betas for q in qs]
        return grid

    def run_cell(self, cell: Cell) -> CellResult:
        result = CellResult(cell.method, cell.beta, cell.q)
        started = time.perf_counter()
        logger.info("Cell %s started", _cell_tag(cell))
        try:
            if cell.beta is None:
                subset = self.rankings[cell.method].top(cell.q)
                reports, classifier = evaluate_subset(subset, self.prepared, self.config)
                result.classifier_settings.append(classifier.setting)
                _collect(result, [reports])
            else:
                self._run_selector_cell(cell, result)
        except Exception as exc:
            logger.error("Cell %s failed: %s", _cell_tag(cell), exc)
            result.reason = f"{type(exc).__name__}: {exc}"
        result.seconds = time.perf_counter() - started
        logger.info("Cell %s finished in %.1fs", _cell_tag(cell), result.seconds)
        return result

    def _run_selector_cell(self, cell: Cell, result: CellResult):
        config = self.config
        loss = config.train.loss_config.with_beta(cell.beta).with_target(cell.q)
        spec = replace(config.train, loss_config=loss, seed=config.seed)
        selectors = multi_restart(spec, self.prepared.fit, workers=1)

        per_run = []
        first_classifier = None
        for run, selector in enumerate(selectors):
            subset = select_features(selector, cell.q)
            reports, classifier = evaluate_subset(subset, self.prepared, config)
            per_run.append(reports)
            result.classifier_settings.append(classifier.setting)
            if first_classifier is None:
                first_classifier = (subset, classifier)
            if config.save_checkpoints:
                self._save(cell, run, selector)
        _collect(result, per_run)

        if config.thematic_map and self.prepared.cube is not None:
            subset, classifier = first_classifier
            path = os.path.join(config.output_dir, f"map_{_cell_tag(cell)}.ppm")
            emit_thematic_map(self.prepared.cube, classifier, subset, path)

    def _save(self, cell: Cell, run: int, selector: TrainedSelector):
        store = CheckpointStore(os.path.join(self.config.output_dir, "checkpoints"), run_id=self.prepared.name)
        name = f"{_cell_tag(cell)}_run{run}"
        store.save(f"{name}.json", selector)
        export_loss_trace(selector, os.path.join(store.directory, f"{name}_loss.csv"))


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentReport:
    """
    Run the whole grid and write report.json plus one CSV table per Q into
    config.output_dir. Failed cells are recorded with their reason and do
    not stop the run.
    """
    started = time.perf_counter()
    workers = workers or config.workers
    os.makedirs(config.output_dir, exist_ok=True)

    prepared = prepare_data(config)
    runner = ExperimentRunner(config, prepared)
    cells = runner.cells()
    logger.info("Running %d cells on %s with %d worker(s)", len(cells), prepared.name, workers)
    results = run_parallel(runner.run_cell, cells, workers)

    if config.thematic_map and prepared.cube is not None:
        emit_ground_truth(prepared.cube, os.path.join(config.output_dir, "ground_truth.ppm"))

    timing = {"total_seconds": time.perf_counter() - started}
    timing.update({f"cell:{_cell_tag(c)}": r.seconds for c, r in zip(cells, results)})
    report = ExperimentReport(
        dataset=prepared.name,
        config_hash=config_hash(config),
        n_rows=prepared.train.n_rows + prepared.test.n_rows,
        n_features=prepared.fit.n_features,
        class_count=prepared.fit.class_count,
        q_values=q_list(config, prepared.fit.n_features),
        train_idx=prepared.train_idx.tolist(),
        test_idx=prepared.test_idx.tolist(),
        cells=results,
        classifier_kind=config.classifier.kind,
        timing=timing,
    )
    write_report(report, config.output_dir)
    if report.failed:
        logger.warning("%d of %d cells failed", len(report.failed), len(results))
    return report


def metrics_table(report: ExperimentReport, q: int) -> pd.DataFrame:
    rows = []
    for cell in report.cells:
        if cell.q != q:
            continue
        beta = "" if cell.beta is None else cell.beta
        for split in SPLITS:
            row = {"method": cell.method, "beta": beta, "split": split,
                   "classifier": report.classifier_kind, "runs": cell.runs, "reason": cell.reason}
            if cell.ok:
                mean = cell.mean[split]
                row.update(SS=mean.ss, NMI=mean.nmi, ARI=mean.ari, JI=mean.ji, OCA=mean.oca)
            rows.append(row)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def write_report(report: ExperimentReport, output_dir: str) -> List[str]:
    os.makedirs(output_dir, exist_ok=True)
    written = [os.path.join(output_dir, "report.json")]
    with open(written[0], "w") as f:
        f.write(report_json(report))
    for q in report.q_values:
        path = os.path.join(output_dir, f"{report.dataset}_Q{q}.csv")
        metrics_table(report, q).to_csv(path, index=False)
        written.append(path)
    logger.info("Report written to %s", output_dir)
    return written


def _render(class_grid: np.ndarray, path: str) -> np.ndarray:
    """class_grid holds dense class indices, -1 for unknown pixels."""
    rgb = np.zeros(class_grid.shape + (3,), dtype=np.uint8)
    known = class_grid >= 0
    rgb[known] = PALETTE[class_grid[known] % len(PALETTE)]
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    Image.fromarray(rgb).save(path, format="PPM")
    return rgb


def emit_thematic_map(cube: HsiCube, classifier: Classifier, subset: Sequence[int], path: str) -> np.ndarray:
    """
    Classify every annotated pixel on the subset bands and write an RGB
    portable pixmap. Returns the H x W x 3 raster.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if classifier.n_features != subset.size:
        raise DimensionMismatchError(f"classifier expects {classifier.n_features} bands, subset has {subset.size}")
    grid = np.full(cube.height * cube.width, -1, dtype=np.int64)
    annotated = np.flatnonzero(cube.annotated_mask().ravel())
    if annotated.size:
        grid[annotated] = predict(classifier, cube.flat_pixels()[annotated][:, subset])
    logger.info("Thematic map written: %s", path)
    return _render(grid.reshape(cube.height, cube.width), path)


def emit_ground_truth(cube: HsiCube, path: str) -> np.ndarray:
    grid = np.full(cube.labels.shape, -1, dtype=np.int64)
    known = cube.annotated_mask()
    if np.any(known):
        grid[known] = np.searchsorted(np.unique(cube.labels[known]), cube.labels[known])
    return _render(grid, path)


def map_from_checkpoint(cube: HsiCube, selector: TrainedSelector, path: str, n_select: Optional[int] = None,
                        classifier_spec: Optional[ClassifierSpec] = None,
                        split: Optional[SplitSpec] = None) -> np.ndarray:
    """Select bands with a trained selector, fit the classifier on a training part and map the scene."""
    classifier_spec = classifier_spec or ClassifierSpec()
    split = split or SplitSpec(test_fraction=0.25, seed=classifier_spec.seed)
    if selector.network.n_features != cube.band_count:
        raise DimensionMismatchError(f"selector has {selector.network.n_features} gates, cube has {cube.band_count} bands")
    subset = select_features(selector, n_select or selector.spec.loss_config.n_select)
    data, _ = cube.to_dataset()
    train_idx, _ = stratified_split_indices(data, split)
    fit = data.take(train_idx).select_columns(subset)
    setting, _ = cv_grid_search(fit, classifier_spec)
    return emit_thematic_map(cube, train_classifier(fit, setting, classifier_spec), subset, path)

"""
Experiment configuration: one YAML file parsed into a frozen dataclass tree.

Example::

    dataset:
      path: data/ecoli.csv
      format: delimited
    train:
      preset: tabular
      iterations: 20000
    betas: [0.0, 0.1, 1.0, 10.0]
    q_ratios: [0.35, 0.5]
"""

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

import yaml
from dotenv import load_dotenv

from .data import SplitSpec
from .errors import ConfigError
from .evaluation import ClassifierSpec
from .losses import LossConfig
from .trainer import HSI_PRESET, TABULAR_PRESET, PretrainSpec, TrainSpec

logger = logging.getLogger(__name__)

WORKERS_ENV = "GATESEL_WORKERS"
PRESETS = {"tabular": TABULAR_PRESET, "hsi": HSI_PRESET}
DEFAULT_TEST_FRACTION = {"delimited": 0.1, "cube": 0.25}


@dataclass(frozen=True)
class DatasetConfig:
    path: str
    format: str = "delimited"
    name: str = ""
    label_column: Any = -1
    delimiter: str = ","
    header: bool = True
    scale: str = "none"
    center_channels: bool = True

    def __post_init__(self):
        if self.format not in DEFAULT_TEST_FRACTION:
            raise ConfigError(f"dataset.format must be one of {sorted(DEFAULT_TEST_FRACTION)}, got {self.format!r}")
        if self.scale not in ("minmax", "standardize", "none"):
            raise ConfigError(f"dataset.scale must be minmax, standardize or none, got {self.scale!r}")
        if not self.name:
            object.__setattr__(self, "name", os.path.splitext(os.path.basename(self.path))[0])


@dataclass(frozen=True)
class OversampleConfig:
    enabled: bool = False
    per_class_target: int = 200
    k: int = 5

    def __post_init__(self):
        if self.per_class_target < 1 or self.k < 1:
            raise ConfigError("oversample.per_class_target and oversample.k must be >= 1")


@dataclass(frozen=True)
class BaselineConfig:
    fisher: bool = True
    mutual_info: bool = True
    mi_bins: int = 10


@dataclass(frozen=True)
class FcmConfig:
    m: float = 2.0
    tol: float = 1e-6
    max_iter: int = 300

    def __post_init__(self):
        if self.m <= 1:
            raise ConfigError(f"fcm.m must be > 1, got {self.m}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    split: SplitSpec = field(default_factory=SplitSpec)
    oversample: OversampleConfig = field(default_factory=OversampleConfig)
    train: TrainSpec = field(default_factory=lambda: TABULAR_PRESET)
    betas: Tuple[float, ...] = (0.0, 0.1, 1.0, 10.0)
    q_ratios: Tuple[float, ...] = (0.35, 0.5)
    q_values: Tuple[int, ...] = ()
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    fcm: FcmConfig = field(default_factory=FcmConfig)
    output_dir: str = "results"
    seed: int = 0
    workers: int = 1
    thematic_map: bool = False
    save_checkpoints: bool = False
    metric_rows: int = 0  # 0 = every row of the split

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "q_ratios", tuple(float(r) for r in self.q_ratios))
        object.__setattr__(self, "q_values", tuple(int(q) for q in self.q_values))
        if not self.betas:
            raise ConfigError("betas must not be empty")
        if any(b < 0 for b in self.betas):
            raise ConfigError(f"betas must be >= 0, got {self.betas}")
        if not self.q_values and not self.q_ratios:
            raise ConfigError("give q_ratios or q_values")
        if any(not 0 < r <= 1 for r in self.q_ratios):
            raise ConfigError(f"q_ratios must lie in (0, 1], got {self.q_ratios}")
        if any(q < 1 for q in self.q_values):
            raise ConfigError(f"q_values must be >= 1, got {self.q_values}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.metric_rows == 1 or self.metric_rows < 0:
            raise ConfigError(f"metric_rows must be 0 (all rows) or >= 2, got {self.metric_rows}")
        if self.thematic_map and self.dataset.format != "cube":
            raise ConfigError("thematic_map needs a cube dataset")

    def to_dict(self) -> Dict[str, Any]:
        return _plain(dataclasses.asdict(self))


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _build(cls, raw: Optional[Dict[str, Any]], section: str, **overrides):
    raw = dict(raw or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {unknown}")
    raw.update(overrides)
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"invalid {section} section: {exc}") from exc


def _train_spec(raw: Optional[Dict[str, Any]], seed: int) -> TrainSpec:
    raw = dict(raw or {})
    preset_name = raw.pop("preset", "tabular")
    if preset_name not in PRESETS:
        raise ConfigError(f"train.preset must be one of {sorted(PRESETS)}, got {preset_name!r}")
    base = PRESETS[preset_name]

    loss_raw = dict(raw.pop("loss", None) or {})
    for fixed in ("beta", "n_select"):
        if fixed in loss_raw:
            raise ConfigError(f"train.loss.{fixed} is set per grid cell; use betas / q_ratios instead")
    loss = _build(LossConfig, {**_asdict_shallow(base.loss_config), **loss_raw}, "train.loss")
    pretrain = _build(PretrainSpec, {**_asdict_shallow(base.pretrain), **dict(raw.pop("pretrain", None) or {})},
                      "train.pretrain")

    known = {f.name for f in fields(TrainSpec)} - {"loss_config", "pretrain", "seed"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in train: {unknown}")
    try:
        return replace(base, loss_config=loss, pretrain=pretrain, seed=seed, **raw)
    except TypeError as exc:
        raise ConfigError(f"invalid train section: {exc}") from exc


def _asdict_shallow(obj) -> Dict[str, Any]:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def experiment_config_from_dict(raw: Dict[str, Any], base_dir: str = ".") -> ExperimentConfig:
    """Build an ExperimentConfig; relative paths resolve against base_dir."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    raw = dict(raw)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {unknown}")
    if "dataset" not in raw or "path" not in (raw["dataset"] or {}):
        raise ConfigError("dataset.path is required")

    seed = int(raw.get("seed", 0))
    dataset_raw = dict(raw["dataset"])
    dataset_raw["path"] = os.path.normpath(os.path.join(base_dir, dataset_raw["path"]))
    dataset = _build(DatasetConfig, dataset_raw, "dataset")

    split_raw = dict(raw.get("split") or {})
    split_raw.setdefault("test_fraction", DEFAULT_TEST_FRACTION[dataset.format])
    split_raw.setdefault("seed", seed)

    classifier_raw = dict(raw.get("classifier") or {})
    classifier_raw.setdefault("seed", seed)
    if "grid" in classifier_raw:
        classifier_raw["grid"] = tuple(classifier_raw["grid"] or ())

    output_dir = raw.get("output_dir", "results")
    return ExperimentConfig(
        dataset=dataset,
        split=_build(SplitSpec, split_raw, "split"),
        oversample=_build(OversampleConfig, raw.get("oversample"), "oversample"),
        train=_train_spec(raw.get("train"), seed),
        betas=tuple(raw.get("betas", ExperimentConfig.betas)),
        q_ratios=tuple(raw.get("q_ratios", ExperimentConfig.q_ratios)),
        q_values=tuple(raw.get("q_values", ())),
        classifier=_build(ClassifierSpec, classifier_raw, "classifier"),
        baselines=_build(BaselineConfig, raw.get("baselines"), "baselines"),
        fcm=_build(FcmConfig, raw.get("fcm"), "fcm"),
        output_dir=os.path.normpath(os.path.join(base_dir, output_dir)),
        seed=seed,
        workers=int(raw.get("workers", 1)),
        thematic_map=bool(raw.get("thematic_map", False)),
        save_checkpoints=bool(raw.get("save_checkpoints", False)),
        metric_rows=int(raw.get("metric_rows", 0)),
    )


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form; output_dir and workers do not change results and are left out."""
    payload = config.to_dict()
    payload.pop("output_dir")
    payload.pop("workers")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_workers(cli_value: Optional[int], config_value: int = 1) -> int:
    """--workers, then $GATESEL_WORKERS (a .env file is honoured), then the config."""
    if cli_value is not None:
        workers = int(cli_value)
    else:
        load_dotenv()
        env_value = os.getenv(WORKERS_ENV)
        if env_value:
            try:
                workers = int(env_value)
            except ValueError as exc:
                raise ConfigError(f"{WORKERS_ENV}={env_value!r} is not an integer") from exc
        else:
            workers = int(config_value or 1)
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers}")
    return workers


class ConfigManager:
    def __init__(self, config_file: str):
        self.config_file = config_file
        self.raw = self.load_raw()
        self.config = experiment_config_from_dict(self.raw, os.path.dirname(os.path.abspath(config_file)))

    def load_raw(self) -> Dict[str, Any]:
        if not os.path.exists(self.config_file):
            raise ConfigError(f"configuration file not found: {self.config_file}")
        with open(self.config_file, "r") as file:
            try:
                raw = yaml.safe_load(file)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{self.config_file} is not valid YAML: {exc}") from exc
        return raw or {}

    def with_overrides(self, **changes) -> ExperimentConfig:
        self.config = replace(self.config, **{k: v for k, v in changes.items() if v is not None})
        return self.config

    def hash(self) -> str:
        return config_hash(self.config)

    def save_config(self, path: str) -> None:
        """Write the fully resolved configuration as YAML."""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as file:
            yaml.safe_dump(self.config.to_dict(), file, sort_keys=True)
        logger.info("Configuration saved: %s", path)

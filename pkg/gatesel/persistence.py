import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd

from . import __version__
from .errors import ConfigError
from .gated_mlp import GatedNetwork
from .losses import LossBreakdown
from .trainer import TrainedSelector, TrainSpec

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


def selector_to_dict(selector: TrainedSelector) -> Dict[str, Any]:
    return {
        "format": CHECKPOINT_FORMAT,
        "gatesel_version": __version__,
        "network": selector.network.to_dict(),
        "spec": selector.spec.to_dict(),
        "loss_trace": [b.to_dict() for b in selector.loss_trace],
    }


def selector_from_dict(payload: Dict[str, Any]) -> TrainedSelector:
    version = payload.get("format")
    if version != CHECKPOINT_FORMAT:
        raise ConfigError(f"unsupported checkpoint format {version!r}, expected {CHECKPOINT_FORMAT}")
    return TrainedSelector(
        network=GatedNetwork.from_dict(payload["network"]),
        loss_trace=[LossBreakdown(**b) for b in payload.get("loss_trace", [])],
        spec=TrainSpec.from_dict(payload["spec"]),
    )


def save_selector(selector: TrainedSelector, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump(selector_to_dict(selector), f, indent=2)
    logger.debug("Selector saved: %s", path)


def load_selector(path: str) -> TrainedSelector:
    if not os.path.exists(path):
        raise ConfigError(f"checkpoint not found: {path}")
    with open(path, "r") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    return selector_from_dict(payload)


def export_loss_trace(selector: TrainedSelector, path: str) -> pd.DataFrame:
    """Write one CSV row per training iteration with every loss term."""
    frame = pd.DataFrame([b.to_dict() for b in selector.loss_trace],
                         columns=["e_class", "e_select", "e_q", "e_struct", "e_total"])
    frame.index.name = "iteration"
    frame.to_csv(path)
    return frame


class CheckpointStore:
    """Directory of selector checkpoints, one JSON file each."""

    def __init__(self, directory: str = "checkpoints", run_id: str = "gatesel"):
        self.directory = directory
        self.run_id = run_id
        os.makedirs(directory, exist_ok=True)

    def _path(self, filename: str) -> str:
        return os.path.join(self.directory, filename)

    def save(self, filename: str, selector: TrainedSelector) -> str:
        payload = selector_to_dict(selector)
        payload["run_id"] = self.run_id
        payload["timestamp"] = datetime.now().isoformat()
        path = self._path(filename)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)
        logger.debug("Checkpoint saved: %s", path)
        return path

    def load(self, filename: str) -> Optional[TrainedSelector]:
        path = self._path(filename)
        if not os.path.exists(path):
            return None
        return load_selector(path)

    def list_checkpoints(self) -> List[str]:
        return sorted(f for f in os.listdir(self.directory) if f.endswith(".json"))

    def _by_age(self) -> List[str]:
        return sorted(self.list_checkpoints(), key=lambda f: (os.path.getmtime(self._path(f)), f))

    def latest(self) -> Optional[TrainedSelector]:
        """The most recently written checkpoint, or None for an empty directory."""
        files = self._by_age()
        if not files:
            return None
        return self.load(files[-1])

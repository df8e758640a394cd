"""Predictors sharing one window-based contract: ARX, physics, LSTM and hybrid."""

from __future__ import annotations

from pathlib import Path

from ..nnet import checkpoint
from .arx import ArxModel, RankDeficiencyError, fit_arx
from .base import Predictor, RolloutError, check_windows, rollout, rollout_on, rollout_trajectory
from .ham import HamRegressor, train_ham
from .lstm import LstmRegressor
from .pbm import PbmModel, pbm_rhs, pbm_step

MODEL_KINDS = {"arx": ArxModel, "pbm": PbmModel, "lstm": LstmRegressor, "ham": HamRegressor}


def save_model(model: Predictor, path: str | Path) -> int:
    """Write a model checkpoint; returns its size in bytes."""
    blob = model.to_checkpoint()
    Path(path).write_bytes(blob)
    return len(blob)


def model_from_bytes(blob: bytes) -> Predictor:
    meta, arrays = checkpoint.loads(blob)
    kind = meta.get("kind")
    if kind not in MODEL_KINDS:
        raise checkpoint.CheckpointError(f"unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_checkpoint(meta, arrays)


def load_model(path: str | Path) -> Predictor:
    return model_from_bytes(Path(path).read_bytes())


__all__ = [
    "ArxModel", "RankDeficiencyError", "fit_arx", "Predictor", "RolloutError", "check_windows", "rollout",
    "rollout_on", "rollout_trajectory", "HamRegressor", "train_ham", "LstmRegressor", "PbmModel", "pbm_rhs",
    "pbm_step", "MODEL_KINDS", "save_model", "load_model", "model_from_bytes",
]

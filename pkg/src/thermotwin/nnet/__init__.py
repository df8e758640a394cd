"""Small NumPy neural-network engine: layers, Adam, early-stopping training."""

from .checkpoint import CheckpointError
from .gradcheck import check_gradients
from .layers import (
    LSTM,
    Dropout,
    LastStep,
    Linear,
    ReLU,
    Sequential,
    build_from_spec,
    dense_net,
    lstm_net,
    mse_loss,
    sigmoid,
)
from .optim import Adam
from .train import TrainConfig, TrainHistory, TrainingError, evaluate, train

__all__ = [
    "LSTM", "Dropout", "LastStep", "Linear", "ReLU", "Sequential", "build_from_spec", "dense_net",
    "lstm_net", "mse_loss", "sigmoid", "Adam", "TrainConfig", "TrainHistory", "TrainingError",
    "evaluate", "train", "check_gradients", "CheckpointError",
]

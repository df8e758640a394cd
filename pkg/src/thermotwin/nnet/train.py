"""Mini-batch training with early stopping on a validation set."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .layers import Sequential, mse_loss
from .optim import Adam

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    learning_rate: float = 1e-3
    batch_size: int = 64
    min_delta: float = 5e-4
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.patience) < 1:
            raise ValueError("epochs, batch_size and patience must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")

    @classmethod
    def lstm(cls, **kw) -> "TrainConfig":
        """Sequence-model defaults (5000 epochs, batch 40)."""
        return cls(**{"epochs": 5000, "batch_size": 40, **kw})

    @classmethod
    def residual(cls, **kw) -> "TrainConfig":
        """Residual-network defaults (1000 epochs, batch 64)."""
        return cls(**{"epochs": 1000, "batch_size": 64, **kw})


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def evaluate(net: Sequential, X, y, batch_size: int = 1024) -> float:
    net.eval()
    total = 0.0
    for start in range(0, len(X), batch_size):
        pred = net.forward(X[start:start + batch_size])
        diff = pred.reshape(-1) - y[start:start + batch_size].reshape(-1)
        total += float(np.sum(diff * diff))
    return total / len(X)


def train(net: Sequential, X, y, X_val, y_val, cfg: TrainConfig) -> TrainHistory:
    """Fit ``net`` by Adam on MSE, restoring the parameters of the best validation epoch.

    Training stops once the validation loss has failed to improve on the best
    value by more than ``min_delta`` for ``patience`` consecutive epochs.
    """
    X = np.asarray(X, dtype=float)
    X_val = np.asarray(X_val, dtype=float)
    if len(X) == 0:
        raise TrainingError("training set is empty")
    if len(X_val) == 0:
        raise TrainingError("validation set is empty")
    y = np.asarray(y, dtype=float).reshape(len(X), -1)
    y_val = np.asarray(y_val, dtype=float).reshape(len(X_val), -1)
    rng = np.random.default_rng(cfg.rng_seed)
    params = [arr for _, _, arr in net.parameters()]
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    hist = TrainHistory()
    best, best_state, waited = math.inf, net.get_state(), 0

    for epoch in range(cfg.epochs):
        net.train()
        order = rng.permutation(len(X))
        running = 0.0
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            net.zero_grad()
            pred = net.forward(X[idx])
            loss, grad = mse_loss(pred, y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"loss became {loss} in epoch {epoch}")
            net.backward(grad)
            opt.step(net.gradients())
            running += loss * len(idx)
        hist.train_loss.append(running / len(X))
        val = evaluate(net, X_val, y_val)
        if not math.isfinite(val):
            raise TrainingError(f"validation loss became {val} in epoch {epoch}")
        hist.val_loss.append(val)
        if val < best - cfg.min_delta:
            best, best_state, waited = val, net.get_state(), 0
            hist.best_epoch = epoch
        else:
            waited += 1
            if waited >= cfg.patience:
                hist.stopped_early = True
                break
    net.set_state(best_state)
    net.eval()
    log.debug("trained %d epochs, best val %.3g at epoch %d", hist.epochs_run, best, hist.best_epoch)
    return hist

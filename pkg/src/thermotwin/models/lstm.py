"""Stacked-LSTM predictor on the NumPy engine.

Inputs are standardized per feature with training statistics. The network
predicts the standardized change of the inside temperature over the step,
which is added back to the last observed temperature.
"""

from __future__ import annotations

import numpy as np

from ..core import WindowedDataset
from ..nnet import TrainConfig, build_from_spec, checkpoint, lstm_net, train
from .base import Predictor, Standardizer, check_targets, check_windows


class LstmRegressor(Predictor):
    """LSTM -> Linear -> Dropout blocks with a final linear head.

    Parameters
    ----------
    lookback : int, default=10
    hidden : int, default=64
    blocks : int, default=3
    dropout : float, default=0.2
    epochs, batch_size, learning_rate, min_delta, patience :
        Early-stopping training settings.
    validation_fraction : float, default=0.2
        Chronological tail held out when ``fit`` gets no explicit validation set.
    random_state : int, default=0
    """

    def __init__(self, lookback: int = 10, hidden: int = 64, blocks: int = 3, dropout: float = 0.2,
                 epochs: int = 5000, batch_size: int = 40, learning_rate: float = 1e-3, min_delta: float = 5e-4,
                 patience: int = 10, validation_fraction: float = 0.2, random_state: int = 0):
        self.lookback = lookback
        self.hidden = hidden
        self.blocks = blocks
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.min_delta = min_delta
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, batch_size=self.batch_size,
                           min_delta=self.min_delta, patience=self.patience, rng_seed=self.random_state)

    def _encode(self, X):
        return self.x_scaler_.transform(X)

    def fit(self, X, y=None, X_val=None, y_val=None):
        if isinstance(X, WindowedDataset) and y is None:
            y = X.y
        X = check_windows(X, self.lookback)
        y = check_targets(X, y)
        if X_val is None:
            n_train = int(np.floor((1.0 - self.validation_fraction) * len(X)))
            if not 0 < n_train < len(X):
                raise ValueError(f"cannot hold out a validation tail from {len(X)} windows")
            X, X_val, y, y_val = X[:n_train], X[n_train:], y[:n_train], y[n_train:]
        else:
            X_val = check_windows(X_val, self.lookback)
            y_val = check_targets(X_val, y_val)
        cfg = self._train_config()
        self.x_scaler_ = Standardizer().fit(X.reshape(-1, X.shape[2]))
        self.y_scaler_ = Standardizer().fit(y - X[:, -1, 0])
        net = lstm_net(X.shape[2], self.hidden, 1, self.dropout, np.random.default_rng(self.random_state),
                       self.blocks)
        self.history_ = train(net, self._encode(X), self.y_scaler_.transform(y - X[:, -1, 0]),
                              self._encode(X_val), self.y_scaler_.transform(y_val - X_val[:, -1, 0]), cfg)
        self.net_ = net
        self.n_features_in_ = X.shape[2]
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_windows(X, self.lookback)
        out = []
        for start in range(0, len(X), 1024):
            chunk = X[start:start + 1024]
            z = self.net_.forward(self._encode(chunk)).reshape(-1)
            out.append(chunk[:, -1, 0] + self.y_scaler_.inverse(z))
        return np.concatenate(out)

    @property
    def n_params_(self) -> int:
        return self.net_.n_params()

    # ------------------------------------------------------------------ checkpoint
    def to_checkpoint(self) -> bytes:
        self._check_fitted()
        meta = {"kind": "lstm", "params": self.get_params(), "spec": self.net_.spec(),
                "history": {"train_loss": self.history_.train_loss, "val_loss": self.history_.val_loss,
                            "best_epoch": self.history_.best_epoch}}
        arrays = {f"net.{k}": v for k, v in self.net_.get_state().items()}
        arrays.update({"x_mean": self.x_scaler_.mean, "x_scale": self.x_scaler_.scale,
                       "y_mean": np.atleast_1d(self.y_scaler_.mean), "y_scale": np.atleast_1d(self.y_scaler_.scale)})
        return checkpoint.dumps(meta, arrays)

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict) -> "LstmRegressor":
        from ..nnet.train import TrainHistory

        model = cls(**meta["params"])
        net = build_from_spec(meta["spec"], np.random.default_rng(0))
        net.set_state({k[4:]: v for k, v in arrays.items() if k.startswith("net.")})
        net.eval()
        model.net_ = net
        model.x_scaler_ = Standardizer(arrays["x_mean"], arrays["x_scale"])
        model.y_scaler_ = Standardizer(arrays["y_mean"][0], arrays["y_scale"][0])
        h = meta.get("history", {})
        model.history_ = TrainHistory(h.get("train_loss", []), h.get("val_loss", []), h.get("best_epoch", -1))
        model.n_features_in_ = int(len(arrays["x_mean"]))
        return model

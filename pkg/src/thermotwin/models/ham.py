"""Hybrid model: physics step plus a learned corrective source term (CoSTA).

A prediction first integrates the physics model to get ``T_hat``. A dense
network maps ``(T_hat, T_amb, H, F)`` (``H = u_h H_max`` in W, ``F = u_f F_max``
in m^3/s) to a source ``r`` in K/s, and the physics model is integrated again
with ``r`` added to its right-hand side.

The sources that make the corrected step land exactly on the measured next
temperature are ``(T_meas - T_hat) / S``, with ``S`` the end-temperature
response to a unit source. The model is linear in a constant source, so this
is exact. By default the network is trained on the step correction
``T_meas - T_hat`` and its output is divided by ``S`` at prediction time. The
loss is then measured in kelvin; with the fan on ``S`` is much shorter than
``dt`` and training on the source itself would amplify sensor noise.
"""

from __future__ import annotations

import numpy as np

from ..core import DEFAULT_DT, PlantParams, WindowedDataset, mae
from ..nnet import TrainConfig, build_from_spec, checkpoint, dense_net, train
from ..nnet.train import TrainHistory
from .base import Predictor, Standardizer, check_targets, check_windows
from .pbm import PbmModel, pbm_step


class HamRegressor(Predictor):
    """Physics model with a residual network.

    Parameters
    ----------
    params : PlantParams, default=PlantParams()
    dt : float, default=60
    hidden, dropout : network width and dropout rate
        Dropout defaults to 0: dropout noise in the residual makes the
        closed-loop rollout drift from seed to seed.
    epochs, batch_size, learning_rate, min_delta, patience : training settings
    validation_fraction : float, default=0.2
    random_state : int, default=0
    state_feature : {"t_hat", "t"}, default="t"
        Temperature fed to the residual network: the uncorrected physics
        prediction or the current measured temperature.
    target_scale : {"standard", "per_step", "closure"}, default="closure"
        Scaling of the residual targets during training: standardized,
        converted to kelvin per sampling interval, or the end-of-step
        temperature correction ``S r`` itself.
    """

    lookback = 1

    def __init__(self, params: PlantParams | None = None, dt: float = DEFAULT_DT, hidden: int = 64,
                 dropout: float = 0.0, epochs: int = 1000, batch_size: int = 64, learning_rate: float = 1e-3,
                 min_delta: float = 5e-4, patience: int = 10, validation_fraction: float = 0.2,
                 random_state: int = 0, state_feature: str = "t", target_scale: str = "closure"):
        self.params = params
        self.dt = dt
        self.hidden = hidden
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.min_delta = min_delta
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.state_feature = state_feature
        self.target_scale = target_scale

    @property
    def pbm_(self) -> PbmModel:
        return PbmModel(self.params, self.dt)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, batch_size=self.batch_size,
                           min_delta=self.min_delta, patience=self.patience, rng_seed=self.random_state)

    # ------------------------------------------------------------------ physics pieces
    def _physics(self, X, source=None) -> np.ndarray:
        p = self.params or PlantParams()
        cfg = self.pbm_.integrator_
        last = X[:, -1, :]
        if source is None:
            source = np.zeros(len(last))
        return np.array([pbm_step(T, ta, (h, f), p, self.dt, cfg, float(r))
                         for (T, ta, h, f), r in zip(last, source)])

    def features(self, X, t_hat) -> np.ndarray:
        """Residual-network inputs ``(T_hat or T, T_amb, H, F)``."""
        p = self.params or PlantParams()
        last = X[:, -1, :]
        if self.state_feature not in ("t_hat", "t"):
            raise ValueError(f"state_feature must be 't_hat' or 't', got {self.state_feature!r}")
        temp = t_hat if self.state_feature == "t_hat" else last[:, 0]
        return np.column_stack([temp, last[:, 1], last[:, 2] * p.h_max, last[:, 3] * p.f_max])

    def residual_targets(self, X, y) -> tuple[np.ndarray, np.ndarray]:
        """``(T_hat, r)``: physics predictions and the closing source terms."""
        t_hat = self._physics(X)
        return t_hat, (y - t_hat) / self.unit_response(X, t_hat)

    def unit_response(self, X, t_hat) -> np.ndarray:
        """End-temperature response ``S`` to a unit constant source."""
        return self._physics(X, np.ones(len(X))) - t_hat

    def residual(self, X, t_hat=None) -> np.ndarray:
        """Corrective source (K/s) for each window."""
        self._check_fitted()
        X = check_windows(X)
        if t_hat is None:
            t_hat = self._physics(X)
        z = self.net_.forward(self.x_scaler_.transform(self.features(X, t_hat)))
        r = self.y_scaler_.inverse(z.reshape(-1))
        if self.target_scale == "closure":
            r = r / self.unit_response(X, t_hat)
        return r

    # ------------------------------------------------------------------ estimator API
    def fit(self, X, y=None, X_val=None, y_val=None):
        if isinstance(X, WindowedDataset) and y is None:
            y = X.y
        X = check_windows(X)
        y = check_targets(X, y)
        if len(X) == 0:
            raise ValueError("cannot train the residual network on an empty dataset")
        if X_val is None:
            n_train = int(np.floor((1.0 - self.validation_fraction) * len(X)))
            if not 0 < n_train < len(X):
                raise ValueError(f"cannot hold out a validation tail from {len(X)} windows")
            X, X_val, y, y_val = X[:n_train], X[n_train:], y[:n_train], y[n_train:]
        else:
            X_val = check_windows(X_val)
            y_val = check_targets(X_val, y_val)
        t_hat, r = self.residual_targets(X, y)
        t_hat_val, r_val = self.residual_targets(X_val, y_val)
        if self.target_scale == "closure":
            r, r_val = y - t_hat, y_val - t_hat_val
        feats = self.features(X, t_hat)
        self.x_scaler_ = Standardizer().fit(feats)
        if self.target_scale == "standard":
            self.y_scaler_ = Standardizer().fit(r)
        elif self.target_scale == "per_step":
            self.y_scaler_ = Standardizer(0.0, 1.0 / self.dt)
        elif self.target_scale == "closure":
            self.y_scaler_ = Standardizer(0.0, 1.0)
        else:
            raise ValueError(f"target_scale must be 'standard', 'per_step' or 'closure', got {self.target_scale!r}")
        net = dense_net(4, self.hidden, 1, self.dropout, np.random.default_rng(self.random_state))
        self.history_ = train(net, self.x_scaler_.transform(feats), self.y_scaler_.transform(r),
                              self.x_scaler_.transform(self.features(X_val, t_hat_val)),
                              self.y_scaler_.transform(r_val), self._train_config())
        self.net_ = net
        self.n_features_in_ = X.shape[2]
        corrected = self.predict(X_val)
        self.validation_report_ = {
            "residual_val_loss": float(min(self.history_.val_loss)),
            "pbm_one_step_mae": mae(t_hat_val, y_val),
            "ham_one_step_mae": mae(corrected, y_val),
            "mean_abs_residual": float(np.mean(np.abs(self.residual(X_val, t_hat_val)))),
        }
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_windows(X)
        t_hat = self._physics(X)
        return self._physics(X, self.residual(X, t_hat))

    def zero_residual(self) -> "HamRegressor":
        """Make the corrective term exactly zero (the model then equals the physics model)."""
        if not hasattr(self, "net_"):
            self.net_ = dense_net(4, self.hidden, 1, self.dropout, np.random.default_rng(self.random_state))
            self.x_scaler_ = Standardizer(np.zeros(4), np.ones(4))
            self.n_features_in_ = 4
        last = self.net_.layers[-1]
        last.params["W"][...] = 0.0
        last.params["b"][...] = 0.0
        self.y_scaler_ = Standardizer(0.0, 1.0)
        self.net_.eval()
        return self

    # ------------------------------------------------------------------ checkpoint
    def to_checkpoint(self) -> bytes:
        self._check_fitted()
        p = self.params or PlantParams()
        params = {k: v for k, v in self.get_params().items() if k != "params"}
        meta = {"kind": "ham", "params": params, "spec": self.net_.spec(),
                "plant_params": [p.h_max, p.f_max, p.volume, p.rho, p.cp]}
        arrays = {f"net.{k}": v for k, v in self.net_.get_state().items()}
        arrays.update({"x_mean": self.x_scaler_.mean, "x_scale": self.x_scaler_.scale,
                       "y_mean": np.atleast_1d(self.y_scaler_.mean), "y_scale": np.atleast_1d(self.y_scaler_.scale)})
        return checkpoint.dumps(meta, arrays)

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict) -> "HamRegressor":
        model = cls(PlantParams(*meta["plant_params"]), **meta["params"])
        net = build_from_spec(meta["spec"], np.random.default_rng(0))
        net.set_state({k[4:]: v for k, v in arrays.items() if k.startswith("net.")})
        net.eval()
        model.net_ = net
        model.x_scaler_ = Standardizer(arrays["x_mean"], arrays["x_scale"])
        model.y_scaler_ = Standardizer(float(arrays["y_mean"][0]), float(arrays["y_scale"][0]))
        model.history_ = TrainHistory()
        model.n_features_in_ = 4
        return model


def train_ham(pbm: PbmModel, ds: WindowedDataset, cfg: TrainConfig | None = None,
              val: WindowedDataset | None = None) -> HamRegressor:
    """Fit the residual network of a hybrid model built around ``pbm``."""
    if len(ds) == 0:
        raise ValueError("cannot train the residual network on an empty dataset")
    cfg = cfg or TrainConfig.residual()
    model = HamRegressor(pbm.params, pbm.dt, epochs=cfg.epochs, batch_size=cfg.batch_size,
                         learning_rate=cfg.learning_rate, min_delta=cfg.min_delta, patience=cfg.patience,
                         random_state=cfg.rng_seed)
    if val is None:
        return model.fit(ds.X, ds.y)
    return model.fit(ds.X, ds.y, val.X, val.y)

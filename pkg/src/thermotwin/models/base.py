"""Predictor contract, input validation and closed-loop (autoregressive) rollout.

All predictors are scikit-learn regressors over windows ``X`` shaped
``(n, lookback, 4)`` with feature columns ``t_inside, t_ambient,
heater_duty, fan_on``. The control in a window's last row is the one held
over the step being predicted; the target is the next inside temperature.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from ..core import FEATURES, T_MAX, T_MIN, ControlInput, Trajectory, WindowedDataset

N_FEATURES = len(FEATURES)


class RolloutError(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"prediction {value!r} left the sanity band [{T_MIN}, {T_MAX}] at rollout step {step}")
        self.step = step
        self.value = value


def check_windows(X, lookback: int | None = None) -> np.ndarray:
    """Validate and return windows as a float array of shape ``(n, lookback, 4)``."""
    if isinstance(X, WindowedDataset):
        X = X.X
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == N_FEATURES:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != N_FEATURES:
        raise ValueError(f"expected windows shaped (n, lookback, {N_FEATURES}), got {X.shape}")
    if lookback is not None and X.shape[1] != lookback:
        raise ValueError(f"expected windows of length {lookback}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("windows contain non-finite values")
    return X


def check_targets(X: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) != len(X):
        raise ValueError(f"{len(X)} windows but {len(y)} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain non-finite values")
    return y


class Predictor(RegressorMixin, BaseEstimator):
    """Common base: ``fit(X, y)`` / ``predict(X)`` plus step and rollout helpers."""

    lookback = 10

    def _check_fitted(self):
        try:
            check_is_fitted(self)
        except NotFittedError as exc:
            raise NotFittedError(f"{type(self).__name__} is not trained; call fit first") from exc

    def predict_step(self, history, u_next: ControlInput) -> float:
        """Next inside temperature after holding ``u_next`` from the last history state."""
        window = history_window(history, self.lookback)
        window[-1, 2:] = (u_next.heater_duty, u_next.fan_on)
        return float(self.predict(window[None])[0])

    def rollout(self, history, schedule: Sequence[ControlInput], ambient=None) -> np.ndarray:
        return rollout(self, history, schedule, ambient)


def history_window(history, lookback: int) -> np.ndarray:
    """Last ``lookback`` rows of a trajectory / ``(n, 4)`` array as a fresh array."""
    if isinstance(history, Trajectory):
        history = history.as_array()
    arr = np.array(history, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != N_FEATURES:
        raise ValueError(f"history must be shaped (n, {N_FEATURES}), got {arr.shape}")
    if len(arr) < lookback:
        raise ValueError(f"history has {len(arr)} samples, the model needs {lookback}")
    return arr[-lookback:].copy()


def rollout(model: Predictor, history, schedule: Sequence[ControlInput], ambient=None) -> np.ndarray:
    """Autoregressive multi-step prediction.

    Step ``k`` holds ``schedule[k]`` and predicts from a window whose states
    after the initial history are the model's own earlier predictions.
    ``ambient`` gives the ambient temperature at each predicted state
    (default: the last history value).
    """
    if len(schedule) == 0:
        raise ValueError("schedule must be non-empty")
    lookback = model.lookback
    window = history_window(history, lookback)
    if ambient is None:
        ambient = np.full(len(schedule), window[-1, 1])
    ambient = np.asarray(ambient, dtype=float)
    if len(ambient) < len(schedule):
        raise ValueError("ambient sequence shorter than the schedule")
    preds = np.empty(len(schedule))
    for k, u in enumerate(schedule):
        window[-1, 2:] = (u.heater_duty, u.fan_on)
        value = float(model.predict(window[None])[0])
        if not (np.isfinite(value) and T_MIN <= value <= T_MAX):
            raise RolloutError(k, value)
        preds[k] = value
        window = np.roll(window, -1, axis=0)
        window[-1] = (value, ambient[k], u.heater_duty, u.fan_on)
    return preds


def rollout_on(model: Predictor, traj: Trajectory, seed: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Open-loop replay of a measured trajectory.

    The first ``seed`` samples form the initial history (models read the
    tail they need); returns ``(predicted, measured)`` for every later sample.
    """
    seed = max(seed, model.lookback)
    if len(traj) <= seed:
        raise ValueError(f"trajectory of {len(traj)} samples is too short to seed {seed} samples")
    data = traj.as_array()
    controls = traj.controls
    preds = rollout(model, data[:seed], controls[seed - 1:-1], ambient=data[seed:, 1])
    return preds, data[seed:, 0]


def rollout_trajectory(preds: np.ndarray, schedule: Sequence[ControlInput], ambient, dt: float) -> Trajectory:
    """Pair each predicted state with the control held after it (the last one is repeated)."""
    from ..core import ThermalState

    after = list(schedule[1:]) + [schedule[-1]]
    ambient = np.broadcast_to(np.asarray(ambient, dtype=float), (len(preds),))
    return Trajectory(dt, tuple((ThermalState(p, a), u) for p, a, u in zip(preds, ambient, after)))


class Standardizer:
    """Column-wise standardization with training statistics."""

    def __init__(self, mean=None, scale=None):
        self.mean = None if mean is None else np.asarray(mean, dtype=float)
        self.scale = None if scale is None else np.asarray(scale, dtype=float)

    def fit(self, X, axis=0):
        self.mean = np.mean(X, axis=axis)
        sd = np.std(X, axis=axis)
        self.scale = np.where(sd > 1e-12, sd, 1.0)
        return self

    def transform(self, X):
        return (X - self.mean) / self.scale

    def inverse(self, Z):
        return Z * self.scale + self.mean

"""Shared domain types, control quantization and sliding-window datasets."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

HEATER_STEP = 0.05
HEATER_LEVELS = 21
T_MIN, T_MAX = -20.0, 80.0
DEFAULT_DT = 60.0
CSV_HEADER = ("t_seconds", "t_inside", "t_ambient", "heater_duty", "fan_on")

# Column order of every window feature row.
FEATURES = ("t_inside", "t_ambient", "heater_duty", "fan_on")


class SanityBandError(ValueError):
    """Raised when a temperature leaves the admissible band."""


def check_temperature(value: float, what: str = "t_inside") -> float:
    value = float(value)
    if not math.isfinite(value):
        raise SanityBandError(f"{what} is not finite: {value!r}")
    if not T_MIN <= value <= T_MAX:
        raise SanityBandError(f"{what}={value:.3f} outside sanity band [{T_MIN}, {T_MAX}] degC")
    return value


@dataclass(frozen=True)
class ThermalState:
    t_inside: float
    t_ambient: float

    def __post_init__(self):
        check_temperature(self.t_inside)
        if not math.isfinite(self.t_ambient):
            raise ValueError(f"t_ambient is not finite: {self.t_ambient!r}")
        object.__setattr__(self, "t_inside", float(self.t_inside))
        object.__setattr__(self, "t_ambient", float(self.t_ambient))


@dataclass(frozen=True)
class ControlInput:
    """Heater duty (multiple of 0.05 in [0, 1]) and binary fan state."""

    heater_duty: float
    fan_on: int

    def __post_init__(self):
        level = self.heater_duty / HEATER_STEP
        if not (0.0 <= self.heater_duty <= 1.0) or abs(level - round(level)) > 1e-9:
            raise ValueError(f"heater_duty must be a multiple of {HEATER_STEP} in [0, 1], got {self.heater_duty!r}")
        if self.fan_on not in (0, 1):
            raise ValueError(f"fan_on must be 0 or 1, got {self.fan_on!r}")
        # canonical representation so equality and CSV output are exact
        object.__setattr__(self, "heater_duty", round(round(level) * HEATER_STEP, 2))
        object.__setattr__(self, "fan_on", int(self.fan_on))

    @property
    def heater_level(self) -> int:
        return int(round(self.heater_duty / HEATER_STEP))

    def as_tuple(self) -> tuple[float, int]:
        return (self.heater_duty, self.fan_on)


def _round_half_up(x: float) -> int:
    # the epsilon absorbs representation error, e.g. 0.525 / 0.05 = 10.4999...
    return int(math.floor(x + 0.5 + 1e-9))


def quantize_control(raw_heater: float, raw_fan: float) -> ControlInput:
    """Clamp the heater to [0, 1], round it to the 0.05 grid and the fan to {0, 1}.

    Ties round up.
    """
    if not (math.isfinite(raw_heater) and math.isfinite(raw_fan)):
        raise ValueError(f"non-finite control ({raw_heater!r}, {raw_fan!r})")
    heater = min(max(float(raw_heater), 0.0), 1.0)
    level = _round_half_up(heater / HEATER_STEP)
    fan = 1 if min(max(float(raw_fan), 0.0), 1.0) >= 0.5 else 0
    return ControlInput(level * HEATER_STEP, fan)


def action_grid() -> list[ControlInput]:
    """All 42 admissible controls, ordered fan-major then heater level."""
    return [ControlInput(level * HEATER_STEP, fan) for fan in (0, 1) for level in range(HEATER_LEVELS)]


@dataclass(frozen=True)
class PlantParams:
    """Lumped parameters of the enclosure, SI units.

    ``f_max`` is in m^3/s; use :meth:`from_flow_per_hour` for catalogue values.
    """

    h_max: float = 100.0
    f_max: float = 68.0 / 3600.0
    volume: float = 0.5 * 0.5 * 0.6
    rho: float = 1.2
    cp: float = 1005.0

    def __post_init__(self):
        for name in ("h_max", "f_max", "volume", "rho", "cp"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"PlantParams.{name} must be strictly positive, got {value!r}")

    @classmethod
    def from_flow_per_hour(cls, f_max_m3h: float, **kwargs) -> "PlantParams":
        return cls(f_max=f_max_m3h / 3600.0, **kwargs)

    @property
    def heat_capacity(self) -> float:
        """Air heat capacity ``rho * V * cp`` in J/K."""
        return self.rho * self.volume * self.cp


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed samples at a fixed step.

    Sample ``k`` pairs the state measured at ``t0 + k*dt`` with the control
    held over ``[t_k, t_k + dt)``.
    """

    dt: float
    samples: tuple[tuple[ThermalState, ControlInput], ...]
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise ValueError("trajectory must be non-empty")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([s.t_inside for s, _ in self.samples])

    @property
    def ambient(self) -> np.ndarray:
        return np.array([s.t_ambient for s, _ in self.samples])

    @property
    def controls(self) -> list[ControlInput]:
        return [u for _, u in self.samples]

    def as_array(self) -> np.ndarray:
        """``(n, 4)`` array with columns ``FEATURES``."""
        return np.array([[s.t_inside, s.t_ambient, u.heater_duty, u.fan_on] for s, u in self.samples], dtype=float)

    @classmethod
    def from_arrays(cls, dt, t_inside, t_ambient, heater, fan, t0=0.0) -> "Trajectory":
        samples = tuple(
            (ThermalState(ti, ta), ControlInput(h, int(f)))
            for ti, ta, h, f in zip(t_inside, t_ambient, heater, fan)
        )
        return cls(dt=float(dt), samples=samples, t0=float(t0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t, (s, u) in zip(self.times, self.samples):
            writer.writerow([repr(float(t)), repr(s.t_inside), repr(s.t_ambient), f"{u.heater_duty:.2f}", u.fan_on])
        return buf.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"expected CSV header {','.join(CSV_HEADER)}")
        body = [[float(v) for v in r] for r in rows[1:] if r]
        if not body:
            raise ValueError("trajectory CSV has no samples")
        data = np.array(body)
        t = data[:, 0]
        dt = t[1] - t[0] if len(t) > 1 else DEFAULT_DT
        if len(t) > 1 and not np.allclose(np.diff(t), dt, rtol=0, atol=1e-9 * max(1.0, abs(dt))):
            raise ValueError("trajectory CSV is not sampled at a fixed step")
        return cls.from_arrays(dt, data[:, 1], data[:, 2], data[:, 3], data[:, 4], t0=t[0])

    @classmethod
    def load_csv(cls, path: str | Path) -> "Trajectory":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class WindowedDataset:
    """Input windows ``X`` of shape ``(n, lookback, 4)`` and targets ``y`` of shape ``(n,)``.

    The target is the inside temperature ``horizon`` steps after the last
    sample of its window.
    """

    X: np.ndarray
    y: np.ndarray
    lookback: int = 10
    horizon: int = 1
    split_ratio: float = 0.8
    dt: float = DEFAULT_DT
    # lower-level bookkeeping: index of the window end inside its source trajectory
    origin: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, self.lookback, len(FEATURES))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if len(X) != len(y):
            raise ValueError(f"{len(X)} windows but {len(y)} targets")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        origin = np.arange(len(y)) if self.origin is None else np.asarray(self.origin)
        object.__setattr__(self, "origin", origin)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def pairs(self) -> list[tuple[np.ndarray, float]]:
        return [(self.X[i], float(self.y[i])) for i in range(len(self))]

    def subset(self, idx) -> "WindowedDataset":
        return WindowedDataset(self.X[idx], self.y[idx], self.lookback, self.horizon, self.split_ratio,
                               self.dt, self.origin[idx])


def make_windows(traj: Trajectory, lookback: int = 10, horizon: int = 1) -> WindowedDataset:
    """Overlapping stride-1 windows; ``len(traj) - lookback - horizon + 1`` pairs."""
    if lookback < 1 or horizon < 1:
        raise ValueError("lookback and horizon must be >= 1")
    n = len(traj)
    if n < lookback + horizon:
        raise ValueError(f"trajectory of {n} samples is too short for lookback={lookback}, horizon={horizon}")
    data = traj.as_array()
    count = n - lookback - horizon + 1
    idx = np.arange(count)[:, None] + np.arange(lookback)[None, :]
    X = data[idx]
    ends = np.arange(count) + lookback - 1
    y = data[ends + horizon, 0]
    return WindowedDataset(X, y, lookback, horizon, dt=traj.dt, origin=ends)


def concat_windows(datasets: Sequence[WindowedDataset]) -> WindowedDataset:
    """Stack windows from several trajectories; no window straddles two series."""
    if not datasets:
        raise ValueError("nothing to concatenate")
    first = datasets[0]
    for ds in datasets[1:]:
        if (ds.lookback, ds.horizon, ds.dt) != (first.lookback, first.horizon, first.dt):
            raise ValueError("datasets differ in lookback, horizon or dt")
    return WindowedDataset(
        np.concatenate([d.X for d in datasets]), np.concatenate([d.y for d in datasets]),
        first.lookback, first.horizon, first.split_ratio, first.dt,
        np.concatenate([d.origin for d in datasets]),
    )


def chrono_split(ds: WindowedDataset, ratio: float = 0.8) -> tuple[WindowedDataset, WindowedDataset]:
    """First ``floor(ratio * n)`` pairs train, the rest validate; order is preserved."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    n = len(ds)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_train = int(math.floor(ratio * n))
    if n_train == 0:
        raise ValueError(f"split of {n} pairs at ratio {ratio} leaves the training set empty")
    if n_train == n:
        raise ValueError(f"split of {n} pairs at ratio {ratio} leaves the validation set empty")
    return ds.subset(slice(0, n_train)), ds.subset(slice(n_train, n))


def split_each(datasets: Iterable[WindowedDataset], ratio: float = 0.8) -> tuple[WindowedDataset, WindowedDataset]:
    """Chronological split applied per series, then pooled."""
    pairs = [chrono_split(d, ratio) for d in datasets]
    return concat_windows([p[0] for p in pairs]), concat_windows([p[1] for p in pairs])


def mae(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError(f"MAE needs equal non-empty shapes, got {a.shape} and {b.shape}")
    return float(np.mean(np.abs(a - b)))

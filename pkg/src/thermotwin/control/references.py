"""Reference temperature profiles for tracking experiments.

Profiles are functions of the step index ``k`` (one step per sampling
interval). They are surrogates: none reproduces a measured profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROFILE_KINDS = ("constant", "ramp", "staircase", "sinusoid")


@dataclass(frozen=True)
class ReferenceProfile:
    """A labelled reference profile.

    ``constant`` holds ``base``; ``ramp`` moves linearly from ``base`` to
    ``base + span`` over ``period`` steps and then holds; ``staircase`` visits
    ``levels`` for ``period`` steps each, blending linearly over ``ramp``
    steps at every change; ``sinusoid`` oscillates around ``base`` with
    amplitude ``span`` and the given period.
    """

    kind: str = "staircase"
    base: float = 26.0
    span: float = 3.0
    period: int = 60
    levels: tuple[float, ...] = (26.0, 28.0, 30.0, 27.0)
    ramp: int = 8

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown reference kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if self.period < 1 or self.ramp < 0:
            raise ValueError("period must be >= 1 and ramp >= 0")
        if self.kind == "staircase" and not self.levels:
            raise ValueError("staircase needs at least one level")
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.base
        if self.kind == "ramp":
            return self.base + self.span * min(k / self.period, 1.0)
        if self.kind == "sinusoid":
            return self.base + self.span * math.sin(2.0 * math.pi * k / self.period)
        idx = min(k // self.period, len(self.levels) - 1)
        level = self.levels[idx]
        into = k - idx * self.period
        if idx > 0 and into < self.ramp:
            prev = self.levels[idx - 1]
            return prev + (level - prev) * (into + 1) / (self.ramp + 1)
        return level

    def values(self, n: int) -> np.ndarray:
        return np.array([self(k) for k in range(n)])

    @property
    def default_steps(self) -> int:
        return self.period * len(self.levels) if self.kind == "staircase" else 4 * self.period

    @classmethod
    def named(cls, name: str, **kw) -> "ReferenceProfile":
        """Library profiles by name: constant, ramp, staircase, sinusoid."""
        presets = {
            "constant": dict(kind="constant", base=27.0),
            "ramp": dict(kind="ramp", base=25.0, span=5.0, period=120),
            "staircase": dict(kind="staircase"),
            "sinusoid": dict(kind="sinusoid", base=27.5, span=2.0, period=120),
        }
        if name not in presets:
            raise ValueError(f"unknown reference profile {name!r}; expected one of {sorted(presets)}")
        return cls(**{**presets[name], **kw})

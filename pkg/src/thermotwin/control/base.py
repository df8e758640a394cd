"""Controller contract shared by MPC, DQN and LLM controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import ControlInput, ThermalState


@dataclass(frozen=True)
class Observation:
    """What a controller sees at step ``k``.

    ``history`` is an ``(n, 4)`` array of earlier measured rows
    ``(t_inside, t_ambient, heater_duty, fan_on)``, each row holding the
    control applied after that measurement; the current measurement is not
    part of it.
    """

    k: int
    t: float
    measurement: ThermalState
    reference: float
    history: np.ndarray = field(repr=False)

    @property
    def error(self) -> float:
        return self.measurement.t_inside - self.reference

    @property
    def last_control(self) -> ControlInput:
        if len(self.history) == 0:
            return ControlInput(0.0, 0)
        h, f = self.history[-1, 2:]
        return ControlInput(float(h), int(f))

    def window(self, lookback: int) -> np.ndarray:
        """Last ``lookback`` rows ending with the current measurement (its control is a placeholder).

        Missing early rows repeat the first measurement with zero control.
        """
        current = np.array([[self.measurement.t_inside, self.measurement.t_ambient, 0.0, 0.0]])
        rows = np.vstack([self.history, current]) if len(self.history) else current
        if len(rows) < lookback:
            pad = np.repeat(rows[:1], lookback - len(rows), axis=0)
            pad[:, 2:] = 0.0
            rows = np.vstack([pad, rows])
        return rows[-lookback:].copy()


@dataclass(frozen=True)
class Decision:
    """A control plus its score (cost or reward) and free-text rationale."""

    control: ControlInput
    score: float = math.nan
    rationale: str = ""
    converged: bool = True


class Controller:
    """Maps an :class:`Observation` to a :class:`Decision`."""

    name = "controller"

    def reset(self) -> None:
        pass

    def act(self, obs: Observation) -> Decision:
        raise NotImplementedError


class ConstantController(Controller):
    """Holds one control regardless of the observation."""

    name = "constant"

    def __init__(self, control: ControlInput = ControlInput(0.0, 0)):
        self.control = control

    def act(self, obs: Observation) -> Decision:
        return Decision(self.control, 0.0, "constant control")

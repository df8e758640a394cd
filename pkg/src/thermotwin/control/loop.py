"""Closed-loop episodes: sense, decide, actuate every sampling interval."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import ControlInput, ThermalState
from ..plant import ThermalPlant
from .base import Controller, Decision, Observation
from .references import ReferenceProfile

log = logging.getLogger(__name__)

TELEMETRY_COLUMNS = ("t", "T_ref", "T_meas", "heater_duty", "fan_on", "reward_or_cost", "rationale")


@dataclass(frozen=True)
class TelemetryRow:
    t: float
    t_ref: float
    t_meas: float
    t_true: float
    control: ControlInput
    score: float
    rationale: str

    def as_csv_row(self) -> list[str]:
        score = "" if math.isnan(self.score) else repr(float(self.score))
        return [repr(float(self.t)), repr(float(self.t_ref)), repr(float(self.t_meas)),
                f"{self.control.heater_duty:.2f}", str(self.control.fan_on), score, self.rationale]


@dataclass
class EpisodeResult:
    """Telemetry of one episode.

    ``mae`` compares measured temperature with the reference, as a sensor
    would; ``mae_true`` uses the noise-free plant temperature.
    """

    controller: str
    rows: list[TelemetryRow] = field(default_factory=list)
    aborted: bool = False
    error: str = ""

    @property
    def steps(self) -> int:
        return len(self.rows)

    @property
    def mae(self) -> float:
        return float(np.mean([abs(r.t_meas - r.t_ref) for r in self.rows])) if self.rows else math.nan

    @property
    def mae_true(self) -> float:
        return float(np.mean([abs(r.t_true - r.t_ref) for r in self.rows])) if self.rows else math.nan

    @property
    def heater_total(self) -> float:
        return float(sum(r.control.heater_duty for r in self.rows))

    @property
    def fan_total(self) -> int:
        return int(sum(r.control.fan_on for r in self.rows))

    @property
    def actuation(self) -> float:
        """Total actuation ``sum u_h + sum u_f``."""
        return self.heater_total + self.fan_total

    @property
    def controls(self) -> list[ControlInput]:
        return [r.control for r in self.rows]

    def telemetry_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TELEMETRY_COLUMNS)
        for r in self.rows:
            w.writerow(r.as_csv_row())
        return buf.getvalue()

    def save_telemetry(self, path: str | Path) -> None:
        Path(path).write_text(self.telemetry_csv(), encoding="utf-8")


def read_telemetry(path_or_text: str | Path) -> list[dict]:
    """Parse a telemetry CSV back into dicts of floats (rationale kept as text)."""
    text = path_or_text if isinstance(path_or_text, str) and "\n" in path_or_text else Path(path_or_text).read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        out.append({"t": float(r["t"]), "T_ref": float(r["T_ref"]), "T_meas": float(r["T_meas"]),
                    "heater_duty": float(r["heater_duty"]), "fan_on": int(r["fan_on"]),
                    "reward_or_cost": float(r["reward_or_cost"]) if r["reward_or_cost"] else math.nan,
                    "rationale": r["rationale"]})
    return out


def run_closed_loop(controller: Controller, plant: ThermalPlant, reference: ReferenceProfile,
                    steps: int | None = None, t_start: float | None = None) -> EpisodeResult:
    """Run one episode of ``steps`` decisions on ``plant``.

    The controller only sees noisy sensor readings. The plant is reset to
    ``t_start`` (default: the first reference value). If the controller
    raises, the episode stops and the telemetry gathered so far is kept.
    """
    steps = reference.default_steps if steps is None else int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    plant.reset(reference(0) if t_start is None else t_start)
    controller.reset()
    result = EpisodeResult(getattr(controller, "name", type(controller).__name__))
    history = np.empty((0, 4))
    for k in range(steps):
        meas: ThermalState = plant.measure()
        ref = float(reference(k))
        obs = Observation(k, plant.t, meas, ref, history)
        try:
            decision: Decision = controller.act(obs)
            u = decision.control
            if not isinstance(u, ControlInput):
                raise TypeError(f"controller returned {type(u).__name__}, expected ControlInput")
        except Exception as exc:  # episode-level containment; the caller sees result.error
            log.warning("controller %s failed at step %d: %s", result.controller, k, exc)
            result.aborted = True
            result.error = f"step {k}: {type(exc).__name__}: {exc}"
            break
        result.rows.append(TelemetryRow(plant.t, ref, meas.t_inside, plant.state.t_inside, u,
                                        decision.score, decision.rationale))
        history = np.vstack([history, [meas.t_inside, meas.t_ambient, u.heater_duty, u.fan_on]])
        plant.step(u)
    return result

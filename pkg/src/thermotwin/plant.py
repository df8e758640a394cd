"""Virtual stand-in for the physical enclosure.

The plant integrates the lumped energy balance of the enclosure with effects
the physics-based model leaves out: conduction through the walls, a
first-order lag between heater command and delivered power, air leaking
through the fan duct while the fan is off, a reduced delivered fan flow and an
interior thermal mass exchanging heat with the air. Measurements carry
Gaussian noise.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_DT,
    ControlInput,
    PlantParams,
    ThermalState,
    Trajectory,
    check_temperature,
)
from .integrate import IntegratorConfig, OdeProblem, solve_rk45

SCENARIO_DIR = Path(__file__).parent / "scenarios"


@dataclass(frozen=True)
class AmbientProfile:
    """Constant ambient temperature, optionally with a slow sinusoid on top."""

    mean: float = 22.0
    amplitude: float = 0.0
    period: float = 86_400.0

    def __call__(self, t: float) -> float:
        if self.amplitude == 0.0:
            return self.mean
        return self.mean + self.amplitude * math.sin(2.0 * math.pi * t / self.period)


@dataclass(frozen=True)
class PlantConfig:
    """Plant parameters.

    ``mass_capacity`` (J/K) and ``mass_coupling`` (W/K) describe the interior
    thermal mass (soil, pot, structure) exchanging heat with the air; a zero
    capacity removes that node. ``fan_efficiency`` is the delivered fraction
    of the rated fan flow.
    """

    params: PlantParams = field(default_factory=PlantParams)
    wall_loss_coeff: float = 1.5
    heater_lag_tau: float = 30.0
    fan_leak_frac: float = 0.02
    sensor_noise_sd: float = 0.25
    rng_seed: int = 0
    mass_capacity: float = 1_500.0
    mass_coupling: float = 400.0
    fan_efficiency: float = 0.5
    ambient: AmbientProfile = field(default_factory=AmbientProfile)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.wall_loss_coeff < 0:
            raise ValueError("wall_loss_coeff must be >= 0")
        if self.heater_lag_tau < 0:
            raise ValueError("heater_lag_tau must be >= 0")
        if not 0 <= self.fan_leak_frac < 1:
            raise ValueError("fan_leak_frac must lie in [0, 1)")
        if self.sensor_noise_sd < 0:
            raise ValueError("sensor_noise_sd must be >= 0")
        if self.mass_capacity < 0 or self.mass_coupling < 0:
            raise ValueError("mass_capacity and mass_coupling must be >= 0")
        if not 0 < self.fan_efficiency <= 1:
            raise ValueError("fan_efficiency must lie in (0, 1]")

    @classmethod
    def ideal(cls, **kwargs) -> "PlantConfig":
        """A plant with every mismatch term switched off."""
        base = dict(wall_loss_coeff=0.0, heater_lag_tau=0.0, fan_leak_frac=0.0, sensor_noise_sd=0.0,
                    mass_capacity=0.0, fan_efficiency=1.0)
        base.update(kwargs)
        return cls(**base)

    def with_seed(self, seed: int) -> "PlantConfig":
        return replace(self, rng_seed=int(seed))

    @property
    def has_lag(self) -> bool:
        return self.heater_lag_tau > 0

    @property
    def has_mass(self) -> bool:
        return self.mass_capacity > 0 and self.mass_coupling > 0


@dataclass(frozen=True)
class PlantLatent:
    """Plant-internal state: delivered heater power (W) and thermal-mass temperature."""

    power: float
    mass_temp: float


def plant_rhs(cfg: PlantConfig, u: ControlInput):
    """Right-hand side over one zero-order-hold interval.

    State layout is ``[T, P, T_mass]`` with ``P`` present only under heater
    lag and ``T_mass`` only with an interior thermal mass.
    """
    p = cfg.params
    cap = p.rho * p.volume * p.cp
    vol = p.volume
    flow = u.fan_on * cfg.fan_efficiency * p.f_max + (1 - u.fan_on) * cfg.fan_leak_frac * p.f_max
    wall = cfg.wall_loss_coeff
    ambient = cfg.ambient
    command = u.heater_duty * p.h_max
    tau = cfg.heater_lag_tau
    lag, mass = cfg.has_lag, cfg.has_mass
    k_mass, c_mass = cfg.mass_coupling, cfg.mass_capacity
    i_mass = 2 if lag else 1

    def rhs(t, y):
        t_amb = ambient(t)
        temp = y[0]
        power = y[1] if lag else command
        d_temp = power / cap - flow * (temp - t_amb) / vol - wall * (temp - t_amb) / cap
        out = [d_temp]
        if lag:
            out.append((command - y[1]) / tau)
        if mass:
            exchange = k_mass * (y[i_mass] - temp)
            out[0] = d_temp + exchange / cap
            out.append(-exchange / c_mass)
        return out

    return rhs


def plant_step(state: ThermalState, u: ControlInput, latent: PlantLatent | None, dt: float,
               cfg: PlantConfig, t: float = 0.0) -> tuple[ThermalState, PlantLatent]:
    """Advance the true plant by ``dt`` seconds under a held control.

    ``latent=None`` means a settled plant: heater power at its command and
    the thermal mass at the air temperature.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    check_temperature(state.t_inside)
    if latent is None:
        latent = PlantLatent(u.heater_duty * cfg.params.h_max, state.t_inside)
    y0 = [state.t_inside]
    if cfg.has_lag:
        y0.append(latent.power)
    if cfg.has_mass:
        y0.append(latent.mass_temp)
    y = solve_rk45(OdeProblem(plant_rhs(cfg, u), (t, t + dt), y0), cfg.integrator).y
    t_next = float(y[0])
    power = float(y[1]) if cfg.has_lag else u.heater_duty * cfg.params.h_max
    mass_temp = float(y[-1]) if cfg.has_mass else t_next
    check_temperature(t_next)
    return ThermalState(t_next, cfg.ambient(t + dt)), PlantLatent(power, mass_temp)


def read_sensor(state: ThermalState, cfg: PlantConfig, rng: np.random.Generator) -> ThermalState:
    """Noisy reading of the inside temperature; ambient is reported exactly."""
    if cfg.sensor_noise_sd == 0:
        return state
    return ThermalState(state.t_inside + cfg.sensor_noise_sd * rng.standard_normal(), state.t_ambient)


class ThermalPlant:
    """Stateful plant instance: true state, latent state, clock and sensor RNG."""

    def __init__(self, cfg: PlantConfig | None = None, dt: float = DEFAULT_DT):
        self.cfg = cfg or PlantConfig()
        self.dt = float(dt)
        self.reset()

    def reset(self, t_inside: float | None = None, heater_duty: float = 0.0, t0: float = 0.0,
              mass_temp: float | None = None) -> ThermalState:
        self.t = float(t0)
        t_amb = self.cfg.ambient(self.t)
        self.state = ThermalState(t_amb if t_inside is None else t_inside, t_amb)
        self.latent = PlantLatent(heater_duty * self.cfg.params.h_max,
                                  self.state.t_inside if mass_temp is None else mass_temp)
        self.rng = np.random.default_rng(self.cfg.rng_seed)
        return self.state

    def step(self, u: ControlInput) -> ThermalState:
        self.state, self.latent = plant_step(self.state, u, self.latent, self.dt, self.cfg, self.t)
        self.t += self.dt
        return self.state

    def measure(self) -> ThermalState:
        return read_sensor(self.state, self.cfg, self.rng)

    def settled_heater(self, t_inside: float) -> float:
        """Heater duty holding ``t_inside`` at steady state with the fan off (unclamped)."""
        p = self.cfg.params
        loss = self.cfg.wall_loss_coeff + self.cfg.fan_leak_frac * p.f_max * p.rho * p.cp
        return loss * (t_inside - self.cfg.ambient(self.t)) / p.h_max


# --------------------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    train_range: tuple[float, float]
    test_range: tuple[float, float]
    kind: str
    input_schedule: tuple[ControlInput, ...]
    initial_temperature: float | None = None

    def __post_init__(self):
        for label, (lo, hi) in (("train_range", self.train_range), ("test_range", self.test_range)):
            if not lo < hi:
                raise ValueError(f"{label} must be ordered, got ({lo}, {hi})")
        inside = self.train_range[0] <= self.test_range[0] and self.test_range[1] <= self.train_range[1]
        expected = "interpolation" if inside else "extrapolation"
        if self.kind != expected:
            raise ValueError(f"scenario {self.name!r}: test range {self.test_range} vs train range "
                             f"{self.train_range} makes it {expected}, not {self.kind}")
        object.__setattr__(self, "input_schedule", tuple(self.input_schedule))

    @property
    def start_temperature(self) -> float:
        if self.initial_temperature is not None:
            return self.initial_temperature
        return 0.5 * (self.test_range[0] + self.test_range[1])

    # the plain-text format is an INI file with [scenario] and [schedule] sections
    @classmethod
    def from_text(cls, text: str) -> "ScenarioSpec":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        sc = parser["scenario"]
        try:
            segments = parser["schedule"]["segments"]
        except KeyError:
            raise ValueError("scenario file needs [schedule] segments") from None
        init = sc.get("initial_temperature")
        return cls(
            name=sc["name"],
            train_range=_pair(sc["train_range"]),
            test_range=_pair(sc["test_range"]),
            kind=sc["kind"].strip(),
            input_schedule=decode_schedule(segments),
            initial_temperature=None if init is None else float(init),
        )

    def to_text(self) -> str:
        lines = [
            "[scenario]",
            f"name = {self.name}",
            f"kind = {self.kind}",
            f"train_range = {self.train_range[0]}, {self.train_range[1]}",
            f"test_range = {self.test_range[0]}, {self.test_range[1]}",
        ]
        if self.initial_temperature is not None:
            lines.append(f"initial_temperature = {self.initial_temperature}")
        lines += ["", "[schedule]", "# heater_duty:fan_on:minutes", "segments =",
                  *("    " + seg for seg in encode_schedule(self.input_schedule).split(", "))]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioSpec":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _pair(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def encode_schedule(schedule: Sequence[ControlInput]) -> str:
    """Run-length encode controls as ``heater:fan:count`` segments."""
    out = []
    for u in schedule:
        if out and out[-1][0] == u:
            out[-1][1] += 1
        else:
            out.append([u, 1])
    return ", ".join(f"{u.heater_duty:.2f}:{u.fan_on}:{n}" for u, n in out)


def decode_schedule(text: str) -> tuple[ControlInput, ...]:
    schedule = []
    for seg in text.replace("\n", ",").split(","):
        seg = seg.strip()
        if not seg:
            continue
        heater, fan, count = seg.split(":")
        schedule.extend([ControlInput(float(heater), int(fan))] * int(count))
    if not schedule:
        raise ValueError("empty input schedule")
    return tuple(schedule)


def load_scenarios(directory: str | Path | None = None) -> list[ScenarioSpec]:
    """The six shipped scenarios, ordered by file name."""
    directory = Path(directory) if directory is not None else SCENARIO_DIR
    return [ScenarioSpec.load(p) for p in sorted(directory.glob("scenario_*.ini"))]


def run_schedule(schedule: Sequence[ControlInput], cfg: PlantConfig, t_start: float,
                 dt: float = DEFAULT_DT) -> tuple[Trajectory, np.ndarray]:
    """Apply a schedule open loop; returns the measured trajectory and the true temperatures."""
    if not schedule:
        raise ValueError("schedule must be non-empty")
    plant = ThermalPlant(cfg, dt)
    plant.reset(t_start, heater_duty=schedule[0].heater_duty)
    samples, truth = [], []
    for u in schedule:
        samples.append((plant.measure(), u))
        truth.append(plant.state.t_inside)
        plant.step(u)
    return Trajectory(dt, tuple(samples)), np.array(truth)


def generate_dataset(spec: ScenarioSpec, cfg: PlantConfig, dt: float = DEFAULT_DT) -> Trajectory:
    """Measured trajectory of the plant driven by the scenario's input schedule."""
    return run_schedule(spec.input_schedule, cfg, spec.start_temperature, dt)[0]


# --------------------------------------------------------------------------- schedule design

@dataclass(frozen=True)
class ScheduleStyle:
    """Knobs of the scripted input sequences.

    ``hold`` bounds how long (minutes) a set-point is held and ``fan_every``
    the gap between fan pulses of ``fan_minutes``. ``heat_budget`` caps the
    heater duty-minutes accumulated between two pulses, which keeps the
    loss-free physics model bounded when it replays the schedule.
    """

    hold: tuple[int, int] = (8, 25)
    fan_every: tuple[int, int] = (4, 10)
    fan_minutes: tuple[int, int] = (1, 1)
    heat_budget: float = 1.2
    lookahead: int = 4
    floor_margin: float = 0.25


def design_schedule(target_range: tuple[float, float], length: int, rng: np.random.Generator,
                    cfg: PlantConfig | None = None, style: ScheduleStyle = ScheduleStyle(),
                    t_start: float | None = None, dt: float = DEFAULT_DT) -> tuple[ControlInput, ...]:
    """Script a heater/fan sequence whose plant response wanders over ``target_range``.

    Set-points are drawn inside the range and approached by a constant-duty
    inverse over a short lookahead on a noise-free plant copy. Fan pulses are
    interleaved regularly. The result is a fixed open-loop schedule.
    """
    cfg = replace(cfg or PlantConfig(), sensor_noise_sd=0.0)
    lo, hi = target_range
    plant = ThermalPlant(cfg, dt)
    start = 0.5 * (lo + hi) if t_start is None else t_start
    plant.reset(start, heater_duty=min(max(plant.settled_heater(start), 0.0), 1.0))
    schedule: list[ControlInput] = []
    setpoint, hold_left = lo, 0
    fan_left, next_fan = 0, int(rng.integers(*style.fan_every, endpoint=True))
    heat = 0.0
    while len(schedule) < length:
        if hold_left == 0:
            setpoint = float(rng.uniform(lo + style.floor_margin * (hi - lo), hi))
            hold_left = int(rng.integers(*style.hold, endpoint=True))
        hold_left -= 1
        if fan_left == 0 and next_fan <= 0:
            fan_left = int(rng.integers(*style.fan_minutes, endpoint=True))
            next_fan = int(rng.integers(*style.fan_every, endpoint=True))
        fan = 1 if fan_left > 0 else 0
        u = _lookahead_heater(plant, fan, setpoint, style.lookahead)
        if fan:
            fan_left -= 1
            heat = 0.0
        else:
            next_fan -= 1
            if heat + u.heater_duty > style.heat_budget:
                u = ControlInput(math.floor(max(style.heat_budget - heat, 0.0) / 0.05 + 1e-9) * 0.05, 0)
                next_fan = 0
            heat += u.heater_duty
        schedule.append(u)
        plant.step(u)
    return tuple(schedule)


def _lookahead_heater(plant: ThermalPlant, fan: int, setpoint: float, horizon: int) -> ControlInput:
    # the plant is linear for a fixed fan pattern, so the end temperature is affine in the duty
    def end_temp(duty):
        state, latent, t = plant.state, plant.latent, plant.t
        for k in range(horizon):
            u = ControlInput(duty, fan if k == 0 else 0)
            state, latent = plant_step(state, u, latent, plant.dt, plant.cfg, t)
            t += plant.dt
        return state.t_inside

    t_lo, t_hi = end_temp(0.0), end_temp(1.0)
    duty = (setpoint - t_lo) / (t_hi - t_lo) if t_hi != t_lo else 0.0
    level = min(max(int(round(duty * 20)), 0), 20)
    return ControlInput(level * 0.05, fan)


TRAINING_STYLE = ScheduleStyle(fan_every=(5, 12), floor_margin=0.0, heat_budget=4.0)


def training_trajectories(train_range: tuple[float, float], cfg: PlantConfig, n_series: int = 25,
                          length: int = 212, seed: int = 0, style: ScheduleStyle = TRAINING_STYLE,
                          dt: float = DEFAULT_DT) -> list[Trajectory]:
    """Measured training series spanning ``train_range``, one sensor seed per series."""
    rng = np.random.default_rng(seed)
    series = []
    for i in range(n_series):
        start = float(rng.uniform(*train_range))
        schedule = design_schedule(train_range, length, rng, cfg, style, t_start=start, dt=dt)
        plant_cfg = cfg.with_seed(int(rng.integers(2**31)))
        series.append(run_schedule(schedule, plant_cfg, start, dt)[0])
    return series

TRAINING_RANGES = ((21.8, 36.9), (21.8, 29.7))

# (train range, test range) per scenario; 1-3 interpolate, 4-6 extrapolate
SCENARIO_RANGES = (
    ((21.8, 36.9), (25.5, 30.3)),
    ((21.8, 36.9), (25.4, 30.0)),
    ((21.8, 36.9), (25.0, 33.3)),
    ((21.8, 29.7), (25.5, 30.3)),
    ((21.8, 29.7), (25.4, 30.0)),
    ((21.8, 29.7), (25.0, 33.3)),
)

# test schedules: steady heating with frequent ventilation; sparse long heating
# periods with rare ventilation; intermittent heater and fan
TEST_STYLES = (
    ScheduleStyle(hold=(10, 25), fan_every=(3, 6)),
    ScheduleStyle(hold=(20, 40), fan_every=(7, 12)),
    ScheduleStyle(hold=(3, 8), fan_every=(2, 5), floor_margin=0.6, heat_budget=1.5),
)


def build_scenarios(cfg: PlantConfig | None = None, length: int = 212, seed: int = 2024) -> list[ScenarioSpec]:
    """Script the six benchmark scenarios.

    Scenarios ``k`` and ``k + 3`` share one test schedule and differ only in
    their training range.
    """
    cfg = cfg or PlantConfig()
    schedules = []
    for i, style in enumerate(TEST_STYLES):
        test_range = SCENARIO_RANGES[i][1]
        rng = np.random.default_rng(seed + i)
        start = 0.5 * (test_range[0] + test_range[1])
        schedules.append((start, design_schedule(test_range, length, rng, cfg, style, t_start=start)))
    specs = []
    for i, (train_range, test_range) in enumerate(SCENARIO_RANGES):
        start, schedule = schedules[i % 3]
        inside = train_range[0] <= test_range[0] and test_range[1] <= train_range[1]
        specs.append(ScenarioSpec(
            name=f"scenario-{i + 1}", train_range=train_range, test_range=test_range,
            kind="interpolation" if inside else "extrapolation",
            input_schedule=schedule, initial_temperature=round(start, 2),
        ))
    return specs

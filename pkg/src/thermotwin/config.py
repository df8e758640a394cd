"""Run configuration: INI sections of ``key = value`` merged over defaults.

Every key has a typed default; values read from files or overrides are
coerced to that type. Unknown sections or keys raise :class:`ConfigError`
naming the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
from pathlib import Path
from typing import Any, Mapping

DEFAULTS: dict[str, dict[str, Any]] = {
    "suite": {
        "seed": 0,
        "models": ("arx", "pbm", "lstm", "ham"),
        "controllers": ("mpc", "dqn", "llm-simple", "llm-prediction-assisted"),
        "scenarios": (1, 2, 3, 4, 5, 6),
    },
    "plant": {
        "wall_loss_coeff": 1.5,
        "heater_lag_tau": 30.0,
        "fan_leak_frac": 0.02,
        "fan_efficiency": 0.5,
        "sensor_noise_sd": 0.25,
        "mass_capacity": 1500.0,
        "mass_coupling": 400.0,
        "ambient": 22.0,
    },
    "data": {
        "n_series": 25,
        "length": 212,
        "lookback": 10,
    },
    "arx": {"p": 10, "q": 10, "ridge": 1e-8},
    "lstm": {
        "hidden": 64, "blocks": 3, "dropout": 0.2, "epochs": 5000, "batch_size": 40,
        "learning_rate": 1e-3, "min_delta": 5e-4, "patience": 10,
    },
    "ham": {
        "hidden": 64, "dropout": 0.0, "epochs": 1000, "batch_size": 64, "learning_rate": 1e-3,
        "min_delta": 5e-4, "patience": 10, "state_feature": "t", "target_scale": "closure",
    },
    "mpc": {"horizon": 10, "max_iter": 200, "gtol": 1e-9, "discrete": "enumerate", "tie_break": 1e-4},
    "rl": {
        "offline_steps": 100_000, "gamma": 0.99, "replay_capacity": 50_000, "batch_size": 64,
        "target_sync": 1000, "learning_rate": 1e-3, "hidden": 64, "episode_steps": 240,
        "eps_fraction": 0.3, "eps_end": 0.05, "twin": "ham", "twin_noise": 0.25,
    },
    "llm": {
        "variant": "simple", "backend": "mock", "base_url": "http://localhost:8000/v1", "model": "default",
        "token_env": "THERMOTWIN_LLM_TOKEN", "timeout": 30.0, "temperature": 0.0, "candidate_count": 5,
        "assist": "arx", "assist_steps": 1,
    },
    "control": {
        "reference": "staircase",
        "steps": 0,
        "seeds": (0, 1),
        "penalty": False,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the offending ``section.key``."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _coerce(key: str, default: Any, raw: Any) -> Any:
    if not isinstance(raw, str):
        raw_text = ", ".join(map(str, raw)) if isinstance(raw, (tuple, list)) else str(raw)
    else:
        raw_text = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw_text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw_text!r}")
        if isinstance(default, int):
            return int(raw_text)
        if isinstance(default, float):
            return float(raw_text)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw_text.split(",") if s.strip()]
            kind = type(default[0]) if default else str
            return tuple(kind(s) for s in items)
        return raw_text
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw_text!r}: {exc}") from None


def _format(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Config:
    """Resolved configuration, read as ``cfg["section"]["key"]``."""

    def __init__(self, values: Mapping[str, Mapping[str, Any]] | None = None):
        self.values = copy.deepcopy(DEFAULTS)
        for section, entries in (values or {}).items():
            for key, raw in entries.items():
                self.set(f"{section}.{key}", raw)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def set(self, dotted: str, raw: Any) -> None:
        if "." not in dotted:
            raise ConfigError(dotted, "expected section.key")
        section, key = dotted.split(".", 1)
        if section not in self.values:
            raise ConfigError(dotted, f"unknown section {section!r}")
        if key not in self.values[section]:
            raise ConfigError(dotted, f"unknown key {key!r} in section [{section}]")
        self.values[section][key] = _coerce(dotted, DEFAULTS[section][key], raw)

    @classmethod
    def from_text(cls, text: str) -> "Config":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("<file>", f"malformed config: {exc}") from None
        return cls({s: dict(parser[s]) for s in parser.sections()})

    @classmethod
    def load(cls, path: str | Path | None) -> "Config":
        """``None`` or ``"default"`` gives the defaults."""
        if path is None or str(path) == "default":
            return cls()
        p = Path(path)
        if not p.is_file():
            raise ConfigError("--config", f"no such file {str(p)!r}")
        return cls.from_text(p.read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = []
        for section in DEFAULTS:
            lines.append(f"[{section}]")
            lines += [f"{k} = {_format(v)}" for k, v in self.values[section].items()]
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        """sha256 of the canonical text form."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    # typed views -------------------------------------------------------------
    def plant_config(self, seed: int | None = None):
        from .plant import AmbientProfile, PlantConfig

        p = self["plant"]
        kw = {k: v for k, v in p.items() if k != "ambient"}
        try:
            cfg = PlantConfig(ambient=AmbientProfile(p["ambient"]), **kw)
        except ValueError as exc:
            raise ConfigError("plant", str(exc)) from None
        return cfg if seed is None else cfg.with_seed(seed)

    def model(self, kind: str, seed: int = 0):
        from .models import ArxModel, HamRegressor, LstmRegressor, PbmModel

        try:
            if kind == "arx":
                a = self["arx"]
                return ArxModel(p=a["p"], q=a["q"], ridge=a["ridge"])
            if kind == "pbm":
                return PbmModel()
            if kind == "lstm":
                return LstmRegressor(lookback=self["data"]["lookback"], random_state=seed, **self["lstm"])
            if kind == "ham":
                return HamRegressor(random_state=seed, **self["ham"])
        except ValueError as exc:
            raise ConfigError(kind, str(exc)) from None
        raise ConfigError("suite.models", f"unknown model {kind!r}")

    def validate(self) -> "Config":
        """Cross-field checks that individual coercion cannot catch."""
        known_models = ("arx", "pbm", "lstm", "ham")
        for m in self["suite"]["models"]:
            if m not in known_models:
                raise ConfigError("suite.models", f"unknown model {m!r}")
        for c in self["suite"]["controllers"]:
            if c not in CONTROLLERS:
                raise ConfigError("suite.controllers", f"unknown controller {c!r}")
        for s in self["suite"]["scenarios"]:
            if not 1 <= s <= 6:
                raise ConfigError("suite.scenarios", f"scenario {s} outside 1..6")
        if self["rl"]["twin"] not in ("ham", "lstm", "arx"):
            raise ConfigError("rl.twin", f"unknown twin model {self['rl']['twin']!r}")
        if self["llm"]["backend"] not in ("mock", "http"):
            raise ConfigError("llm.backend", f"unknown backend {self['llm']['backend']!r}")
        if self["llm"]["assist"] not in ("arx", "ham", "lstm"):
            raise ConfigError("llm.assist", f"unknown assist model {self['llm']['assist']!r}")
        from .control.llm import VARIANTS
        if self["llm"]["variant"] not in VARIANTS:
            raise ConfigError("llm.variant", f"expected one of {VARIANTS}")
        from .control.references import ReferenceProfile
        try:
            ReferenceProfile.named(self["control"]["reference"])
        except ValueError as exc:
            raise ConfigError("control.reference", str(exc)) from None
        if self["control"]["steps"] < 0:
            raise ConfigError("control.steps", "must be >= 0 (0 means the profile default)")
        if not self["control"]["seeds"]:
            raise ConfigError("control.seeds", "needs at least one seed")
        for section, key in (("data", "n_series"), ("data", "length"), ("data", "lookback")):
            if self[section][key] < 1:
                raise ConfigError(f"{section}.{key}", "must be >= 1")
        self.plant_config()
        for kind in self["suite"]["models"]:
            self.model(kind)
        return self


# "llm" runs the configured [llm] variant; "llm-<variant>" picks one explicitly
CONTROLLERS = ("mpc", "dqn", "dqn-plant", "llm", "llm-simple", "llm-history", "llm-prediction-assisted")

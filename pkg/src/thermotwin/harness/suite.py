"""Model and controller experiment matrices.

Every random draw derives from ``(suite seed, task index)`` so results do not
depend on execution order. Per-task wall times are collected in a separate
timing table because they vary between machines.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..config import Config
from ..control import (
    DqnAgent,
    DqnController,
    HistoryStore,
    HttpBackend,
    LlmController,
    LlmControllerConfig,
    MockBackend,
    MpcConfig,
    MpcController,
    PlantEnv,
    ReferenceProfile,
    RlConfig,
    TwinEnv,
    dqn_train,
    run_closed_loop,
)
from ..control.loop import EpisodeResult
from ..core import make_windows, split_each
from ..models import Predictor, rollout_on
from ..plant import (
    TRAINING_RANGES,
    ScenarioSpec,
    ThermalPlant,
    encode_schedule,
    load_scenarios,
    run_schedule,
    training_trajectories,
)
from .report import ControllerResult, ExperimentReport, ModelResult

log = logging.getLogger(__name__)

WIDE_RANGE = TRAINING_RANGES[0]


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class Timing:
    rows: list[tuple[str, str, float]] = field(default_factory=list)

    def add(self, task: str, item: str, seconds: float) -> None:
        self.rows.append((task, item, seconds))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("task", "item", "seconds"))
        for task, item, s in self.rows:
            w.writerow((task, item, f"{s:.3f}"))
        return buf.getvalue()


# ---------------------------------------------------------------------- data and models

def training_windows(cfg: Config, train_range: tuple[float, float]):
    """Chronological 80/20 split of windows from the training series for ``train_range``."""
    d = cfg["data"]
    idx = TRAINING_RANGES.index(tuple(train_range)) if tuple(train_range) in TRAINING_RANGES else 99
    series = training_trajectories(tuple(train_range), cfg.plant_config(), d["n_series"], d["length"],
                                   seed=derive_seed(cfg["suite"]["seed"], 1, idx))
    return split_each([make_windows(t, d["lookback"]) for t in series])


def train_model(cfg: Config, kind: str, train_range: tuple[float, float], data=None) -> tuple[Predictor, float, int]:
    """Fit one model; returns ``(model, seconds, checkpoint bytes)``."""
    trn, val = data if data is not None else training_windows(cfg, train_range)
    model = cfg.model(kind, cfg["suite"]["seed"])
    t0 = time.perf_counter()
    if kind in ("lstm", "ham"):
        model.fit(trn.X, trn.y, val.X, val.y)
    else:
        L = model.lookback
        model.fit(trn.X[:, -L:], trn.y)
    seconds = time.perf_counter() - t0
    return model, seconds, len(model.to_checkpoint())


def scenario_data_seed(seed: int, spec: ScenarioSpec) -> int:
    """Sensor seed of a scenario's test run; scenarios sharing a schedule share their test data."""
    key = f"{spec.start_temperature!r}|{encode_schedule(spec.input_schedule)}".encode("utf-8")
    return derive_seed(seed, 2, int.from_bytes(hashlib.sha256(key).digest()[:4], "big"))


def select_scenarios(cfg: Config, scenarios: list[ScenarioSpec] | None = None) -> list[ScenarioSpec]:
    specs = scenarios if scenarios is not None else load_scenarios()
    if scenarios is None:
        wanted = set(cfg["suite"]["scenarios"])
        specs = [s for i, s in enumerate(specs, 1) if i in wanted]
    return specs


def run_model_suite(cfg: Config, scenarios: list[ScenarioSpec] | None = None,
                    telemetry_dir: Path | None = None, timing: Timing | None = None) -> ExperimentReport:
    """Train every configured model per training range and roll it out on each test schedule.

    MAE is taken against the noise-free plant temperature. A failed training
    or rollout marks the affected rows and the suite carries on.
    """
    timing = timing if timing is not None else Timing()
    specs = select_scenarios(cfg, scenarios)
    kinds = cfg["suite"]["models"]
    seed = cfg["suite"]["seed"]
    report = ExperimentReport(meta=_meta(cfg, "models"))
    trained: dict[tuple, tuple] = {}
    for rng_key in dict.fromkeys(s.train_range for s in specs):
        data = training_windows(cfg, rng_key)
        for kind in kinds:
            try:
                trained[(rng_key, kind)] = train_model(cfg, kind, rng_key, data)
                timing.add("train", f"{kind}@{rng_key[0]}-{rng_key[1]}", trained[(rng_key, kind)][1])
            except Exception as exc:  # recorded per scenario below
                log.warning("training %s on %s failed: %s", kind, rng_key, exc)
                trained[(rng_key, kind)] = exc
    for spec in specs:
        plant_cfg = cfg.plant_config(scenario_data_seed(seed, spec))
        traj, truth = run_schedule(spec.input_schedule, plant_cfg, spec.start_temperature)
        cols = {"t": traj.times, "T_true": truth, "T_meas": traj.temperatures}
        source = f"models_{spec.name}.csv"
        for kind in kinds:
            entry = trained[(spec.train_range, kind)]
            if isinstance(entry, Exception):
                report.models.append(ModelResult(kind, spec.name, spec.kind, float("nan"), 0,
                                                 f"failed: training: {entry}", source))
                continue
            model, _, nbytes = entry
            try:
                t0 = time.perf_counter()
                pred, _ = rollout_on(model, traj, cfg["data"]["lookback"])
                timing.add("rollout", f"{kind}@{spec.name}", time.perf_counter() - t0)
                skip = len(truth) - len(pred)
                err = float(np.mean(np.abs(pred - truth[skip:])))
                cols[kind] = np.concatenate([np.full(skip, np.nan), pred])
                report.models.append(ModelResult(kind, spec.name, spec.kind, err, nbytes, "ok", source))
            except Exception as exc:
                log.warning("rollout of %s on %s failed: %s", kind, spec.name, exc)
                report.models.append(ModelResult(kind, spec.name, spec.kind, float("nan"), nbytes,
                                                 f"failed: rollout: {exc}", source))
        if telemetry_dir is not None:
            _write_columns(telemetry_dir / source, cols)
    return report


# ---------------------------------------------------------------------- controllers

@dataclass
class ControlAssets:
    """Trained models the controllers need, built once per suite."""

    arx: Predictor | None = None
    assist: Predictor | None = None
    twin: Predictor | None = None
    agents: dict = field(default_factory=dict)


def rl_config(cfg: Config, penalty: bool) -> RlConfig:
    r = cfg["rl"]
    kw = dict(offline_steps=r["offline_steps"], gamma=r["gamma"], replay_capacity=r["replay_capacity"],
              batch_size=r["batch_size"], target_sync=r["target_sync"], learning_rate=r["learning_rate"],
              hidden=r["hidden"], episode_steps=r["episode_steps"], eps_fraction=r["eps_fraction"],
              eps_end=r["eps_end"], seed=derive_seed(cfg["suite"]["seed"], 3, int(penalty)))
    return RlConfig.off_p(**kw) if penalty else RlConfig.off(**kw)


def train_agent(cfg: Config, where: str, penalty: bool, twin: Predictor | None = None,
                timing: Timing | None = None) -> DqnAgent:
    """DQN trained offline in the twin (``where="twin"``) or directly on the plant."""
    rc = rl_config(cfg, penalty)
    common = dict(ref_range=WIDE_RANGE, weights=rc.weights, episode_steps=rc.episode_steps)
    if where == "twin":
        env = TwinEnv(twin, noise_sd=cfg["rl"]["twin_noise"], t_amb=cfg["plant"]["ambient"], **common)
    else:
        env = PlantEnv(cfg.plant_config(derive_seed(cfg["suite"]["seed"], 4)), **common)
    t0 = time.perf_counter()
    agent = dqn_train(rc, env)
    if timing is not None:
        timing.add("train", f"dqn-{where}{'-P' if penalty else ''}", time.perf_counter() - t0)
    return agent


def llm_variant(cfg: Config, name: str) -> str:
    """Variant of an ``llm`` / ``llm-<variant>`` controller name."""
    return name[4:] if name.startswith("llm-") else cfg["llm"]["variant"]


def prepare_assets(cfg: Config, names, penalties, timing: Timing | None = None) -> ControlAssets:
    assets = ControlAssets()
    data = training_windows(cfg, WIDE_RANGE)
    assisted = any(n.startswith("llm") and llm_variant(cfg, n) == "prediction-assisted" for n in names)
    if "mpc" in names or (assisted and cfg["llm"]["assist"] == "arx"):
        assets.arx = train_model(cfg, "arx", WIDE_RANGE, data)[0]
    if assisted:
        kind = cfg["llm"]["assist"]
        assets.assist = assets.arx if kind == "arx" else train_model(cfg, kind, WIDE_RANGE, data)[0]
    if "dqn" in names:
        assets.twin = train_model(cfg, cfg["rl"]["twin"], WIDE_RANGE, data)[0]
    for name in names:
        if name.startswith("dqn"):
            where = "plant" if name == "dqn-plant" else "twin"
            for pen in penalties:
                assets.agents[(name, pen)] = train_agent(cfg, where, pen, assets.twin, timing)
    return assets


def build_controller(cfg: Config, name: str, penalty: bool, assets: ControlAssets):
    if name == "mpc":
        m = cfg["mpc"]
        preset = MpcConfig.penalty if penalty else MpcConfig.no_penalty
        return MpcController(preset(assets.arx, horizon=m["horizon"], max_iter=m["max_iter"], gtol=m["gtol"],
                                    discrete=m["discrete"], tie_break=m["tie_break"]))
    if name in ("dqn", "dqn-plant"):
        ctrl = DqnController(assets.agents[(name, penalty)], rl_config(cfg, penalty).weights)
        ctrl.name = name
        return ctrl
    if name.startswith("llm"):
        c = cfg["llm"]
        variant = llm_variant(cfg, name)
        if c["backend"] == "http":
            backend = HttpBackend(c["base_url"], c["model"], c["token_env"], c["timeout"])
        else:
            backend = MockBackend()
        ctrl = LlmController(LlmControllerConfig(
            variant=variant, backend=backend, temperature=c["temperature"], penalty_prompt=penalty,
            candidate_count=c["candidate_count"], assist_model=assets.assist, assist_steps=c["assist_steps"],
            history=HistoryStore() if variant == "history" else None))
        ctrl.name = f"llm-{variant}"
        return ctrl
    raise ValueError(f"unknown controller {name!r}")


def run_episode(cfg: Config, name: str, penalty: bool, seed: int, assets: ControlAssets,
                reference: str | None = None) -> EpisodeResult:
    ref = ReferenceProfile.named(reference or cfg["control"]["reference"])
    steps = cfg["control"]["steps"] or ref.default_steps
    plant = ThermalPlant(cfg.plant_config(derive_seed(seed, 5)))
    return run_closed_loop(build_controller(cfg, name, penalty, assets), plant, ref, steps)


def run_controller_suite(cfg: Config, names=None, penalties=(False, True), telemetry_dir: Path | None = None,
                         timing: Timing | None = None, assets: ControlAssets | None = None) -> ExperimentReport:
    """Each controller with and without penalty on the same plant seeds."""
    timing = timing if timing is not None else Timing()
    names = tuple(names or cfg["suite"]["controllers"])
    assets = assets or prepare_assets(cfg, names, penalties, timing)
    report = ExperimentReport(meta=_meta(cfg, "controllers"))
    reference = cfg["control"]["reference"]
    for name in names:
        label = f"llm-{llm_variant(cfg, name)}" if name == "llm" else name
        for pen in penalties:
            for seed in cfg["control"]["seeds"]:
                source = f"control_{label}_{'penalty' if pen else 'no-penalty'}_seed{seed}.csv"
                t0 = time.perf_counter()
                try:
                    ep = run_episode(cfg, name, pen, seed, assets)
                except Exception as exc:
                    log.warning("episode %s failed before start: %s", source, exc)
                    report.controllers.append(ControllerResult(label, reference, pen, seed, float("nan"),
                                                               float("nan"), 0.0, 0, f"failed: {exc}", ""))
                    continue
                timing.add("episode", source, time.perf_counter() - t0)
                if telemetry_dir is not None:
                    ep.save_telemetry(telemetry_dir / source)
                status = f"aborted: {ep.error}" if ep.aborted else "ok"
                report.controllers.append(ControllerResult(label, reference, pen, seed, ep.mae, ep.mae_true,
                                                           round(ep.heater_total, 10), ep.fan_total, status, source))
    return report


# ---------------------------------------------------------------------- helpers

def _meta(cfg: Config, what: str) -> dict[str, str]:
    return {"suite": what, "version": __version__, "config_sha256": cfg.digest(), "seed": str(cfg["suite"]["seed"]),
            "control_seeds": ",".join(map(str, cfg["control"]["seeds"]))}


def _write_columns(path: Path, cols: dict[str, np.ndarray]) -> None:
    names = list(cols)
    n = len(next(iter(cols.values())))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(n):
        w.writerow(["" if np.isnan(cols[c][i]) else repr(float(cols[c][i])) for c in names])
    path.write_text(buf.getvalue(), encoding="utf-8")


def merge(a: ExperimentReport, b: ExperimentReport) -> ExperimentReport:
    meta = {**a.meta, **b.meta}
    meta["suite"] = "+".join(dict.fromkeys([a.meta.get("suite", ""), b.meta.get("suite", "")]))
    return ExperimentReport(meta, a.models + b.models, a.controllers + b.controllers)

"""Acceptance criteria, one printed PASS/FAIL line per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they come; they
are also collected into an "acceptance" section of the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from thermotwin.config import Config
from thermotwin.control import MpcConfig
from thermotwin.control.mpc import mpc_step, stage_cost
from thermotwin.core import ControlInput, Trajectory, action_grid, make_windows
from thermotwin.harness import (
    Timing,
    make_run_dir,
    prepare_assets,
    run_controller_suite,
    run_episode,
    run_model_suite,
    write_run,
)
from thermotwin.integrate import IntegratorConfig, integrate
from thermotwin.models import ArxModel, HamRegressor, PbmModel, rollout
from thermotwin.models.pbm import pbm_step
from thermotwin.nnet import check_gradients, dense_net, lstm_net
from thermotwin.plant import TRAINING_RANGES, PlantConfig, ThermalPlant, training_trajectories

pytestmark = pytest.mark.slow

LINES: list[str] = []


def verdict(criterion: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    LINES.append(line)
    print("\n" + line, flush=True)
    return ok


@pytest.fixture(scope="module", autouse=True)
def _summary():
    yield
    print("\n==== acceptance summary ====")
    for line in LINES:
        print(line)


# ------------------------------------------------------------------ 1 integrator

def _decay_error(rel, abs_):
    return abs(integrate(lambda t, y: [-y[0]], (0.0, 1.0), [1.0], IntegratorConfig(rel, abs_))[0] - math.exp(-1.0))


def test_c1_integrator():
    t0 = time.perf_counter()
    err = _decay_error(1e-6, 1e-8)
    half = _decay_error(0.5e-6, 0.5e-8)
    seconds = time.perf_counter() - t0
    ratio = err / half
    ok = [verdict("1a", err < 1e-6, f"exponential-decay error {err:.3e} < 1e-6"),
          verdict("1b", ratio >= 4.0, f"halving tolerances improves error {ratio:.2f}x >= 4x"),
          verdict("1c", seconds < 1.0, f"runtime {seconds:.3f} s < 1 s")]
    assert all(ok)


# ------------------------------------------------------------------ 2 gradients

def test_c2_gradcheck():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        if trial % 2:
            net = dense_net(int(rng.integers(2, 6)), int(rng.integers(3, 9)), 1, 0.2, rng)
            X = rng.standard_normal((int(rng.integers(2, 6)), net.layers[0].params["W"].shape[0]))
        else:
            n_in = int(rng.integers(2, 5))
            net = lstm_net(n_in, int(rng.integers(2, 6)), 1, 0.2, rng, blocks=int(rng.integers(1, 3)))
            X = rng.standard_normal((int(rng.integers(2, 4)), int(rng.integers(2, 6)), n_in))
        worst = max(worst, check_gradients(net, X, rng.standard_normal(len(X))))
    seconds = time.perf_counter() - t0
    ok = [verdict("2a", worst < 1e-4, f"worst relative gradient error {worst:.2e} < 1e-4 over 100 nets"),
          verdict("2b", seconds < 30.0, f"runtime {seconds:.1f} s < 30 s")]
    assert all(ok)


# ------------------------------------------------------------------ 3 oracles

def test_c3a_plant_equals_pbm():
    rng = np.random.default_rng(1)
    grid = action_grid()
    plant = ThermalPlant(PlantConfig.ideal())
    plant.reset(25.0)
    T, worst = 25.0, 0.0
    for _ in range(100):
        u = grid[rng.integers(len(grid))] if plant.state.t_inside < 40 else ControlInput(0.0, 1)
        T = pbm_step(T, 22.0, u, plant.cfg.params)
        worst = max(worst, abs(plant.step(u).t_inside - T))
    assert verdict("3a", worst <= 1e-9, f"zero-mismatch plant vs PBM max gap {worst:.1e} K <= 1e-9 over 100 steps")


def test_c3b_zeroed_ham_equals_pbm():
    series = training_trajectories(TRAINING_RANGES[0], PlantConfig(), n_series=2, length=80, seed=5)
    X = np.concatenate([make_windows(t, 1).X for t in series])
    gap = float(np.max(np.abs(HamRegressor().zero_residual().predict(X) - PbmModel().predict(X))))
    assert verdict("3b", gap <= 1e-9, f"zeroed-residual HAM vs PBM max gap {gap:.1e} K <= 1e-9 on {len(X)} states")


def test_c3c_mpc_matches_brute_force():
    series = training_trajectories(TRAINING_RANGES[0], PlantConfig(), n_series=4, length=120, seed=7)
    data = [make_windows(t) for t in series]
    X = np.concatenate([d.X for d in data])
    arx = ArxModel().fit(X, np.concatenate([d.y for d in data]))
    rng = np.random.default_rng(3)
    grid = action_grid()
    matches = 0
    for i in rng.choice(len(X), 50, replace=False):
        window, ref = X[i].copy(), float(rng.uniform(24.0, 32.0))
        cfg = MpcConfig.penalty(arx, horizon=1) if i % 2 else MpcConfig.no_penalty(arx, horizon=1)
        costs = []
        for u in grid:
            w = window.copy()
            w[-1, 2:] = u.as_tuple()
            costs.append(stage_cost(ref - float(arx.predict(w[None])[0]), u, cfg.w_T, cfg.w_uf, cfg.w_uh))
        matches += mpc_step(cfg, window, ref).control == grid[int(np.argmin(costs))]
    assert verdict("3c", matches == 50, f"N=1 MPC matches 42-action brute force on {matches}/50 states")


# ------------------------------------------------------------------ 4 ARX

def test_c4_arx_recovery():
    truth = ArxModel.from_coefficients([0.55, 0.25, 0.1], [0.6, 0.15], [-0.35, -0.05], intercept=2.2)
    rng = np.random.default_rng(11)
    n = 500
    controls = [ControlInput(int(rng.integers(21)) * 0.05, int(rng.random() < 0.25)) for _ in range(n)]
    hist = np.array([[25.0, 22.0, *c.as_tuple()] for c in controls[:3]])
    temps = np.concatenate([hist[:, 0], rollout(truth, hist, controls[2:-1])])
    traj = Trajectory.from_arrays(60.0, temps, np.full(n, 22.0), [c.heater_duty for c in controls],
                                  [c.fan_on for c in controls])
    ds = make_windows(traj)
    fit = ArxModel(p=3, q=2, ridge=0.0).fit(ds.X, ds.y)
    err = max(float(np.max(np.abs(fit.coef_ - truth.coef_))), abs(fit.intercept_ - truth.intercept_))
    assert verdict("4", err <= 1e-8, f"max coefficient error {err:.1e} <= 1e-8")


# ------------------------------------------------------------------ 5 model suite

@pytest.fixture(scope="module")
def model_report():
    t0 = time.perf_counter()
    rep = run_model_suite(Config().validate())
    return rep, time.perf_counter() - t0


def test_c5_model_suite(model_report):
    rep, seconds = model_report
    agg = {m: (rep.aggregate(m, "interpolation"), rep.aggregate(m, "extrapolation")) for m in rep.model_names}
    table = ", ".join(f"{m} {i:.3f}/{e:.3f}" for m, (i, e) in agg.items())
    print(f"\ninterpolation/extrapolation aggregates: {table}")
    failed = [r for r in rep.models if r.status != "ok"]
    interp = {m: v[0] for m, v in agg.items()}
    ok = [
        verdict("5-status", not failed, f"{len(rep.models) - len(failed)}/{len(rep.models)} model rollouts completed"),
        verdict("5a", interp["pbm"] == max(interp.values()),
                f"PBM has the worst interpolation aggregate ({interp['pbm']:.3f})"),
        verdict("5b", interp["ham"] < interp["arx"] and interp["lstm"] < interp["arx"],
                f"HAM {interp['ham']:.3f} and LSTM {interp['lstm']:.3f} beat ARX {interp['arx']:.3f} on interpolation"),
        verdict("5c", agg["pbm"][0] == agg["pbm"][1],
                f"PBM interpolation aggregate {agg['pbm'][0]!r} equals extrapolation {agg['pbm'][1]!r}"),
        verdict("5d", all(agg[m][1] >= agg[m][0] for m in ("lstm", "ham", "arx")),
                "extrapolation >= interpolation for " + ", ".join(
                    f"{m} ({agg[m][1]:.3f} vs {agg[m][0]:.3f})" for m in ("lstm", "ham", "arx"))),
        verdict("5e", seconds < 15 * 60, f"full model suite runtime {seconds / 60:.1f} min < 15 min"),
    ]
    assert all(ok)


# ------------------------------------------------------------------ 6 MPC

def test_c6_mpc_tracking():
    cfg = Config().validate()
    rep = run_controller_suite(cfg, ["mpc"], (False, True))
    plain = {r.seed: r for r in rep.controller("mpc", False)}
    pen = {r.seed: r for r in rep.controller("mpc", True)}
    worst_plain = max(r.mae for r in plain.values())
    reduced = all(pen[s].actuation < plain[s].actuation for s in plain)
    worst_pen = max(r.mae for r in pen.values())
    pairs = "; ".join(f"seed {s}: {plain[s].actuation:.2f} -> {pen[s].actuation:.2f}" for s in plain)
    ok = [verdict("6a", worst_plain < 0.5, f"no-penalty staircase MAE {worst_plain:.3f} < 0.5 (worst seed)"),
          verdict("6b", reduced, f"penalty preset reduces total actuation on paired seeds ({pairs})"),
          verdict("6c", worst_pen <= 1.0, f"penalty preset MAE {worst_pen:.3f} <= 1.0 (worst seed)")]
    assert all(ok)


# ------------------------------------------------------------------ 7 sim-to-real

def test_c7_sim_to_real():
    cfg = Config().validate()
    t0 = time.perf_counter()
    assets = prepare_assets(cfg, ("dqn", "dqn-plant"), (False,))
    twin = [run_episode(cfg, "dqn", False, s, assets) for s in cfg["control"]["seeds"]]
    direct = [run_episode(cfg, "dqn-plant", False, s, assets) for s in cfg["control"]["seeds"]]
    seconds = time.perf_counter() - t0
    mae_twin = float(np.mean([e.mae for e in twin]))
    mae_direct = float(np.mean([e.mae for e in direct]))
    ok = [verdict("7a", mae_twin <= 2 * mae_direct,
                  f"twin-trained DQN MAE {mae_twin:.3f} <= 2 x plant-trained MAE {mae_direct:.3f}"),
          verdict("7b", seconds < 20 * 60, f"runtime {seconds / 60:.1f} min < 20 min")]
    assert all(ok)


# ------------------------------------------------------------------ 8 LLM

def test_c8_llm_mock(tmp_path):
    cfg = Config().validate()
    rep = run_controller_suite(cfg, ["llm-simple", "llm-prediction-assisted"], (False,), tmp_path)
    from thermotwin.control import read_telemetry

    rows = [read_telemetry(tmp_path / r.source) for r in rep.controllers]
    grid = {u.as_tuple() for u in action_grid()}
    complete = all(r.status == "ok" for r in rep.controllers) and all(len(t) == 240 for t in rows)
    valid = all((row["heater_duty"], row["fan_on"]) in grid for t in rows for row in t)
    logged = all(row["rationale"].strip() for t in rows for row in t)
    simple = float(np.mean([r.mae for r in rep.controller("llm-simple", False)]))
    assisted = float(np.mean([r.mae for r in rep.controller("llm-prediction-assisted", False)]))
    ok = [verdict("8a", complete, "every mock episode ran all 240 steps"),
          verdict("8b", valid, "every emitted control lies on the 0.05 x {0, 1} grid"),
          verdict("8c", logged, "a rationale is logged for every step"),
          verdict("8d", assisted <= simple, f"prediction-assisted MAE {assisted:.3f} <= simple MAE {simple:.3f}")]
    assert all(ok)


# ------------------------------------------------------------------ 9 determinism

def test_c9_determinism(tmp_path):
    cfg = Config()
    for k, v in {"suite.models": "arx, pbm, ham", "suite.scenarios": "1, 4", "data.n_series": "5",
                 "suite.controllers": "mpc, llm-simple, llm-prediction-assisted", "control.steps": "60"}.items():
        cfg.set(k, v)
    cfg.validate()
    blobs = []
    for k in range(2):
        run = make_run_dir(tmp_path, f"run{k}")
        from thermotwin.harness import merge

        models = run_model_suite(cfg, telemetry_dir=run / "telemetry", timing=Timing())
        ctrls = run_controller_suite(cfg, telemetry_dir=run / "telemetry", timing=Timing())
        write_run(run, cfg, merge(models, ctrls))
        blobs.append({str(p.relative_to(run)): p.read_bytes() for p in sorted(run.rglob("*"))
                      if p.is_file() and p.name != "timing.csv"})
    same = blobs[0] == blobs[1]
    assert verdict("9", same, f"re-run reproduces {len(blobs[0])} report and telemetry files byte for byte")

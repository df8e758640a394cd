import numpy as np
import pytest

from thermotwin.core import ControlInput, SanityBandError, ThermalState, action_grid
from thermotwin.models import PbmModel
from thermotwin.models.pbm import pbm_step
from thermotwin.plant import (
    SCENARIO_DIR,
    SCENARIO_RANGES,
    PlantConfig,
    ScenarioSpec,
    ThermalPlant,
    build_scenarios,
    decode_schedule,
    encode_schedule,
    generate_dataset,
    load_scenarios,
    PlantLatent,
    plant_step,
    run_schedule,
)


def _euler_plant(cfg, T, P, M, u, dt, n=6000):
    """Independent forward-Euler oracle of the plant air/heater/mass balance."""
    p = cfg.params
    cap = p.rho * p.volume * p.cp
    amb = cfg.ambient.mean
    flow = (cfg.fan_efficiency if u.fan_on else cfg.fan_leak_frac) * p.f_max
    h = dt / n
    for _ in range(n):
        dT = (P - (flow * p.rho * p.cp + cfg.wall_loss_coeff) * (T - amb) + cfg.mass_coupling * (M - T)) / cap
        dP = (u.heater_duty * p.h_max - P) / cfg.heater_lag_tau
        dM = cfg.mass_coupling * (T - M) / cfg.mass_capacity
        T, P, M = T + h * dT, P + h * dP, M + h * dM
    return T, P, M


def test_ideal_plant_equals_physics_model():
    cfg = PlantConfig.ideal()
    plant = ThermalPlant(cfg)
    plant.reset(25.0)
    rng = np.random.default_rng(0)
    grid = action_grid()
    T = 25.0
    for _ in range(100):
        u = grid[rng.integers(len(grid))]
        if plant.state.t_inside > 40:
            u = ControlInput(0.0, 1)
        T = pbm_step(T, 22.0, u, cfg.params)
        assert abs(plant.step(u).t_inside - T) < 1e-9


@pytest.mark.parametrize("u", [ControlInput(0.6, 0), ControlInput(0.3, 1), ControlInput(0.0, 0)])
def test_plant_step_matches_euler_oracle(u):
    cfg = PlantConfig()
    state, latent = plant_step(ThermalState(27.0, 22.0), u, PlantLatent(20.0, 26.0), 60.0, cfg)
    T, P, M = _euler_plant(cfg, 27.0, 20.0, 26.0, u, 60.0)
    assert abs(state.t_inside - T) < 1e-3
    assert abs(latent.power - P) < 1e-2
    assert abs(latent.mass_temp - M) < 1e-3


def test_bounded_steady_state():
    cfg = PlantConfig(wall_loss_coeff=5.0, fan_leak_frac=0.0, sensor_noise_sd=0.0)
    plant = ThermalPlant(cfg)
    plant.reset(22.0)
    for _ in range(400):
        plant.step(ControlInput(1.0, 0))
    assert plant.state.t_inside == pytest.approx(22.0 + 100.0 / 5.0, abs=1e-3)
    assert plant.latent.mass_temp == pytest.approx(plant.state.t_inside, abs=1e-3)


def test_heater_warms_and_fan_cools():
    plant = ThermalPlant(PlantConfig(sensor_noise_sd=0.0))
    plant.reset(25.0, heater_duty=0.0)
    temps = [plant.step(ControlInput(1.0, 0)).t_inside for _ in range(5)]
    assert all(b > a for a, b in zip([25.0] + temps, temps))
    plant.reset(30.0)
    cooled = [plant.step(ControlInput(0.0, 1)).t_inside for _ in range(5)]
    assert all(22.0 < b < a for a, b in zip([30.0] + cooled, cooled))


def test_settled_heater_holds_temperature():
    cfg = PlantConfig(sensor_noise_sd=0.0)
    p = cfg.params
    loss = cfg.wall_loss_coeff + cfg.fan_leak_frac * p.f_max * p.rho * p.cp
    T = 22.0 + 0.3 * p.h_max / loss
    plant = ThermalPlant(cfg)
    assert plant.settled_heater(T) == pytest.approx(0.3)
    plant.reset(T, heater_duty=0.3)
    for _ in range(10):
        plant.step(ControlInput(0.3, 0))
    assert plant.state.t_inside == pytest.approx(T, abs=1e-6)


def test_sensor_noise_statistics_and_reproducibility():
    cfg = PlantConfig(sensor_noise_sd=0.25, rng_seed=5)
    a, b = ThermalPlant(cfg), ThermalPlant(cfg)
    a.reset(25.0)
    b.reset(25.0)
    xs = np.array([a.measure().t_inside for _ in range(4000)])
    ys = np.array([b.measure().t_inside for _ in range(4000)])
    assert np.array_equal(xs, ys)
    assert abs(xs.mean() - 25.0) < 0.02 and abs(xs.std() - 0.25) < 0.02
    assert a.measure().t_ambient == 22.0


def test_sanity_band_aborts_runaway():
    plant = ThermalPlant(PlantConfig.ideal())
    plant.reset(70.0)
    with pytest.raises(SanityBandError):
        for _ in range(200):
            plant.step(ControlInput(1.0, 0))


def test_config_validation():
    with pytest.raises(ValueError):
        PlantConfig(fan_leak_frac=1.0)
    with pytest.raises(ValueError):
        PlantConfig(fan_efficiency=0.0)
    with pytest.raises(ValueError):
        plant_step(ThermalState(25, 22), ControlInput(0, 0), None, 0.0, PlantConfig())


def test_schedule_codec_round_trip():
    sched = decode_schedule("0.10:0:3, 0.20:1:1\n 0.00:0:2")
    assert len(sched) == 6
    assert decode_schedule(encode_schedule(sched)) == sched
    with pytest.raises(ValueError):
        decode_schedule("")


def test_shipped_scenarios():
    specs = load_scenarios()
    assert [s.name for s in specs] == [f"scenario-{i}" for i in range(1, 7)]
    assert [s.kind for s in specs] == ["interpolation"] * 3 + ["extrapolation"] * 3
    assert [(s.train_range, s.test_range) for s in specs] == list(SCENARIO_RANGES)
    assert all(len(s.input_schedule) == 212 for s in specs)
    for k in range(3):
        assert specs[k].input_schedule == specs[k + 3].input_schedule
    assert specs == build_scenarios()  # regenerating the shipped files is deterministic


def test_scenario_text_round_trip():
    spec = load_scenarios()[2]
    assert ScenarioSpec.from_text(spec.to_text()) == spec
    assert (SCENARIO_DIR / "scenario_3.ini").read_text() == spec.to_text()


def test_scenario_kind_is_checked():
    with pytest.raises(ValueError):
        ScenarioSpec("bad", (21.8, 29.7), (25.0, 33.3), "interpolation", (ControlInput(0, 0),))


@pytest.mark.parametrize("index", range(6))
def test_scenario_data_spans_its_test_range(index):
    spec = load_scenarios()[index]
    temps = generate_dataset(spec, PlantConfig()).temperatures
    lo, hi = spec.test_range
    assert lo - 1.0 <= temps.min() and temps.max() <= hi + 1.0


def test_interpolation_truth_stays_in_training_range():
    for spec in load_scenarios()[:3]:
        _, truth = run_schedule(spec.input_schedule, PlantConfig(), spec.start_temperature)
        assert spec.train_range[0] <= truth.min() and truth.max() <= spec.train_range[1]


def test_physics_model_predict_shape():
    X = np.tile([25.0, 22.0, 0.5, 0.0], (3, 1, 1))
    y = PbmModel().fit(X, np.zeros(3)).predict(X)
    assert y.shape == (3,) and np.all(y > 25.0)

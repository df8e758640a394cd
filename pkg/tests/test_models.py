import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from thermotwin.core import ControlInput, Trajectory, make_windows
from thermotwin.models import (
    ArxModel,
    HamRegressor,
    LstmRegressor,
    PbmModel,
    RankDeficiencyError,
    RolloutError,
    load_model,
    model_from_bytes,
    pbm_step,
    rollout,
    rollout_on,
    save_model,
)
from thermotwin.nnet import CheckpointError, checkpoint
from thermotwin.plant import PlantConfig, ThermalPlant


def _true_arx():
    return ArxModel.from_coefficients([0.6, 0.2, 0.1], [0.5, 0.2], [-0.4, 0.0], intercept=2.5)


def _arx_data(model, n=400, seed=0):
    rng = np.random.default_rng(seed)
    controls = [ControlInput(int(rng.integers(21)) * 0.05, int(rng.random() < 0.2)) for _ in range(n)]
    hist = np.array([[25.0, 22.0, c.heater_duty, c.fan_on] for c in controls[:10]])
    temps = rollout(model, hist, controls[9:-1])
    temps = np.concatenate([hist[:, 0], temps])
    return Trajectory.from_arrays(60.0, temps, np.full(n, 22.0), [c.heater_duty for c in controls],
                                  [c.fan_on for c in controls])


def test_arx_recovers_known_coefficients():
    truth = _true_arx()
    ds = make_windows(_arx_data(truth))
    fitted = ArxModel(p=3, q=2, ridge=0.0).fit(ds.X, ds.y)
    assert np.max(np.abs(fitted.coef_ - truth.coef_)) <= 1e-8
    assert abs(fitted.intercept_ - truth.intercept_) <= 1e-8


def test_arx_rank_deficiency():
    n = 60
    traj = Trajectory.from_arrays(60.0, np.full(n, 25.0), np.full(n, 22.0), np.zeros(n), np.zeros(n))
    ds = make_windows(traj)
    with pytest.raises(RankDeficiencyError):
        ArxModel(ridge=0.0).fit(ds.X, ds.y)
    assert np.allclose(ArxModel().fit(ds.X, ds.y).predict(ds.X), 25.0)


def test_arx_rejects_too_few_windows_and_bad_orders():
    ds = make_windows(_arx_data(_true_arx(), n=20))
    with pytest.raises(ValueError):
        ArxModel().fit(ds.X, ds.y)
    with pytest.raises(ValueError):
        ArxModel(p=0).fit(ds.X, ds.y)


def test_unfitted_models_raise():
    X = np.zeros((1, 10, 4))
    for model in (ArxModel(), LstmRegressor(), HamRegressor()):
        with pytest.raises(NotFittedError):
            model.predict(X)


def test_sklearn_params_round_trip():
    model = HamRegressor(hidden=8, dropout=0.1)
    assert clone(model).get_params() == model.get_params()
    assert LstmRegressor(lookback=5).get_params()["lookback"] == 5


def test_pbm_predict_matches_integrator():
    X = np.array([[[26.0, 22.0, 0.4, 1.0]], [[24.0, 22.0, 0.0, 0.0]]])
    y = PbmModel().predict(X)
    assert y[0] == pbm_step(26.0, 22.0, (0.4, 1), PbmModel().params_)
    assert y[1] == 24.0


def test_pbm_steady_state_with_fan():
    # heater 0.5 with the fan on settles at T_amb + H / (rho cp F)
    p = PbmModel().params_
    T = 22.0
    for _ in range(200):
        T = pbm_step(T, 22.0, (0.5, 1), p)
    assert T == pytest.approx(22.0 + 50.0 / (p.rho * p.cp * p.f_max), abs=1e-6)


def test_zeroed_ham_equals_pbm(small_split):
    trn, _ = small_split
    ham = HamRegressor(hidden=8).zero_residual()
    X = trn.X[:50, -1:, :]
    assert np.max(np.abs(ham.predict(X) - PbmModel().predict(X))) <= 1e-9


def test_ham_targets_close_the_step(small_split):
    trn, _ = small_split
    ham = HamRegressor()
    X, y = trn.X[:20, -1:, :], trn.y[:20]
    t_hat, r = ham.residual_targets(X, y)
    closed = ham._physics(X, r)
    assert np.max(np.abs(closed - y)) < 1e-5  # integrator tolerance


@pytest.mark.parametrize("scale", ["per_step", "closure"])
def test_ham_training_beats_physics_one_step(small_split, scale):
    trn, val = small_split
    ham = HamRegressor(hidden=16, epochs=60, target_scale=scale).fit(trn.X, trn.y, val.X, val.y)
    report = ham.validation_report_
    assert report["ham_one_step_mae"] < report["pbm_one_step_mae"]
    assert ham.history_.epochs_run <= 60


def test_ham_closure_prediction_adds_network_correction(small_split):
    trn, val = small_split
    ham = HamRegressor(hidden=8, epochs=3, target_scale="closure").fit(trn.X, trn.y, val.X, val.y)
    X = val.X[:20]
    t_hat = ham._physics(X)
    correction = ham.net_.forward(ham.x_scaler_.transform(ham.features(X, t_hat))).reshape(-1)
    assert np.max(np.abs(ham.predict(X) - (t_hat + correction))) < 1e-5  # integrator tolerance


def test_ham_rejects_unknown_target_scale(small_split):
    trn, val = small_split
    with pytest.raises(ValueError, match="target_scale"):
        HamRegressor(epochs=1, target_scale="bogus").fit(trn.X, trn.y, val.X, val.y)


def test_lstm_short_training_and_checkpoint(small_split, tmp_path):
    trn, val = small_split
    lstm = LstmRegressor(hidden=8, blocks=2, epochs=3).fit(trn.X[:200], trn.y[:200], val.X[:50], val.y[:50])
    assert lstm.history_.epochs_run == 3
    path = tmp_path / "lstm.ckpt"
    size = save_model(lstm, path)
    assert size == path.stat().st_size
    back = load_model(path)
    assert np.array_equal(back.predict(val.X[:20]), lstm.predict(val.X[:20]))
    assert back.history_.train_loss == lstm.history_.train_loss


@pytest.mark.parametrize("kind", ["arx", "pbm", "ham"])
def test_checkpoint_round_trip(kind, small_split, arx_model):
    trn, val = small_split
    model = {"arx": arx_model, "pbm": PbmModel(),
             "ham": HamRegressor(hidden=8, epochs=2).fit(trn.X[:100], trn.y[:100], val.X[:30], val.y[:30])}[kind]
    blob = model.to_checkpoint()
    back = model_from_bytes(blob)
    assert type(back) is type(model)
    assert np.array_equal(back.predict(val.X[:15]), model.predict(val.X[:15]))
    assert back.to_checkpoint() == blob


def test_checkpoint_rejects_unknown_kind():
    with pytest.raises(CheckpointError):
        model_from_bytes(checkpoint.dumps({"kind": "gru"}, {}))


def test_rollout_feeds_back_predictions(arx_model, small_split):
    _, val = small_split
    hist = val.X[0]
    sched = [ControlInput(0.3, 0)] * 5
    preds = rollout(arx_model, hist, sched)
    window = hist.copy()
    for k, u in enumerate(sched):
        window[-1, 2:] = u.as_tuple()
        assert preds[k] == pytest.approx(arx_model.predict(window[None])[0], abs=1e-12)
        window = np.roll(window, -1, axis=0)
        window[-1] = (preds[k], window[-2, 1], *u.as_tuple())


def test_rollout_aborts_outside_sanity_band():
    runaway = ArxModel.from_coefficients(np.r_[1.5, np.zeros(9)], np.zeros(10), np.zeros(10))
    hist = np.tile([30.0, 22.0, 0.0, 0.0], (10, 1))
    with pytest.raises(RolloutError) as info:
        rollout(runaway, hist, [ControlInput(0, 0)] * 10)
    assert info.value.step == 2


def test_rollout_on_ideal_plant_is_exact_for_pbm():
    plant = ThermalPlant(PlantConfig.ideal())
    plant.reset(25.0)
    rows = []
    for k in range(30):
        u = ControlInput(0.2, k % 5 == 0)
        rows.append((plant.state, u))
        plant.step(u)
    traj = Trajectory(60.0, tuple(rows))
    pred, meas = rollout_on(PbmModel(), traj)
    assert np.max(np.abs(pred - meas)) < 1e-9

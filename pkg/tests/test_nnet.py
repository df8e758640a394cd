import numpy as np
import pytest

from thermotwin.nnet import (
    LSTM,
    Adam,
    CheckpointError,
    Dropout,
    Linear,
    Sequential,
    TrainConfig,
    TrainingError,
    build_from_spec,
    check_gradients,
    dense_net,
    lstm_net,
    mse_loss,
    sigmoid,
    train,
)
from thermotwin.nnet import checkpoint


def test_sigmoid_is_stable_at_extremes():
    x = np.array([-1000.0, -30.0, 0.0, 30.0, 1000.0])
    y = sigmoid(x)
    assert np.all(np.isfinite(y))
    assert y[0] == 0.0 and y[2] == 0.5 and y[-1] == 1.0


def test_mse_loss_and_gradient():
    loss, grad = mse_loss(np.array([[1.0], [3.0]]), np.array([0.0, 1.0]))
    assert loss == pytest.approx(2.5)
    assert np.allclose(grad, [[1.0], [2.0]])


def test_dense_gradients():
    rng = np.random.default_rng(0)
    net = dense_net(4, 8, 1, 0.2, rng)
    assert check_gradients(net, rng.standard_normal((6, 4)), rng.standard_normal(6)) < 1e-4


def test_lstm_gradients():
    rng = np.random.default_rng(1)
    net = lstm_net(4, 5, 1, 0.2, rng, blocks=2)
    assert check_gradients(net, rng.standard_normal((3, 4, 4)), rng.standard_normal(3)) < 1e-4


def test_lstm_shapes_and_state():
    rng = np.random.default_rng(2)
    layer = LSTM(3, 7, rng)
    out = layer.forward(rng.standard_normal((2, 5, 3)))
    assert out.shape == (2, 5, 7)
    assert np.all(np.abs(out) < 1)


def test_dropout_modes():
    d = Dropout(0.5, np.random.default_rng(0))
    x = np.ones((1000, 4))
    assert d.forward(x) is x  # identity in evaluation mode
    d.training = True
    y = d.forward(x)
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.1
    with pytest.raises(ValueError):
        Dropout(1.0, np.random.default_rng(0))


def test_adam_minimizes_quadratic():
    w = np.array([3.0, -2.0])
    opt = Adam([w], 0.1)
    for _ in range(500):
        opt.step([2 * w])
    assert np.allclose(w, 0.0, atol=1e-2)


def test_training_learns_linear_map_and_restores_best():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((400, 2))
    y = X @ np.array([1.5, -0.5]) + 0.2
    net = dense_net(2, 16, 1, 0.0, np.random.default_rng(0))
    hist = train(net, X[:300], y[:300], X[300:], y[300:], TrainConfig(epochs=300, batch_size=32, patience=20,
                                                                       learning_rate=3e-3, min_delta=0.0))
    assert min(hist.val_loss) < 0.01
    from thermotwin.nnet import evaluate

    assert evaluate(net, X[300:], y[300:]) == pytest.approx(min(hist.val_loss))


def test_early_stopping_with_patience():
    rng = np.random.default_rng(4)
    X, y = rng.standard_normal((50, 2)), rng.standard_normal(50)
    net = dense_net(2, 4, 1, 0.0, rng)
    hist = train(net, X, y, X, y, TrainConfig(epochs=1000, patience=3, min_delta=1e3))
    assert hist.stopped_early and hist.epochs_run == 4  # the first epoch always improves on inf


def test_training_rejects_empty_and_diverging():
    net = dense_net(2, 4, 1, 0.0)
    with pytest.raises(TrainingError):
        train(net, np.zeros((0, 2)), np.zeros(0), np.zeros((1, 2)), np.zeros(1), TrainConfig())
    X = np.ones((8, 2))
    with pytest.raises(TrainingError), np.errstate(over="ignore", invalid="ignore"):
        train(net, X, np.full(8, 1e300), X, np.ones(8), TrainConfig(epochs=5))


def test_training_is_seeded():
    rng = np.random.default_rng(5)
    X, y = rng.standard_normal((64, 3)), rng.standard_normal(64)
    states = []
    for _ in range(2):
        net = dense_net(3, 8, 1, 0.2, np.random.default_rng(9))
        train(net, X, y, X, y, TrainConfig(epochs=5, rng_seed=7))
        states.append(net.get_state())
    assert all(np.array_equal(states[0][k], states[1][k]) for k in states[0])


def test_spec_rebuild_and_state_round_trip():
    net = lstm_net(4, 6, 1, 0.2, np.random.default_rng(0))
    clone = build_from_spec(net.spec(), np.random.default_rng(1))
    clone.set_state(net.get_state())
    x = np.random.default_rng(2).standard_normal((2, 10, 4))
    assert np.array_equal(net.eval().forward(x), clone.eval().forward(x))
    with pytest.raises(ValueError):
        build_from_spec([{"type": "Conv"}], np.random.default_rng(0))
    with pytest.raises(ValueError):
        Sequential([Linear(2, 3, np.random.default_rng(0))]).set_state({"0.W": np.zeros((9, 9)), "0.b": np.zeros(3)})


def test_checkpoint_round_trip_and_version():
    blob = checkpoint.dumps({"kind": "x", "n": 3}, {"w": np.arange(4.0)})
    meta, arrays = checkpoint.loads(blob)
    assert meta == {"format_version": checkpoint.FORMAT_VERSION, "kind": "x", "n": 3}
    assert np.array_equal(arrays["w"], np.arange(4.0))
    assert checkpoint.dumps({"kind": "x", "n": 3}, {"w": np.arange(4.0)}) == blob
    with pytest.raises(CheckpointError):
        checkpoint.dumps({}, {"__meta__": np.zeros(1)})
    import io

    buf = io.BytesIO()
    np.savez(buf, w=np.zeros(1))
    with pytest.raises(CheckpointError):
        checkpoint.loads(buf.getvalue())

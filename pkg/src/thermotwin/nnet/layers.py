"""Layers with explicit forward/backward passes.

Every layer keeps the tensors its backward pass needs from the most recent
forward call, so one ``forward`` must precede each ``backward``.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    params: dict
    grads: dict

    def __init__(self):
        self.params, self.grads = {}, {}
        self.training = False

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def config(self) -> dict:
        return {}


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Layer):
    """Affine map over the last axis; leading axes are batch/time."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params["W"] = _uniform(rng, n_in, (n_in, n_out))
        self.params["b"] = _uniform(rng, n_in, (n_out,))
        self.zero_grad()

    def forward(self, x):
        if x.shape[-1] != self.n_in:
            raise ValueError(f"Linear expects last dimension {self.n_in}, got {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        x2 = self._x.reshape(-1, self.n_in)
        d2 = dout.reshape(-1, self.n_out)
        self.grads["W"] += x2.T @ d2
        self.grads["b"] += d2.sum(axis=0)
        return dout @ self.params["W"].T

    def config(self):
        return {"n_in": self.n_in, "n_out": self.n_out}


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class Dropout(Layer):
    """Inverted dropout; the identity outside training mode."""

    def __init__(self, p: float, rng: np.random.Generator):
        super().__init__()
        if not 0 <= p < 1:
            raise ValueError("dropout probability must be in [0, 1)")
        self.p = p
        self.rng = rng

    def forward(self, x):
        if not self.training or self.p == 0:
            self._mask = None
            return x
        self._mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask

    def config(self):
        return {"p": self.p}


class LastStep(Layer):
    """Select the final time step of a ``(batch, time, features)`` sequence."""

    def forward(self, x):
        self._shape = x.shape
        return x[:, -1, :]

    def backward(self, dout):
        dx = np.zeros(self._shape)
        dx[:, -1, :] = dout
        return dx


class LSTM(Layer):
    """Single LSTM layer over ``(batch, time, n_in)`` inputs returning all hidden states.

    ``W`` stacks the forget, input, candidate and output gate weights (in
    that order) acting on the concatenation ``[h_{t-1}, x_t]``.
    """

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.n_in, self.hidden = n_in, hidden
        self.params["W"] = _uniform(rng, hidden, (hidden + n_in, 4 * hidden))
        self.params["b"] = _uniform(rng, hidden, (4 * hidden,))
        self.zero_grad()

    def gate_weights(self):
        """``{name: (W_gate, b_gate)}`` with ``W_gate`` shaped ``(hidden, hidden + n_in)``."""
        H = self.hidden
        W, b = self.params["W"], self.params["b"]
        return {g: (W[:, k * H:(k + 1) * H].T, b[k * H:(k + 1) * H]) for k, g in enumerate("fico")}

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ValueError(f"LSTM expects (batch, time, {self.n_in}) input, got {x.shape}")
        B, T, _ = x.shape
        if T == 0:
            raise ValueError("LSTM needs a non-empty sequence")
        H = self.hidden
        W, b = self.params["W"], self.params["b"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        cache = []
        for t in range(T):
            z = np.concatenate([h, x[:, t, :]], axis=1)
            a = z @ W + b
            f = sigmoid(a[:, :H])
            i = sigmoid(a[:, H:2 * H])
            g = np.tanh(a[:, 2 * H:3 * H])
            o = sigmoid(a[:, 3 * H:])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t, :] = h
            cache.append((z, f, i, g, o, c_prev, tc))
        self._cache = cache
        self._cells = c
        return hs

    def backward(self, dhs):
        H = self.hidden
        W = self.params["W"]
        B, T, _ = dhs.shape
        dx = np.empty((B, T, self.n_in))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        dW = self.grads["W"]
        db = self.grads["b"]
        da = np.empty((B, 4 * H))
        for t in reversed(range(T)):
            z, f, i, g, o, c_prev, tc = self._cache[t]
            dh = dhs[:, t, :] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            da[:, :H] = dc * c_prev * f * (1.0 - f)
            da[:, H:2 * H] = dc * g * i * (1.0 - i)
            da[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
            da[:, 3 * H:] = dh * tc * o * (1.0 - o)
            dW += z.T @ da
            db += da.sum(axis=0)
            dz = da @ W.T
            dh_next = dz[:, :H]
            dx[:, t, :] = dz[:, H:]
            dc_next = dc * f
        return dx

    def config(self):
        return {"n_in": self.n_in, "hidden": self.hidden}


class Sequential:
    """Ordered stack of layers."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def train(self, mode: bool = True):
        for layer in self.layers:
            layer.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self):
        """``(layer_index, name, array)`` for every trainable tensor."""
        return [(k, name, arr) for k, layer in enumerate(self.layers) for name, arr in layer.params.items()]

    def gradients(self):
        return [layer.grads[name] for layer in self.layers for name in layer.params]

    def n_params(self) -> int:
        return sum(a.size for _, _, a in self.parameters())

    def get_state(self) -> dict[str, np.ndarray]:
        return {f"{k}.{name}": arr.copy() for k, name, arr in self.parameters()}

    def set_state(self, state: dict[str, np.ndarray]):
        for k, name, arr in self.parameters():
            new = state[f"{k}.{name}"]
            if new.shape != arr.shape:
                raise ValueError(f"shape mismatch for {k}.{name}: {new.shape} vs {arr.shape}")
            arr[...] = new

    def spec(self) -> list[dict]:
        return [{"type": type(layer).__name__, **layer.config()} for layer in self.layers]


def mse_loss(pred, target):
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float).reshape(pred.shape)
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def build_from_spec(spec: list[dict], rng: np.random.Generator) -> Sequential:
    layers = []
    for entry in spec:
        kind = entry["type"]
        if kind == "Linear":
            layers.append(Linear(entry["n_in"], entry["n_out"], rng))
        elif kind == "LSTM":
            layers.append(LSTM(entry["n_in"], entry["hidden"], rng))
        elif kind == "Dropout":
            layers.append(Dropout(entry["p"], rng))
        elif kind == "ReLU":
            layers.append(ReLU())
        elif kind == "LastStep":
            layers.append(LastStep())
        else:
            raise ValueError(f"unknown layer type {kind!r}")
    return Sequential(layers)


def lstm_net(n_features: int, hidden: int = 64, n_out: int = 1, dropout: float = 0.2,
             rng: np.random.Generator | None = None, blocks: int = 3) -> Sequential:
    """Stacked LSTM -> Linear -> Dropout blocks; the last block reads the final step."""
    rng = rng or np.random.default_rng(0)
    layers, width = [], n_features
    for k in range(blocks):
        layers.append(LSTM(width, hidden, rng))
        if k < blocks - 1:
            layers += [Linear(hidden, hidden, rng), Dropout(dropout, rng)]
            width = hidden
        else:
            layers += [LastStep(), Linear(hidden, n_out, rng)]
    return Sequential(layers)


def dense_net(n_in: int, hidden: int = 64, n_out: int = 1, dropout: float = 0.2,
              rng: np.random.Generator | None = None) -> Sequential:
    """Linear -> ReLU -> Dropout -> Linear -> ReLU -> Dropout -> Linear."""
    rng = rng or np.random.default_rng(0)
    return Sequential([
        Linear(n_in, hidden, rng), ReLU(), Dropout(dropout, rng),
        Linear(hidden, hidden, rng), ReLU(), Dropout(dropout, rng),
        Linear(hidden, n_out, rng),
    ])

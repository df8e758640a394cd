"""Central finite-difference check of analytic gradients."""

from __future__ import annotations

import numpy as np

from .layers import Sequential, mse_loss


def loss_and_grads(net: Sequential, X, y):
    net.zero_grad()
    pred = net.forward(X)
    loss, grad = mse_loss(pred, y)
    net.backward(grad)
    return loss, [g.copy() for g in net.gradients()]


def check_gradients(net: Sequential, X, y, h: float = 1e-5, max_entries: int | None = None,
                    rng: np.random.Generator | None = None, floor: float = 1e-6) -> float:
    """Largest relative error between backprop and central differences.

    The relative error of an entry is ``|a - n| / max(|a| + |n|, floor)``;
    the floor keeps round-off in the difference quotient (about
    ``1e-16 * loss / h``) from dominating entries that are almost zero.
    ``max_entries`` limits how many entries per tensor are probed.
    The net must be in evaluation mode (deterministic forward pass).
    """
    net.eval()
    _, grads = loss_and_grads(net, X, y)
    worst = 0.0
    for (_, _, arr), g in zip(net.parameters(), grads):
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
        for j in idx:
            old = flat[j]
            flat[j] = old + h
            lp = mse_loss(net.forward(X), y)[0]
            flat[j] = old - h
            lm = mse_loss(net.forward(X), y)[0]
            flat[j] = old
            num = (lp - lm) / (2 * h)
            ana = g.reshape(-1)[j]
            worst = max(worst, abs(ana - num) / max(abs(ana) + abs(num), floor))
    return worst

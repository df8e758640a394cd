"""Receding-horizon control on the ARX model.

The ARX prediction over the horizon is affine in the stacked inputs
``U = (u_h,0, u_f,0, ..., u_h,N-1, u_f,N-1)``, so the cost

    J(U) = sum_t w_T (x_ref - x_{t+1})^2 + w_uf u_f,t^2 + w_uh u_h,t^2

is a box-constrained quadratic. It is relaxed to ``U in [0, 1]^{2N}`` and
minimized by L-BFGS-B; the first input is then mapped to the admissible grid.

With zero input weights many relaxed plans share the optimal cost, for
example a half-on fan offset by extra heat. Rounding such a plan makes the
fan chatter, so the relaxed solve adds ``tie_break`` to both input weights.
Scores of the admissible candidates use the configured weights only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..core import ControlInput, action_grid, quantize_control
from ..models.arx import ArxModel
from .base import Controller, Decision, Observation

DISCRETE_MODES = ("enumerate", "round")


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights and solver settings.

    ``discrete="enumerate"`` scores all 42 admissible first inputs with the
    relaxed tail held fixed and keeps the cheapest (ties go to the lowest
    action index); ``"round"`` rounds the relaxed first input instead.
    """

    model: ArxModel | None = field(default=None, compare=False)
    horizon: int = 10
    w_T: float = 10.0
    w_uf: float = 0.0
    w_uh: float = 0.0
    max_iter: int = 200
    gtol: float = 1e-9
    discrete: str = "enumerate"
    tie_break: float = 1e-4

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if min(self.w_T, self.w_uf, self.w_uh, self.tie_break) < 0:
            raise ValueError("cost weights must be >= 0")
        if self.discrete not in DISCRETE_MODES:
            raise ValueError(f"discrete must be one of {DISCRETE_MODES}, got {self.discrete!r}")

    @classmethod
    def no_penalty(cls, model=None, **kw) -> "MpcConfig":
        return cls(model=model, **{"w_T": 10.0, "w_uf": 0.0, "w_uh": 0.0, **kw})

    @classmethod
    def penalty(cls, model=None, **kw) -> "MpcConfig":
        return cls(model=model, **{"w_T": 10.0, "w_uf": 1.0, "w_uh": 1.0, **kw})


@dataclass
class MpcResult:
    control: ControlInput
    cost: float
    relaxed: np.ndarray
    converged: bool
    iterations: int


def stage_cost(error: float, u: ControlInput | tuple, w_T: float, w_uf: float, w_uh: float) -> float:
    """``w_T e^2 + w_uf u_f^2 + w_uh u_h^2`` for one step."""
    heater, fan = u.as_tuple() if isinstance(u, ControlInput) else u
    return w_T * error * error + w_uf * fan * fan + w_uh * heater * heater


def affine_response(model: ArxModel, window: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """``(f, G)`` with predicted temperatures ``x = f + G U`` over the horizon.

    ``window``'s last row is the current state; its control entries are ignored.
    """
    p, q = model.p, model.q
    n = 2 * horizon
    temps = [np.concatenate([[v], np.zeros(n)]) for v in window[:, 0]]
    heater = [np.concatenate([[v], np.zeros(n)]) for v in window[:-1, 2]]
    fan = [np.concatenate([[v], np.zeros(n)]) for v in window[:-1, 3]]
    const = np.zeros(n + 1)
    const[0] = model.intercept_
    out = np.empty((horizon, n + 1))
    for t in range(horizon):
        uh = np.zeros(n + 1)
        uh[1 + 2 * t] = 1.0
        uf = np.zeros(n + 1)
        uf[2 + 2 * t] = 1.0
        heater.append(uh)
        fan.append(uf)
        x = const.copy()
        for i in range(p):
            x += model.a_[i] * temps[-1 - i]
        for j in range(q):
            x += model.b_h_[j] * heater[-1 - j] + model.b_f_[j] * fan[-1 - j]
        temps.append(x)
        out[t] = x
    return out[:, 0], out[:, 1:]


class _Quadratic:
    def __init__(self, f, G, x_ref, cfg: MpcConfig, extra: float = 0.0):
        self.resid0 = x_ref - f
        self.G = G
        self.w_T = cfg.w_T
        n = G.shape[1]
        self.r = np.tile([cfg.w_uh + extra, cfg.w_uf + extra], n // 2)

    def __call__(self, U):
        e = self.resid0 - self.G @ U
        value = self.w_T * float(e @ e) + float(self.r @ (U * U))
        grad = -2.0 * self.w_T * (self.G.T @ e) + 2.0 * self.r * U
        return value, grad

    def batch(self, Us: np.ndarray) -> np.ndarray:
        e = self.resid0[None, :] - Us @ self.G.T
        return self.w_T * np.sum(e * e, axis=1) + (Us * Us) @ self.r


def mpc_step(cfg: MpcConfig, history, x_ref, warm_start: np.ndarray | None = None) -> MpcResult:
    """Solve the horizon problem from ``history`` and return the first admissible input.

    ``x_ref`` may be a number or a sequence; only its first value is used and
    held over the horizon.
    """
    model = cfg.model
    if model is None:
        raise ValueError("MpcConfig.model is required")
    model._check_fitted()
    window = np.asarray(history, dtype=float)
    if window.ndim != 2 or window.shape[1] != 4:
        raise ValueError(f"history must be shaped (n, 4), got {window.shape}")
    if len(window) < model.lookback:
        raise ValueError(f"history has {len(window)} rows, the ARX model needs {model.lookback}")
    if not np.all(np.isfinite(window)):
        raise ValueError("history contains non-finite values")
    ref = float(np.atleast_1d(x_ref)[0])
    N = cfg.horizon
    f, G = affine_response(model, window[-model.lookback:], N)
    problem = _Quadratic(f, G, np.full(N, ref), cfg)
    relaxed = _Quadratic(f, G, np.full(N, ref), cfg, cfg.tie_break)
    x0 = np.full(2 * N, 0.5) if warm_start is None else np.clip(np.asarray(warm_start, dtype=float), 0.0, 1.0)
    res = minimize(relaxed, x0, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * (2 * N),
                   options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "ftol": 1e-15})
    # on non-convergence L-BFGS-B still returns its best iterate
    U = np.clip(res.x, 0.0, 1.0)
    if cfg.discrete == "round":
        u = quantize_control(U[0], U[1])
        cand = U.copy()
        cand[:2] = u.as_tuple()
        cost = float(problem.batch(cand[None])[0])
    else:
        grid = action_grid()
        cands = np.repeat(U[None], len(grid), axis=0)
        cands[:, :2] = [c.as_tuple() for c in grid]
        costs = problem.batch(cands)
        best = int(np.argmin(costs))
        u, cost = grid[best], float(costs[best])
    return MpcResult(u, cost, U, bool(res.success), int(res.nit))


class MpcController(Controller):
    """Receding-horizon controller with a shifted warm start."""

    name = "mpc"

    def __init__(self, cfg: MpcConfig):
        if cfg.model is None:
            raise ValueError("MpcConfig.model is required")
        self.cfg = cfg
        self._warm = None

    def reset(self) -> None:
        self._warm = None

    def act(self, obs: Observation) -> Decision:
        res = mpc_step(self.cfg, obs.window(self.cfg.model.lookback), obs.reference, self._warm)
        self._warm = np.concatenate([res.relaxed[2:], res.relaxed[-2:]])
        note = "" if res.converged else "optimizer did not converge; best iterate used"
        return Decision(res.control, res.cost, note, res.converged)


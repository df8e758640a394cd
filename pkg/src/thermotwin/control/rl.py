"""Deep Q-learning over the 42 admissible controls.

Environments are either the mismatched plant or a twin whose transitions
come from a trained predictor. Observations fed to the Q-network are
``(e / 5, (T - 25) / 10, (T_amb - 22) / 5, u_h,prev, u_f,prev)`` with
``e = T - T_ref``.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..core import ControlInput, ThermalState, action_grid
from ..models.base import Predictor
from ..nnet import Adam, Sequential, dense_net
from ..nnet.layers import build_from_spec
from ..plant import PlantConfig, ThermalPlant
from .base import Controller, Decision, Observation

log = logging.getLogger(__name__)

ACTIONS = tuple(action_grid())
N_OBS = 5


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RewardWeights:
    """Penalty weights: squared error, absolute error, fan use, heater use."""

    lam2: float = 0.5
    lam1: float = 1.0
    lam0f: float = 0.5
    lam0h: float = 0.1

    def __post_init__(self):
        if min(self.lam2, self.lam1, self.lam0f, self.lam0h) < 0:
            raise ValueError("reward weights must be >= 0")


def reward(error: float, u: ControlInput | tuple, w: RewardWeights) -> float:
    """``-lam2 e^2 - lam1 |e| - lam0f |u_f| - lam0h |u_h|``."""
    heater, fan = u.as_tuple() if isinstance(u, ControlInput) else u
    return -w.lam2 * error * error - w.lam1 * abs(error) - w.lam0f * abs(fan) - w.lam0h * abs(heater)


@dataclass(frozen=True)
class RlConfig:
    weights: RewardWeights = field(default_factory=RewardWeights)
    gamma: float = 0.99
    offline_steps: int = 100_000
    online_steps: int = 0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.3
    replay_capacity: int = 50_000
    batch_size: int = 64
    target_sync: int = 1000
    learning_rate: float = 1e-3
    hidden: int = 64
    learning_starts: int = 1000
    train_every: int = 1
    episode_steps: int = 240
    reward_scale: float = 10.0
    q_limit: float = 1e6
    eval_every: int = 10_000
    eval_episodes: int = 2
    plateau_evals: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if min(self.offline_steps, self.batch_size, self.target_sync, self.episode_steps, self.train_every) < 1:
            raise ValueError("step counts must be >= 1")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must hold at least one batch")
        if not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")

    @classmethod
    def off_p(cls, **kw) -> "RlConfig":
        """Offline training with actuation penalties."""
        return cls(**{"weights": RewardWeights(0.5, 1.0, 0.5, 0.1), **kw})

    @classmethod
    def off(cls, **kw) -> "RlConfig":
        """Offline training without actuation penalties."""
        return cls(**{"weights": RewardWeights(0.5, 1.0, 0.0, 0.0), **kw})

    def epsilon(self, step: int) -> float:
        span = max(1.0, self.eps_fraction * self.offline_steps)
        return self.eps_start + (self.eps_end - self.eps_start) * min(step / span, 1.0)


def encode(t_inside: float, t_ref: float, t_amb: float, last: ControlInput) -> np.ndarray:
    return np.array([(t_inside - t_ref) / 5.0, (t_inside - 25.0) / 10.0, (t_amb - 22.0) / 5.0,
                     last.heater_duty, float(last.fan_on)])


# ---------------------------------------------------------------------- environments

class ThermalEnv:
    """Episodic tracking task: constant reference per episode, random start.

    Subclasses implement ``_start`` and ``_advance``.
    """

    def __init__(self, ref_range=(21.8, 36.9), weights: RewardWeights = RewardWeights(),
                 episode_steps: int = 240, t_amb: float = 22.0):
        self.ref_range = tuple(ref_range)
        self.weights = weights
        self.episode_steps = episode_steps
        self.t_amb = t_amb
        self.rng = np.random.default_rng(0)

    def seed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def reset(self, reference: float | None = None, t_inside: float | None = None) -> np.ndarray:
        lo, hi = self.ref_range
        self.reference = float(self.rng.uniform(lo, hi)) if reference is None else float(reference)
        start = float(self.rng.uniform(lo, hi)) if t_inside is None else float(t_inside)
        self.k = 0
        self.last = ControlInput(0.0, 0)
        self.measured = self._start(start)
        return self.observe()

    def observe(self) -> np.ndarray:
        return encode(self.measured, self.reference, self.t_amb, self.last)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        u = ACTIONS[action]
        self.measured = self._advance(u)
        self.last = u
        self.k += 1
        r = reward(self.measured - self.reference, u, self.weights)
        return self.observe(), r, self.k >= self.episode_steps

    def _start(self, t_inside: float) -> float:
        raise NotImplementedError

    def _advance(self, u: ControlInput) -> float:
        raise NotImplementedError


class PlantEnv(ThermalEnv):
    """Episodes on the mismatched plant, observed through the noisy sensor."""

    def __init__(self, cfg: PlantConfig | None = None, **kw):
        super().__init__(**kw)
        self.cfg = cfg or PlantConfig()
        self.t_amb = self.cfg.ambient.mean
        self.plant = ThermalPlant(self.cfg)

    def _start(self, t_inside: float) -> float:
        self.plant.cfg = self.cfg.with_seed(int(self.rng.integers(2**31)))
        self.plant.reset(t_inside)
        return self.plant.measure().t_inside

    def _advance(self, u: ControlInput) -> float:
        self.plant.step(u)
        return self.plant.measure().t_inside


class TwinEnv(ThermalEnv):
    """Episodes inside a predictor-backed twin.

    The predicted temperature is the twin's state; observations add
    Gaussian sensor noise of ``noise_sd``. The state is clamped to the
    reference range widened by ``margin`` so the twin is never queried far
    outside its training data.
    """

    def __init__(self, model: Predictor, noise_sd: float = 0.25, margin: float = 5.0, **kw):
        super().__init__(**kw)
        self.model = model
        self.noise_sd = noise_sd
        self.margin = margin

    def _observe_noisy(self) -> float:
        return self.state + self.noise_sd * float(self.rng.standard_normal()) if self.noise_sd else self.state

    def _start(self, t_inside: float) -> float:
        self.state = t_inside
        L = self.model.lookback
        self.window = np.tile([t_inside, self.t_amb, 0.0, 0.0], (L, 1))
        return self._observe_noisy()

    def _advance(self, u: ControlInput) -> float:
        self.window[-1, 2:] = u.as_tuple()
        nxt = float(self.model.predict(self.window[None])[0])
        lo, hi = self.ref_range
        if not math.isfinite(nxt):
            raise DivergenceError(f"twin prediction became {nxt}")
        nxt = min(max(nxt, lo - self.margin), hi + self.margin)
        self.window = np.roll(self.window, -1, axis=0)
        self.window[-1] = (nxt, self.t_amb, 0.0, 0.0)
        self.state = nxt
        return self._observe_noisy()


# ---------------------------------------------------------------------- agent

class ReplayBuffer:
    def __init__(self, capacity: int, n_obs: int = N_OBS):
        self.obs = np.zeros((capacity, n_obs))
        self.next_obs = np.zeros((capacity, n_obs))
        self.action = np.zeros(capacity, dtype=np.int64)
        self.reward = np.zeros(capacity)
        self.done = np.zeros(capacity)
        self.capacity = capacity
        self.size = 0
        self._i = 0

    def add(self, o, a, r, o2, done):
        i = self._i
        self.obs[i], self.action[i], self.reward[i], self.next_obs[i], self.done[i] = o, a, r, o2, done
        self._i = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int):
        idx = rng.integers(0, self.size, size=batch)
        return self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.done[idx]


@dataclass
class DqnAgent:
    """Greedy policy over a Q-network; ties go to the lowest action index."""

    net: Sequential
    history: dict = field(default_factory=lambda: {"episode_return": [], "eval_return": []})

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        self.net.eval()
        return self.net.forward(np.atleast_2d(obs))

    def greedy(self, obs: np.ndarray) -> int:
        return int(np.argmax(self.q_values(obs)[0]))

    def get_state(self) -> dict:
        return {"spec": self.net.spec(), "state": self.net.get_state(), "history": self.history}

    @classmethod
    def from_state(cls, state: dict) -> "DqnAgent":
        net = build_from_spec(state["spec"], np.random.default_rng(0))
        net.set_state(state["state"])
        return cls(net, state.get("history", {"episode_return": [], "eval_return": []}))


def _td_update(net, target, opt, batch, cfg: RlConfig):
    o, a, r, o2, d = batch
    target.eval()
    q_next = target.forward(o2).max(axis=1)
    y = r / cfg.reward_scale + cfg.gamma * (1.0 - d) * q_next
    net.train()
    net.zero_grad()
    q = net.forward(o)
    if not np.all(np.isfinite(q)) or np.max(np.abs(q)) > cfg.q_limit:
        raise DivergenceError(f"Q-values diverged (max |Q| = {np.max(np.abs(q)):.3g})")
    rows = np.arange(len(a))
    grad = np.zeros_like(q)
    grad[rows, a] = 2.0 * (q[rows, a] - y) / len(a)
    net.backward(grad)
    opt.step(net.gradients())
    return float(np.mean((q[rows, a] - y) ** 2))


def _copy_into(dst: Sequential, src: Sequential):
    dst.set_state(src.get_state())


def evaluate_policy(agent: DqnAgent, env: ThermalEnv, episodes: int, seed: int) -> float:
    env.seed(seed)
    total = 0.0
    for _ in range(episodes):
        obs, done = env.reset(), False
        while not done:
            obs, r, done = env.step(agent.greedy(obs))
            total += r
    return total / episodes


def dqn_train(cfg: RlConfig, env: ThermalEnv, eval_env: ThermalEnv | None = None,
              agent: DqnAgent | None = None, steps: int | None = None) -> DqnAgent:
    """Train (or continue training) a Q-network by epsilon-greedy DQN.

    ``steps`` defaults to ``cfg.offline_steps``. With ``plateau_evals > 0``
    training stops early once that many consecutive periodic evaluations on
    ``eval_env`` fail to improve the best evaluation return.
    """
    steps = cfg.offline_steps if steps is None else steps
    rng = np.random.default_rng(cfg.seed)
    env.seed(int(rng.integers(2**31)))
    env.episode_steps = cfg.episode_steps
    if agent is None:
        agent = DqnAgent(dense_net(N_OBS, cfg.hidden, len(ACTIONS), 0.0, np.random.default_rng(cfg.seed)))
    net = agent.net
    target = build_from_spec(net.spec(), rng)
    _copy_into(target, net)
    opt = Adam([arr for _, _, arr in net.parameters()], cfg.learning_rate)
    buf = ReplayBuffer(cfg.replay_capacity)
    obs, ep_ret = env.reset(), 0.0
    best_eval, stale = -math.inf, 0
    for step in range(steps):
        if rng.random() < cfg.epsilon(step):
            action = int(rng.integers(len(ACTIONS)))
        else:
            action = agent.greedy(obs)
        obs2, r, done = env.step(action)
        buf.add(obs, action, r, obs2, float(done))
        obs, ep_ret = obs2, ep_ret + r
        if done:
            agent.history["episode_return"].append(ep_ret)
            obs, ep_ret = env.reset(), 0.0
        if buf.size >= max(cfg.learning_starts, cfg.batch_size) and step % cfg.train_every == 0:
            _td_update(net, target, opt, buf.sample(rng, cfg.batch_size), cfg)
        if (step + 1) % cfg.target_sync == 0:
            _copy_into(target, net)
        if eval_env is not None and cfg.plateau_evals > 0 and (step + 1) % cfg.eval_every == 0:
            score = evaluate_policy(agent, eval_env, cfg.eval_episodes, cfg.seed + 1)
            agent.history["eval_return"].append(score)
            if score > best_eval:
                best_eval, stale, best_state = score, 0, net.get_state()
            else:
                stale += 1
                if stale >= cfg.plateau_evals:
                    net.set_state(best_state)
                    log.info("evaluation return plateaued at step %d", step + 1)
                    break
    net.eval()
    return agent


def dqn_act(agent: DqnAgent, x: ThermalState, x_ref: float, last: ControlInput = ControlInput(0.0, 0)) -> ControlInput:
    return ACTIONS[agent.greedy(encode(x.t_inside, x_ref, x.t_ambient, last))]


class DqnController(Controller):
    name = "dqn"

    def __init__(self, agent: DqnAgent, weights: RewardWeights = RewardWeights()):
        self.agent = agent
        self.weights = weights

    def act(self, obs: Observation) -> Decision:
        u = dqn_act(self.agent, obs.measurement, obs.reference, obs.last_control)
        return Decision(u, reward(obs.error, u, self.weights))


def with_weights(cfg: RlConfig, weights: RewardWeights) -> RlConfig:
    return replace(cfg, weights=weights)

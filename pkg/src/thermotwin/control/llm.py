"""Language-model controllers over a chat-completion backend.

Three variants share one prompt template:

* ``simple``: one request per step.
* ``history``: past ``(state, control, outcome)`` records nearest to the
  current state are appended to the prompt.
* ``prediction-assisted``: the backend proposes candidate controls, each is
  rolled through a predictor, and the backend picks one given the simulated
  outcomes.

Replies must contain ``CONTROLS: heater=<x> fan=<0|1>``; everything else is
kept as the rationale. The wire format is documented in
``docs/llm_protocol.md``. :class:`MockBackend` is deterministic and needs no
network; :class:`HttpBackend` talks to a live endpoint.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from ..core import ControlInput, action_grid, quantize_control
from ..models.base import Predictor
from .base import Controller, Decision, Observation

VARIANTS = ("simple", "history", "prediction-assisted")

PROMPT = ("What should the control values heater_duty_cycle and fan_on be set to in order to maintain a "
          "temperature of {target:.2f} degrees? The temperature now is {current:.2f} and the ambient "
          "temperature is {ambient:.2f} degrees.")
PENALTY_SUFFIX = " Reduce the actuation: use the heater and the fan as little as possible."
FORMAT_RULE = ("Explain your reasoning briefly, then end with exactly one line of the form "
               "'CONTROLS: heater=<duty in [0, 1]> fan=<0 or 1>'.")
FORMAT_REMINDER = ("Your previous reply could not be parsed. Reply again and end with exactly one line "
                   "'CONTROLS: heater=<duty in [0, 1]> fan=<0 or 1>'.")
SYSTEM = ("You control a small heated enclosure with a heater (duty cycle 0 to 1 in steps of 0.05) and a "
          "fan that exchanges inside air with ambient air (on or off). Each decision holds for 60 s.")
PROPOSE = ("Propose {n} different candidate settings, one per line, each of the form "
           "'CANDIDATE: heater=<duty> fan=<0|1>'.")
CHOOSE = ("Each candidate was simulated for {steps} step(s) with a prediction model:\n{table}\n"
          "Choose the best candidate for reaching the target.")

_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
CONTROL_RE = re.compile(r"heater(?:_duty(?:_cycle)?)?\s*[=:]\s*" + _NUM + r"\s*,?\s*fan(?:_on)?\s*[=:]\s*([01])\b",
                        re.IGNORECASE)
CANDIDATE_RE = re.compile(r"CANDIDATE:\s*heater\s*=\s*" + _NUM + r"\s+fan\s*=\s*([01])\b", re.IGNORECASE)


class LlmError(RuntimeError):
    pass


class LlmParseError(LlmError):
    """The reply held no parsable control line, even after one retry."""


class LlmTimeoutError(LlmError):
    """The endpoint did not answer within the per-step timeout."""


class LlmBackendError(LlmError):
    """Transport or HTTP failure other than a timeout."""


# ---------------------------------------------------------------------- parsing

def parse_controls(reply: str) -> tuple[ControlInput, str]:
    """Last control line in ``reply`` (quantized) and the remaining text as rationale."""
    matches = list(CONTROL_RE.finditer(reply))
    if not matches:
        raise LlmParseError(f"no control line in reply: {reply[:200]!r}")
    m = matches[-1]
    heater = float(m.group(1))
    if not math.isfinite(heater):
        raise LlmParseError(f"non-finite heater value {m.group(1)!r}")
    lines = [ln for ln in reply.splitlines() if not CONTROL_RE.search(ln)]
    return quantize_control(heater, int(m.group(2))), " ".join(" ".join(lines).split())


def parse_candidates(reply: str) -> list[ControlInput]:
    out = []
    for m in CANDIDATE_RE.finditer(reply):
        u = quantize_control(float(m.group(1)), int(m.group(2)))
        if u not in out:
            out.append(u)
    return out


# ---------------------------------------------------------------------- backends

class Backend:
    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        raise NotImplementedError


class MockBackend(Backend):
    """Deterministic stand-in that reads the numbers back out of the prompt.

    With ``script`` set, replies are taken from it in turn (cycling). Otherwise
    it acts as a proportional controller, picks the lowest predicted error
    among simulated candidates, or reuses the control of the most helpful
    history record. ``temperature`` is ignored.
    """

    def __init__(self, script: list[str] | None = None, gain: float = 0.25, bias: float = 0.1,
                 fan_margin: float = 0.5):
        self.script = list(script) if script else None
        self.gain = gain
        self.bias = bias
        self.fan_margin = fan_margin
        self.calls = 0
        self.requests: list[list[dict]] = []

    def complete(self, messages, temperature=0.0):
        self.requests.append(messages)
        self.calls += 1
        if self.script is not None:
            return self.script[(self.calls - 1) % len(self.script)]
        text = "\n".join(m["content"] for m in messages if m["role"] == "user")
        prompt = messages[1]["content"] if len(messages) > 1 else text
        nums = re.findall(r"temperature of " + _NUM + r" degrees\? The temperature now is " + _NUM
                          + r" and the ambient temperature is " + _NUM, prompt)
        if not nums:
            return "I cannot read the temperatures. CONTROLS: heater=0 fan=0"
        target, current, ambient = (float(v) for v in nums[0])
        penalty = PENALTY_SUFFIX.strip() in prompt
        last = messages[-1]["content"]
        if "CANDIDATE:" in last and "simulated" in last:
            return self._choose(last, target, penalty)
        if last.startswith("Propose "):
            n = int(re.search(r"Propose (\d+)", last).group(1))
            return self._propose(target, current, penalty, n)
        if "RECORD:" in prompt:
            reply = self._from_history(prompt, target, current, penalty)
            if reply:
                return reply
        u = self._heuristic(target, current, penalty)
        return (f"The target is {target:.2f} and the temperature is {current:.2f} with ambient {ambient:.2f}, "
                f"so the error is {current - target:+.2f} degrees.\n"
                f"CONTROLS: heater={u.heater_duty:.2f} fan={u.fan_on}")

    def _heuristic(self, target, current, penalty) -> ControlInput:
        err = target - current
        gain = self.gain * (0.6 if penalty else 1.0)
        heater = self.bias + gain * err if err > 0 else max(0.0, self.bias + 2 * gain * err)
        fan = 1 if -err > self.fan_margin * (2.0 if penalty else 1.0) else 0
        return quantize_control(heater, fan)

    def _propose(self, target, current, penalty, n) -> str:
        base = self._heuristic(target, current, penalty)
        cands = [base]
        for u in sorted(action_grid(), key=lambda c: (abs(c.heater_duty - base.heater_duty), c.fan_on != base.fan_on,
                                                      c.heater_duty, c.fan_on)):
            if len(cands) >= n:
                break
            if u not in cands and u.heater_level % 2 == 0:
                cands.append(u)
        lines = [f"CANDIDATE: heater={u.heater_duty:.2f} fan={u.fan_on}" for u in cands[:n]]
        return "Candidates around a proportional guess:\n" + "\n".join(lines)

    def _choose(self, text, target, penalty) -> str:
        rows = re.findall(r"CANDIDATE:\s*heater=" + _NUM + r"\s+fan=([01])\s+predicted=" + _NUM, text)
        if not rows:
            return "No simulations available. CONTROLS: heater=0 fan=0"
        w = 0.2 if penalty else 0.0
        scored = [(abs(float(p) - target) + w * (float(h) + int(f)), float(h), int(f)) for h, f, p in rows]
        cost, h, f = min(scored)
        return (f"Heater {h:.2f} with fan {f} gives the smallest predicted deviation ({cost:.3f}).\n"
                f"CONTROLS: heater={h:.2f} fan={f}")

    def _from_history(self, prompt, target, current, penalty) -> str | None:
        rows = re.findall(r"RECORD:\s*T=" + _NUM + r"\s+heater=" + _NUM + r"\s+fan=([01])\s+T_next=" + _NUM, prompt)
        if not rows:
            return None
        w = 0.2 if penalty else 0.0
        scored = []
        for t, h, f, t_next in rows:
            expected = current + float(t_next) - float(t)
            scored.append((abs(expected - target) + w * (float(h) + int(f)), float(h), int(f)))
        cost, h, f = min(scored)
        if cost > 1.0:
            return None
        return (f"A similar past state moved as needed with heater {h:.2f} and fan {f}.\n"
                f"CONTROLS: heater={h:.2f} fan={f}")


class HttpBackend(Backend):
    """POST ``{base_url}/chat/completions`` with a bearer token from ``token_env``."""

    def __init__(self, base_url: str, model: str, token_env: str = "THERMOTWIN_LLM_TOKEN",
                 timeout: float = 30.0, client=None):
        import httpx

        self._httpx = httpx
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.client = client or httpx.Client(timeout=timeout)

    def complete(self, messages, temperature=0.0):
        token = os.environ.get(self.token_env)
        if not token:
            raise LlmBackendError(f"environment variable {self.token_env} holds no bearer token")
        body = {"model": self.model, "messages": messages, "temperature": temperature}
        try:
            resp = self.client.post(self.url, json=body, headers={"Authorization": f"Bearer {token}"},
                                    timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except self._httpx.TimeoutException as exc:
            raise LlmTimeoutError(f"no reply from {self.url} within {self.timeout} s") from exc
        except (self._httpx.HTTPError, ValueError) as exc:
            raise LlmBackendError(f"request to {self.url} failed: {exc}") from exc
        try:
            return str(data["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise LlmBackendError(f"malformed reply body: {str(data)[:200]}") from exc


# ---------------------------------------------------------------------- history store

@dataclass(frozen=True)
class Record:
    t_inside: float
    t_ref: float
    t_ambient: float
    control: ControlInput
    t_next: float


class HistoryStore:
    """Append-only list of past transitions with nearest-neighbour lookup.

    Distance is Euclidean over ``(T, T_ref - T, T_amb)``; ties keep insertion order.
    """

    def __init__(self, records: list[Record] | None = None):
        self._records: list[Record] = list(records or [])

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def append(self, rec: Record) -> None:
        self._records.append(rec)

    def nearest(self, t_inside: float, t_ref: float, t_ambient: float, k: int = 5) -> list[Record]:
        if not self._records:
            return []
        keys = np.array([(r.t_inside, r.t_ref - r.t_inside, r.t_ambient) for r in self._records])
        d = np.linalg.norm(keys - np.array([t_inside, t_ref - t_inside, t_ambient]), axis=1)
        order = np.argsort(d, kind="stable")[:k]
        return [self._records[i] for i in order]


# ---------------------------------------------------------------------- controller

@dataclass
class LlmControllerConfig:
    variant: str = "simple"
    backend: Backend = field(default_factory=MockBackend)
    temperature: float = 0.0
    penalty_prompt: bool = False
    candidate_count: int = 5
    assist_model: Predictor | None = None
    assist_steps: int = 1
    history: HistoryStore | None = None
    neighbours: int = 5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "prediction-assisted" and self.assist_model is None:
            raise ValueError("the prediction-assisted variant needs assist_model")
        if self.variant == "history" and self.history is None:
            raise ValueError("the history variant needs a history store")
        if self.candidate_count < 1 or self.assist_steps < 1:
            raise ValueError("candidate_count and assist_steps must be >= 1")


def build_prompt(x_ref: float, t_inside: float, t_amb: float, penalty: bool) -> str:
    text = PROMPT.format(target=x_ref, current=t_inside, ambient=t_amb)
    return text + PENALTY_SUFFIX if penalty else text


def _ask(cfg: LlmControllerConfig, messages: list[dict]) -> tuple[ControlInput, str]:
    reply = cfg.backend.complete(messages, cfg.temperature)
    try:
        return parse_controls(reply)
    except LlmParseError:
        retry = messages + [{"role": "assistant", "content": reply}, {"role": "user", "content": FORMAT_REMINDER}]
        return parse_controls(cfg.backend.complete(retry, cfg.temperature))


def llm_step(cfg: LlmControllerConfig, x: float, x_ref: float, t_amb: float,
             window: np.ndarray | None = None) -> tuple[ControlInput, str]:
    """One decision. ``window`` is the predictor input ending at the current state."""
    prompt = build_prompt(x_ref, x, t_amb, cfg.penalty_prompt)
    messages = [{"role": "system", "content": SYSTEM}, {"role": "user", "content": prompt}]
    if cfg.variant == "history":
        recs = cfg.history.nearest(x, x_ref, t_amb, cfg.neighbours)
        if recs:
            table = "\n".join(f"RECORD: T={r.t_inside:.2f} heater={r.control.heater_duty:.2f} fan={r.control.fan_on} "
                              f"T_next={r.t_next:.2f}" for r in recs)
            messages[1]["content"] += "\nSimilar past operating records:\n" + table
    if cfg.variant == "prediction-assisted":
        ask = {"role": "user", "content": PROPOSE.format(n=cfg.candidate_count)}
        proposal = cfg.backend.complete(messages + [ask], cfg.temperature)
        cands = parse_candidates(proposal)[: cfg.candidate_count]
        if not cands:
            raise LlmParseError(f"no candidates in reply: {proposal[:200]!r}")
        if window is None:
            raise ValueError("the prediction-assisted variant needs the predictor window")
        preds = [float(cfg.assist_model.rollout(window, [u] * cfg.assist_steps)[-1]) for u in cands]
        table = "\n".join(f"CANDIDATE: heater={u.heater_duty:.2f} fan={u.fan_on} predicted={p:.3f}"
                          for u, p in zip(cands, preds))
        messages = messages + [{"role": "assistant", "content": proposal},
                               {"role": "user", "content": CHOOSE.format(steps=cfg.assist_steps, table=table)
                                + " " + FORMAT_RULE}]
    else:
        messages[1]["content"] += " " + FORMAT_RULE
    return _ask(cfg, messages)


class LlmController(Controller):
    name = "llm"

    def __init__(self, cfg: LlmControllerConfig):
        self.cfg = cfg
        self._pending: tuple | None = None

    def reset(self) -> None:
        self._pending = None

    def act(self, obs: Observation) -> Decision:
        cfg = self.cfg
        x, t_amb = obs.measurement.t_inside, obs.measurement.t_ambient
        if cfg.history is not None and self._pending is not None:
            t, ref, amb, u = self._pending
            cfg.history.append(Record(t, ref, amb, u, x))
        window = obs.window(cfg.assist_model.lookback) if cfg.assist_model is not None else None
        u, rationale = llm_step(cfg, x, obs.reference, t_amb, window)
        self._pending = (x, obs.reference, t_amb, u)
        return Decision(u, abs(obs.error), rationale)

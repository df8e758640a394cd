"""Adaptive Dormand-Prince 5(4) integration for small non-stiff systems.

States are handled as plain Python float lists: the systems integrated here
have one or two components, where NumPy call overhead would dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Rhs = Callable[[float, list], Sequence[float]]

# Butcher tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B_LOW = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b - bl for b, bl in zip(_B, _B_LOW))

_SAFETY = 0.9
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_MIN_FACTOR, _MAX_FACTOR = 0.2, 10.0


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    max_steps: int = 10_000
    initial_step: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@dataclass(frozen=True)
class OdeProblem:
    rhs: Rhs
    t_span: tuple[float, float]
    y0: tuple[float, ...]
    dimension: int = field(default=None)

    def __post_init__(self):
        y0 = tuple(float(v) for v in np.atleast_1d(self.y0))
        object.__setattr__(self, "y0", y0)
        if self.dimension is None:
            object.__setattr__(self, "dimension", len(y0))
        if len(y0) != self.dimension:
            raise ValueError(f"y0 has length {len(y0)}, expected {self.dimension}")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError(f"t_span must satisfy t1 > t0, got {self.t_span}")


@dataclass
class OdeSolution:
    y: np.ndarray
    t_log: list[float]
    y_log: list[tuple[float, ...]]
    n_accepted: int
    n_rejected: int
    n_rhs: int


def _eval(rhs, t, y):
    out = rhs(t, y)
    out = [float(v) for v in out]
    for v in out:
        if not math.isfinite(v):
            raise IntegrationError(f"right-hand side returned a non-finite value at t={t}")
    return out


def _initial_step(rhs, t0, y0, f0, t1, rtol, atol):
    # Hairer, Norsett & Wanner, II.4 starting step heuristic
    scale = [atol + rtol * abs(v) for v in y0]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y0, scale)) / len(y0))
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(f0, scale)) / len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    y1 = [y + h0 * f for y, f in zip(y0, f0)]
    f1 = _eval(rhs, t0 + h0, y1)
    d2 = math.sqrt(sum(((a - b) / s) ** 2 for a, b, s in zip(f1, f0, scale)) / len(y0)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t1 - t0)


def solve_rk45(problem: OdeProblem, cfg: IntegratorConfig | None = None, log: bool = False) -> OdeSolution:
    """Integrate ``problem`` from ``t0`` to exactly ``t1``.

    Each accepted step satisfies ``|err_i| <= abs_tol + rel_tol * max(|y_i|, |y_new_i|)``.
    The step log (accepted times and states) is only recorded when ``log`` is true.
    """
    cfg = cfg or IntegratorConfig()
    rhs = problem.rhs
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    t, t1 = float(problem.t_span[0]), float(problem.t_span[1])
    y = list(problem.y0)
    f = _eval(rhs, t, y)
    n_rhs = 1
    h = cfg.initial_step if cfg.initial_step is not None else _initial_step(rhs, t, y, f, t1, rtol, atol)
    if cfg.initial_step is None:
        n_rhs += 1
    t_log, y_log = ([t], [tuple(y)]) if log else ([], [])
    err_prev = 1.0
    accepted = rejected = 0
    rejected_last = False
    eps = 1e-12 * max(1.0, abs(t1))

    while t1 - t > eps:
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded at t={t} (target {t1})")
        last = t + h >= t1 - eps
        if last:
            h = t1 - t
        a2, a3, a4, a5, a6, a7 = _A[1:]
        k1 = f
        k2 = _eval(rhs, t + _C[1] * h, [yi + h * a2[0] * p1 for yi, p1 in zip(y, k1)])
        k3 = _eval(rhs, t + _C[2] * h, [yi + h * (a3[0] * p1 + a3[1] * p2) for yi, p1, p2 in zip(y, k1, k2)])
        k4 = _eval(rhs, t + _C[3] * h, [yi + h * (a4[0] * p1 + a4[1] * p2 + a4[2] * p3)
                                        for yi, p1, p2, p3 in zip(y, k1, k2, k3)])
        k5 = _eval(rhs, t + _C[4] * h, [yi + h * (a5[0] * p1 + a5[1] * p2 + a5[2] * p3 + a5[3] * p4)
                                        for yi, p1, p2, p3, p4 in zip(y, k1, k2, k3, k4)])
        k6 = _eval(rhs, t + h, [yi + h * (a6[0] * p1 + a6[1] * p2 + a6[2] * p3 + a6[3] * p4 + a6[4] * p5)
                                for yi, p1, p2, p3, p4, p5 in zip(y, k1, k2, k3, k4, k5)])
        # 5th-order solution; stage 7 is evaluated there (first same as last)
        y_new = [yi + h * (a7[0] * p1 + a7[2] * p3 + a7[3] * p4 + a7[4] * p5 + a7[5] * p6)
                 for yi, p1, p3, p4, p5, p6 in zip(y, k1, k3, k4, k5, k6)]
        k7 = _eval(rhs, t + h, y_new)
        n_rhs += 6
        err = 0.0
        for yi, yn, p1, p3, p4, p5, p6, p7 in zip(y, y_new, k1, k3, k4, k5, k6, k7):
            e = h * (_E[0] * p1 + _E[2] * p3 + _E[3] * p4 + _E[4] * p5 + _E[5] * p6 + _E[6] * p7)
            err = max(err, abs(e) / (atol + rtol * max(abs(yi), abs(yn))))

        if err <= 1.0:
            t = t1 if last else t + h
            y = y_new
            f = k7
            accepted += 1
            if log:
                t_log.append(t)
                y_log.append(tuple(y))
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            if rejected_last:
                factor = min(factor, 1.0)
            h *= factor
            err_prev = max(err, 1e-4)
            rejected_last = False
        else:
            rejected += 1
            rejected_last = True
            h *= max(_MIN_FACTOR, _SAFETY * err ** -_ALPHA)
        if not math.isfinite(h) or h <= 0 or t + h == t:
            raise IntegrationError(f"step size underflow at t={t}")

    return OdeSolution(np.array(y), t_log, y_log, accepted, rejected, n_rhs)


def integrate(rhs: Rhs, t_span: tuple[float, float], y0, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Shorthand returning only the final state."""
    return solve_rk45(OdeProblem(rhs, t_span, y0), cfg).y

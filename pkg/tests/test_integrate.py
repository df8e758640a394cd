import math

import numpy as np
import pytest

from thermotwin.core import PlantParams
from thermotwin.integrate import IntegrationError, IntegratorConfig, OdeProblem, integrate, solve_rk45


def test_exponential_decay():
    y = integrate(lambda t, y: [-y[0]], (0.0, 1.0), [1.0])
    assert abs(y[0] - math.exp(-1)) < 1e-6


def test_constant_field_is_exact():
    assert integrate(lambda t, y: [0.0], (0.0, 100.0), [5.0])[0] == 5.0


def test_linear_enclosure_ode_matches_closed_form():
    p = PlantParams()
    cap, k = p.heat_capacity, p.f_max / p.volume
    t_amb, t0 = 22.0, 25.0
    # heater full on with the fan on: dT/dt = H/cap - k (T - T_amb)
    rhs = lambda t, y: [p.h_max / cap - k * (y[0] - t_amb)]
    y = integrate(rhs, (0.0, 60.0), [t0])[0]
    t_inf = t_amb + p.h_max / (cap * k)
    exact = t_inf + (t0 - t_inf) * math.exp(-k * 60.0)
    assert abs(y - exact) < 1e-5


def test_final_time_is_exact():
    sol = solve_rk45(OdeProblem(lambda t, y: [math.cos(t)], (0.0, 7.3), [0.0]), log=True)
    assert sol.t_log[-1] == 7.3
    assert abs(sol.y[0] - math.sin(7.3)) < 1e-6


def test_halving_tolerances_reduces_error():
    errs = []
    for scale in (1.0, 0.5):
        cfg = IntegratorConfig(rel_tol=1e-6 * scale, abs_tol=1e-8 * scale)
        errs.append(abs(integrate(lambda t, y: [-y[0]], (0.0, 1.0), [1.0], cfg)[0] - math.exp(-1)))
    assert errs[1] < errs[0]


def test_time_reversal():
    cfg = IntegratorConfig()
    rhs = lambda t, y: [-0.7 * y[0] + math.sin(t)]
    y1 = integrate(rhs, (0.0, 3.0), [2.0], cfg)[0]
    back = integrate(lambda s, y: [-v for v in rhs(3.0 - s, y)], (0.0, 3.0), [y1], cfg)[0]
    assert abs(back - 2.0) <= 10 * (cfg.abs_tol + cfg.rel_tol * 2.0)


def test_step_error_bounded_by_tolerance():
    cfg = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-8)
    sol = solve_rk45(OdeProblem(lambda t, y: [-y[0]], (0.0, 5.0), [1.0]), cfg, log=True)
    for t, (y,) in zip(sol.t_log, sol.y_log):
        assert abs(y - math.exp(-t)) < 1e-5


def test_nan_rhs_raises():
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: [math.nan], (0.0, 1.0), [1.0])


def test_max_steps_raises():
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: [-50 * y[0]], (0.0, 10.0), [1.0], IntegratorConfig(max_steps=3))


def test_problem_validation():
    with pytest.raises(ValueError):
        OdeProblem(lambda t, y: [0.0], (1.0, 1.0), [0.0])
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        OdeProblem(lambda t, y: [0.0], (0.0, 1.0), [0.0, 1.0], dimension=1)


def test_vector_system():
    # harmonic oscillator conserves energy to tolerance
    y = integrate(lambda t, y: [y[1], -y[0]], (0.0, 2 * math.pi), [1.0, 0.0])
    assert np.allclose(y, [1.0, 0.0], atol=1e-5)

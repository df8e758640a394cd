"""Physics-based model: lumped energy balance of the enclosure air.

    dT/dt = u_h * H_max / (rho V c_p) - u_f * F_max * (T - T_amb) / V  (+ source)

The optional constant ``source`` (K/s) is the corrective term used by the
hybrid model; with ``source == 0`` the right-hand side is the bare physics.
"""

from __future__ import annotations

import numpy as np

from ..core import DEFAULT_DT, ControlInput, PlantParams
from ..integrate import IntegratorConfig, OdeProblem, solve_rk45
from ..nnet import checkpoint
from .base import Predictor, check_targets, check_windows


def pbm_rhs(params: PlantParams, heater_duty: float, fan_on: float, t_amb: float, source: float = 0.0):
    cap = params.rho * params.volume * params.cp
    vol = params.volume
    power = heater_duty * params.h_max
    flow = fan_on * params.f_max

    if source == 0.0:
        # same operation order as the plant's air balance, so the two agree bit for bit
        def rhs(t, y):
            return [power / cap - flow * (y[0] - t_amb) / vol]
    else:
        def rhs(t, y):
            return [power / cap - flow * (y[0] - t_amb) / vol + source]
    return rhs


def pbm_step(t_inside: float, t_amb: float, u: ControlInput | tuple, params: PlantParams,
             dt: float = DEFAULT_DT, integrator: IntegratorConfig | None = None, source: float = 0.0,
             t0: float = 0.0) -> float:
    """Integrate the physics model over one held-control interval."""
    heater, fan = u.as_tuple() if isinstance(u, ControlInput) else u
    rhs = pbm_rhs(params, float(heater), float(fan), float(t_amb), float(source))
    return float(solve_rk45(OdeProblem(rhs, (t0, t0 + dt), [float(t_inside)]), integrator).y[0])


class PbmModel(Predictor):
    """Physics-only predictor; ``fit`` only validates shapes since nothing is learned.

    Parameters
    ----------
    params : PlantParams, default=PlantParams()
    dt : float, default=60
        Prediction step in seconds.
    rel_tol, abs_tol : float
        Integrator tolerances.
    """

    lookback = 1

    def __init__(self, params: PlantParams | None = None, dt: float = DEFAULT_DT, rel_tol: float = 1e-6,
                 abs_tol: float = 1e-8):
        self.params = params
        self.dt = dt
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    @property
    def params_(self) -> PlantParams:
        return self.params or PlantParams()

    @property
    def integrator_(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)

    def fit(self, X, y=None):
        X = check_windows(X)
        if y is not None:
            check_targets(X, y)
        self.n_features_in_ = X.shape[2]
        return self

    def _check_fitted(self):
        # nothing to learn: an unfitted physics model is usable as is
        pass

    def predict(self, X) -> np.ndarray:
        X = check_windows(X)
        p, cfg = self.params_, self.integrator_
        last = X[:, -1, :]
        return np.array([pbm_step(T, ta, (h, f), p, self.dt, cfg) for T, ta, h, f in last])

    # ------------------------------------------------------------------ checkpoint
    def to_checkpoint(self) -> bytes:
        p = self.params_
        meta = {"kind": "pbm", "dt": self.dt, "rel_tol": self.rel_tol, "abs_tol": self.abs_tol}
        arrays = {"params": np.array([p.h_max, p.f_max, p.volume, p.rho, p.cp])}
        return checkpoint.dumps(meta, arrays)

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict) -> "PbmModel":
        h, f, v, rho, cp = (float(x) for x in arrays["params"])
        return cls(PlantParams(h, f, v, rho, cp), meta["dt"], meta["rel_tol"], meta["abs_tol"])

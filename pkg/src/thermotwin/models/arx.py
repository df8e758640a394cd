"""Linear ARX predictor identified by (ridge-regularized) least squares.

    T_{k+1} = sum_i a_i T_{k+1-i} + sum_j b^h_j u_h,{k+1-j} + sum_j b^f_j u_f,{k+1-j} + c
"""

from __future__ import annotations

import numpy as np

from ..core import WindowedDataset
from ..nnet import checkpoint
from .base import Predictor, check_targets, check_windows


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


def arx_regressors(X: np.ndarray, p: int, q: int) -> np.ndarray:
    """Regression matrix ``[T_k..T_{k-p+1}, u_h,k..u_h,{k-q+1}, u_f,k..u_f,{k-q+1}]`` per window."""
    temps = X[:, ::-1, 0][:, :p]
    heater = X[:, ::-1, 2][:, :q]
    fan = X[:, ::-1, 3][:, :q]
    return np.hstack([temps, heater, fan])


class ArxModel(Predictor):
    """ARX(p, q) one-step predictor.

    Parameters
    ----------
    p, q : int, default=10
        State and input lag orders. Windows must hold at least ``max(p, q)`` samples.
    ridge : float, default=1e-8
        Tikhonov weight on the lag coefficients (the intercept is not penalized).
        With ``ridge=0`` a rank-deficient regressor matrix raises.
    fit_intercept : bool, default=True
    """

    def __init__(self, p: int = 10, q: int = 10, ridge: float = 1e-8, fit_intercept: bool = True):
        self.p = p
        self.q = q
        self.ridge = ridge
        self.fit_intercept = fit_intercept

    @property
    def lookback(self) -> int:
        return max(self.p, self.q)

    def _validate_params(self):
        if int(self.p) < 1 or int(self.q) < 1:
            raise ValueError(f"ARX orders must be >= 1, got p={self.p}, q={self.q}")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    def _windows(self, X):
        X = check_windows(X)
        if X.shape[1] < self.lookback:
            raise ValueError(f"ARX({self.p}, {self.q}) needs windows of >= {self.lookback} samples, got {X.shape[1]}")
        return X

    def fit(self, X, y=None):
        self._validate_params()
        if isinstance(X, WindowedDataset) and y is None:
            y = X.y
        X = self._windows(X)
        y = check_targets(X, y)
        Phi = arx_regressors(X, self.p, self.q)
        n_par = Phi.shape[1] + int(self.fit_intercept)
        if len(y) < n_par:
            raise ValueError(f"ARX({self.p}, {self.q}) has {n_par} parameters but only {len(y)} training pairs")
        if self.fit_intercept:
            Phi = np.hstack([Phi, np.ones((len(Phi), 1))])
        rank = np.linalg.matrix_rank(Phi)
        if self.ridge == 0 and rank < Phi.shape[1]:
            raise RankDeficiencyError(
                f"regressor matrix has rank {rank} < {Phi.shape[1]} columns; inputs are not "
                "persistently exciting (constant signals?); use ridge > 0 or richer data"
            )
        A, b = Phi, y
        if self.ridge > 0:
            k = Phi.shape[1] - int(self.fit_intercept)
            reg = np.zeros((k, Phi.shape[1]))
            reg[:, :k] = np.sqrt(self.ridge) * np.eye(k)
            A = np.vstack([Phi, reg])
            b = np.concatenate([y, np.zeros(k)])
        theta = np.linalg.lstsq(A, b, rcond=None)[0]
        p, q = self.p, self.q
        self.a_ = theta[:p]
        self.b_h_ = theta[p:p + q]
        self.b_f_ = theta[p + q:p + 2 * q]
        self.intercept_ = float(theta[-1]) if self.fit_intercept else 0.0
        self.rank_ = int(rank)
        self.n_features_in_ = X.shape[2]
        return self

    @property
    def coef_(self) -> np.ndarray:
        return np.concatenate([self.a_, self.b_h_, self.b_f_])

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = self._windows(X)
        return arx_regressors(X, self.p, self.q) @ self.coef_ + self.intercept_

    @classmethod
    def from_coefficients(cls, a, b_h, b_f, intercept: float = 0.0) -> "ArxModel":
        a, b_h, b_f = (np.asarray(v, dtype=float).reshape(-1) for v in (a, b_h, b_f))
        if len(b_h) != len(b_f):
            raise ValueError("heater and fan coefficient vectors differ in length")
        model = cls(p=len(a), q=len(b_h), fit_intercept=intercept != 0.0)
        model.a_, model.b_h_, model.b_f_ = a, b_h, b_f
        model.intercept_ = float(intercept)
        model.n_features_in_ = 4
        return model

    # ------------------------------------------------------------------ checkpoint
    def to_checkpoint(self) -> bytes:
        self._check_fitted()
        meta = {"kind": "arx", "p": self.p, "q": self.q, "ridge": self.ridge, "fit_intercept": self.fit_intercept}
        arrays = {"a": self.a_, "b_h": self.b_h_, "b_f": self.b_f_, "intercept": np.array([self.intercept_])}
        return checkpoint.dumps(meta, arrays)

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict) -> "ArxModel":
        model = cls.from_coefficients(arrays["a"], arrays["b_h"], arrays["b_f"], float(arrays["intercept"][0]))
        model.set_params(ridge=meta["ridge"], fit_intercept=meta["fit_intercept"])
        return model


def fit_arx(ds: WindowedDataset, p: int = 10, q: int = 10, ridge: float = 1e-8,
            fit_intercept: bool = True) -> ArxModel:
    if len(ds) == 0:
        raise ValueError("cannot identify an ARX model from an empty dataset")
    return ArxModel(p, q, ridge, fit_intercept).fit(ds.X, ds.y)

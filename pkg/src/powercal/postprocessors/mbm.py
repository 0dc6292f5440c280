"""Member-by-member correction: shift every member with the ensemble mean, rescale its anomaly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..scoring import ensemble_quantile
from .base import Calibrator, FitError, ensemble_mean_spread


@dataclass(frozen=True)
class MbmParams:
    """``X~_i = alpha + beta * mean(X) + tau * (X_i - mean(X))`` with ``tau^2 = g1^2 + g2^2 / S^2``."""

    alpha: float
    beta: float
    gamma1: float
    gamma2: float

    def tau(self, spread):
        spread = np.asarray(spread, dtype=float)
        with np.errstate(divide="ignore"):
            tau2 = self.gamma1**2 + np.where(spread > 0, self.gamma2**2 / spread**2, 0.0)
        return np.sqrt(tau2)


def _mean_crps_scaled(tau, centre, anomalies, gini, y):
    """Mean ensemble CRPS of members ``centre + tau * anomalies``.

    ``gini`` holds ``sum_ij |e_i - e_j| / (2 K^2)`` per row, so the spread term
    is simply ``tau * gini``.
    """
    members = centre[:, None] + tau[:, None] * anomalies
    return np.mean(np.mean(np.abs(members - y[:, None]), axis=1) - tau * gini)


class MBM(Calibrator):
    method = "mbm"

    def __init__(self, grid=None, seed=0):
        super().__init__(grid, seed)
        self.params: MbmParams | None = None

    def _fit(self, X, y, leads):
        n, k = X.shape
        if n < 2:
            raise FitError("MBM needs at least two training pairs")
        xbar, s = ensemble_mean_spread(X)
        if np.ptp(xbar) > 0:
            beta, alpha = np.polyfit(xbar, y, 1)
        else:
            alpha, beta = float(np.mean(y) - xbar[0]), 1.0
        centre = alpha + beta * xbar

        usable = s > 0
        if not np.any(usable):
            self.params = MbmParams(float(alpha), float(beta), 1.0, 0.0)
            return
        anomalies = np.sort(X[usable] - xbar[usable, None], axis=1)
        coef = 2.0 * np.arange(1, k + 1) - k - 1
        gini = (anomalies @ coef) / (k * k)
        s_u, c_u, y_u = s[usable], centre[usable], y[usable]

        def objective(g):
            tau = np.sqrt(g[0] ** 2 + g[1] ** 2 / s_u**2)
            return _mean_crps_scaled(tau, c_u, anomalies, gini, y_u)

        # start from the spread ratio that matches residual variance
        resid_sd = np.std(y_u - c_u)
        g1_0 = resid_sd / max(np.mean(s_u), 1e-12)
        best = None
        for start in ([g1_0, 0.0], [1.0, 0.0], [0.5 * g1_0, 0.5 * resid_sd]):
            res = minimize(objective, np.array(start), method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000})
            if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
                best = res
        if best is None:
            raise FitError("MBM spread optimisation failed")
        g1, g2 = np.abs(best.x)
        self.params = MbmParams(float(alpha), float(beta), float(g1), float(g2))

    def corrected_members(self, X) -> np.ndarray:
        """Corrected members in their original order (not yet sorted or clipped)."""
        p = self.params
        X = np.atleast_2d(np.asarray(X, dtype=float))
        xbar, s = ensemble_mean_spread(X)
        tau = p.tau(s)
        return (p.alpha + p.beta * xbar)[:, None] + tau[:, None] * (X - xbar[:, None])

    def spread_scaling(self, X) -> np.ndarray:
        _, s = ensemble_mean_spread(np.atleast_2d(X))
        return self.params.tau(s)

    def _predict(self, X, leads):
        members = np.sort(self.corrected_members(X), axis=1)
        if members.shape[1] == self.grid.K:
            return members
        return ensemble_quantile(members, self.levels)

    def _get_state(self):
        p = self.params
        return {"alpha": p.alpha, "beta": p.beta, "gamma1": p.gamma1, "gamma2": p.gamma2}

    def _set_state(self, state):
        self.params = MbmParams(**{k: float(v) for k, v in state.items()})

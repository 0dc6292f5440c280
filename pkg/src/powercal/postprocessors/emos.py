"""EMOS: truncated-normal non-homogeneous regression fitted by CRPS minimisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .. import distributions as tn
from .base import Calibrator, FitError, ensemble_mean_spread


@dataclass(frozen=True)
class EmosParams:
    """``mu = a * sum(X) + b``, ``sigma^2 = c + d * S^2`` in MW units."""

    a: float
    b: float
    c: float
    d: float


class EMOS(Calibrator):
    method = "emos"

    def __init__(self, grid=None, seed=0, n_starts: int = 3, max_iter: int = 500, warm_start: bool = False):
        super().__init__(grid, seed)
        self.n_starts = n_starts
        self.max_iter = max_iter
        self.warm_start = warm_start
        self.params: EmosParams | None = None
        self._theta = None
        self._fix_d = False

    def get_config(self):
        return {"n_starts": self.n_starts, "max_iter": self.max_iter, "warm_start": self.warm_start}

    # Optimisation runs on data divided by a positive scale; CRPS is
    # positively homogeneous so the [0, inf) support is unaffected.
    # theta = (b', a_mean', log c', log d')

    @staticmethod
    def _objective(theta, xbar, s2, y, fix_d):
        b, am, lc = theta[:3]
        c = np.exp(lc)
        d = 0.0 if fix_d else np.exp(theta[3])
        mu = b + am * xbar
        sigma = np.sqrt(c + d * s2)
        loss = np.mean(tn.crps(mu, sigma, y))
        g_mu, g_sigma = tn.crps_grad(mu, sigma, y)
        n = y.size
        g_var = g_sigma / (2.0 * sigma)
        grad = [g_mu.sum() / n, (g_mu * xbar).sum() / n, (g_var * c).sum() / n]
        if not fix_d:
            grad.append((g_var * d * s2).sum() / n)
        return loss, np.array(grad)

    def _starts(self, xbar, s2, y, fix_d):
        A = np.column_stack([np.ones_like(xbar), xbar])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid_var = max(np.var(y - A @ coef), 1e-6)
        mean_s2 = max(np.mean(s2), 1e-12)
        if fix_d:
            bases = [(resid_var, None), (resid_var * 4, None), (resid_var / 4, None)]
        else:
            bases = [
                (resid_var / 2, resid_var / 2 / mean_s2),
                (resid_var * 0.95, resid_var * 0.05 / mean_s2),
                (resid_var * 0.05, resid_var * 0.95 / mean_s2),
            ]
        rng = np.random.default_rng(self.seed)
        starts = []
        for i, (c0, d0) in enumerate(bases[: max(self.n_starts, 1)]):
            jitter = 0.0 if i == 0 else rng.normal(scale=0.05, size=2)
            theta = [coef[0] + (0 if i == 0 else jitter[0]), coef[1] * (1 + (0 if i == 0 else jitter[1])), np.log(c0)]
            if not fix_d:
                theta.append(np.log(d0))
            starts.append(np.array(theta))
        return starts

    def _fit(self, X, y, leads):
        if X.shape[0] < 2:
            raise FitError("EMOS needs at least two training pairs")
        xbar, s = ensemble_mean_spread(X)
        scale = float(np.std(y)) or float(np.mean(np.abs(y))) or 1.0
        xbar_s, s2_s, y_s = xbar / scale, (s / scale) ** 2, y / scale
        # identical spreads leave d unidentifiable
        fix_d = bool(np.ptp(s2_s) <= 1e-10 * max(np.mean(s2_s), 1e-300))

        if self.warm_start and self._theta is not None and self._fix_d == fix_d:
            prev_scale, theta = self._theta
            starts = [self._rescale_theta(theta, prev_scale, scale, fix_d)]
        else:
            starts = self._starts(xbar_s, s2_s, y_s, fix_d)

        best, reports = None, []
        for theta0 in starts:
            try:
                res = minimize(
                    self._objective, theta0, args=(xbar_s, s2_s, y_s, fix_d), jac=True,
                    method="L-BFGS-B", options={"maxiter": self.max_iter, "ftol": 1e-12, "gtol": 1e-9},
                )
            except tn.InvalidParameters as exc:
                reports.append({"start": theta0.tolist(), "error": str(exc)})
                continue
            reports.append({"start": theta0.tolist(), "status": int(res.status), "fun": float(res.fun), "message": str(res.message)})
            if not np.isfinite(res.fun) or res.status == 1:
                continue
            if best is None or res.fun < best.fun:
                best = res
        if best is None:
            raise FitError("EMOS CRPS minimisation did not converge", {"starts": reports})

        theta = best.x
        self._theta = (scale, theta.copy())
        self._fix_d = fix_d
        k = X.shape[1]
        d = 0.0 if fix_d else float(np.exp(theta[3]))
        self.params = EmosParams(
            a=float(theta[1]) / k,
            b=float(theta[0]) * scale,
            c=float(np.exp(theta[2])) * scale**2,
            d=d,
        )
        self.train_crps = float(best.fun) * scale

    @staticmethod
    def _rescale_theta(theta, old, new, fix_d):
        r = old / new
        out = [theta[0] * r, theta[1], theta[2] + 2 * np.log(r)]
        if not fix_d:
            out.append(theta[3])
        return np.array(out)

    def distribution(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Location and scale of the predictive truncated normal for each row."""
        p = self.params
        X = np.atleast_2d(np.asarray(X, dtype=float))
        xbar, s = ensemble_mean_spread(X)
        mu = p.a * X.shape[1] * xbar + p.b
        sigma = np.sqrt(p.c + p.d * s**2)
        return mu, sigma

    def _predict(self, X, leads):
        mu, sigma = self.distribution(X)
        return tn.quantile(self.levels[None, :], mu[:, None], sigma[:, None])

    def _get_state(self):
        p = self.params
        return {"a": p.a, "b": p.b, "c": p.c, "d": p.d}

    def _set_state(self, state):
        self.params = EmosParams(**{k: float(state[k]) for k in "abcd"})

"""Bayesian model averaging over ensemble members with a Gaussian kernel per member."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .base import Calibrator, FitError


@dataclass(frozen=True)
class BmaParams:
    a: np.ndarray  # intercepts
    b: np.ndarray  # slopes
    weights: np.ndarray
    sigma: np.ndarray


class EMDivergence(RuntimeError):
    """The EM log-likelihood went down: an implementation bug, not a data problem."""


def _linear_fit(x, y):
    """Least-squares ``y ~ a + b x``; falls back to the identity map when ``x`` is constant."""
    if np.ptp(x) <= 1e-12 * max(1.0, np.max(np.abs(x))):
        return 0.0, 1.0
    b, a = np.polyfit(x, y, 1)
    return float(a), float(b)


def em_mixture(means, y, weights, sigma, *, shared: bool, sigma_floor: float,
               max_iter: int = 1000, tol: float = 1e-10, ll_tol: float = 1e-9):
    """EM for a Gaussian mixture with fixed component means.

    ``means`` is ``(n, K)``. With ``shared=True`` the weights stay uniform and a
    single scale is re-estimated. Returns ``(weights, sigma, loglik_trace)``;
    the trace holds the log-likelihood before the first and after every step.
    """
    n, k = means.shape
    resid2 = (y[:, None] - means) ** 2
    weights = np.asarray(weights, dtype=float).copy()
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (k,)).copy()

    def log_components(w, s):
        return np.log(np.maximum(w, 1e-300)) - 0.5 * resid2 / s**2 - np.log(s) - 0.5 * np.log(2 * np.pi)

    logc = log_components(weights, sigma)
    trace = [float(logsumexp(logc, axis=1).sum())]
    for _ in range(max_iter):
        z = np.exp(logc - logsumexp(logc, axis=1, keepdims=True))
        if shared:
            s2 = np.sum(z * resid2) / n
            sigma = np.full(k, max(np.sqrt(s2), sigma_floor))
        else:
            mass = z.sum(axis=0)
            weights = mass / n
            with np.errstate(invalid="ignore", divide="ignore"):
                s2 = np.where(mass > 0, (z * resid2).sum(axis=0) / mass, sigma**2)
            sigma = np.maximum(np.sqrt(s2), sigma_floor)
        logc = log_components(weights, sigma)
        ll = float(logsumexp(logc, axis=1).sum())
        if ll < trace[-1] - ll_tol * max(1.0, abs(trace[-1])):
            raise EMDivergence(f"EM log-likelihood decreased from {trace[-1]} to {ll}")
        trace.append(ll)
        if abs(ll - trace[-2]) <= tol * max(1.0, abs(ll)):
            break
    return weights, sigma, trace


def mixture_quantiles(levels, means, weights, sigma, max_iter: int = 100) -> np.ndarray:
    """Quantiles of ``sum_i w_i N(means_i, sigma_i^2)``.

    Newton steps safeguarded by a bisection bracket. ``means`` is ``(m, K)``;
    returns ``(m, len(levels))``.
    """
    means = np.atleast_2d(means)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (means.shape[1],))
    keep = weights > 0
    means, w, sigma = means[:, keep], weights[keep], sigma[keep]
    levels = np.asarray(levels, dtype=float)
    m, L = means.shape[0], levels.size
    # one entry per (row, level); converged entries drop out of the loop
    row = np.repeat(np.arange(m), L)
    target = np.tile(levels, m)
    lo = (means - 8.0 * sigma).min(axis=1)[row]
    hi = (means + 8.0 * sigma).max(axis=1)[row]
    x = 0.5 * (lo + hi)
    tol = 1e-12 * (hi - lo)
    dx_old = hi - lo
    active = np.arange(row.size)
    scaled_w = w / (sigma * np.sqrt(2 * np.pi))
    for _ in range(max_iter):
        xa, la, ha = x[active], lo[active], hi[active]
        z = (xa[:, None] - means[row[active]]) / sigma
        f = ndtr(z) @ w - target[active]
        dens = np.exp(-0.5 * z * z) @ scaled_w
        la = np.where(f < 0, xa, la)
        ha = np.where(f >= 0, xa, ha)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = xa - f / dens
        # fall back to bisection when Newton leaves the bracket or stops halving
        bad = ~np.isfinite(step) | (step < la) | (step > ha) | (np.abs(2 * f) > np.abs(dx_old[active] * dens))
        new = np.where(bad, 0.5 * (la + ha), step)
        dx = new - xa
        x[active], lo[active], hi[active], dx_old[active] = new, la, ha, dx
        done = (np.abs(dx) <= tol[active]) | (ha - la <= tol[active])
        active = active[~done]
        if active.size == 0:
            break
    return x.reshape(m, L)


class BMA(Calibrator):
    """Gaussian BMA.

    By default members are treated as exchangeable: one shared linear
    correction, uniform weights and one shared scale. ``per_member=True``
    fits a correction, weight and scale for each order statistic.
    """

    method = "bma"

    def __init__(self, grid=None, seed=0, per_member: bool = False, max_iter: int = 1000):
        super().__init__(grid, seed)
        self.per_member = per_member
        self.max_iter = max_iter
        self.params: BmaParams | None = None
        self.loglik_trace: list[float] = []

    def get_config(self):
        return {"per_member": self.per_member, "max_iter": self.max_iter}

    def _fit(self, X, y, leads):
        n, k = X.shape
        if n < 2:
            raise FitError("BMA needs at least two training pairs")
        Xs = np.sort(X, axis=1)
        if self.per_member:
            coefs = [_linear_fit(Xs[:, i], y) for i in range(k)]
            a = np.array([c[0] for c in coefs])
            b = np.array([c[1] for c in coefs])
        else:
            a0, b0 = _linear_fit(Xs.ravel(), np.repeat(y, k))
            a, b = np.full(k, a0), np.full(k, b0)
        means = a + b * Xs
        scale = float(np.std(y)) or 1.0
        sigma0 = max(np.sqrt(np.mean((y[:, None] - means) ** 2)), 1e-3 * scale)
        weights, sigma, trace = em_mixture(
            means, y, np.full(k, 1.0 / k), sigma0, shared=not self.per_member,
            sigma_floor=1e-6 * scale, max_iter=self.max_iter,
        )
        self.params = BmaParams(a, b, weights, sigma)
        self.loglik_trace = trace

    def _predict(self, X, leads):
        p = self.params
        means = p.a + p.b * np.sort(X, axis=1)
        return mixture_quantiles(self.levels, means, p.weights, p.sigma)

    def _get_state(self):
        p = self.params
        return {"a": p.a, "b": p.b, "weights": p.weights, "sigma": p.sigma}

    def _set_state(self, state):
        self.params = BmaParams(**{k: np.asarray(state[k], dtype=float) for k in ("a", "b", "weights", "sigma")})

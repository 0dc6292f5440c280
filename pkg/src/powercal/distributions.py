"""Normal distribution truncated to ``[0, +inf)``.

CDF, quantile function, closed-form CRPS and its gradient with respect to
location and scale. Everything is vectorised over numpy broadcasting.

Write ``a = -mu/sigma`` for the standardised truncation point,
``w = (y - mu)/sigma`` for the standardised observation and
``p = Phi(mu/sigma)`` for the retained mass. The CRPS is

    sigma / p**2 * { w p [2 Phi(w) + p - 2] + 2 p phi(w) - Phi(sqrt(2) mu/sigma) / sqrt(pi) }

which we evaluate as

    sigma * { w (1 - 2 r) + 2 phi(w)/p - Q(sqrt(2) a) / (sqrt(pi) p**2) },   r = Q(w)/p,

with ``Q`` the upper normal tail. Every ratio is formed in log space, so the
result stays finite far into the truncated regime (mu/sigma around -50).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_SQRT_PI = 0.5 * np.log(np.pi)
_SQRT2 = np.sqrt(2.0)


class InvalidParameters(ValueError):
    """Scale is not strictly positive, or the distribution is numerically degenerate."""


@dataclass(frozen=True)
class TruncNormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)) or self.sigma <= 0:
            raise InvalidParameters(f"need finite mu and sigma > 0, got mu={self.mu}, sigma={self.sigma}")


def _check(mu, sigma):
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)) or not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
        raise InvalidParameters("truncated normal needs finite mu and sigma > 0")
    return mu, sigma


def _log_phi(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def _log_upper(z):
    """log Q(z) = log P(Z > z)."""
    return log_ndtr(-z)


def cdf(x, mu, sigma):
    """P(X <= x) for X ~ N(mu, sigma^2) truncated to [0, inf)."""
    mu, sigma = _check(mu, sigma)
    x = np.asarray(x, dtype=float)
    log_p = log_ndtr(mu / sigma)
    log_ratio = np.minimum(_log_upper((x - mu) / sigma) - log_p, 0.0)
    out = np.where(x > 0, -np.expm1(log_ratio), 0.0)
    return out[()] if out.ndim == 0 else out


def quantile(q, mu, sigma):
    """Inverse of :func:`cdf`; exact inversion through the log upper tail."""
    mu, sigma = _check(mu, sigma)
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    # Q(z) = (1 - q) p  =>  z = -Phi^{-1}((1 - q) p)
    log_tail = np.log1p(-q) + log_ndtr(mu / sigma)
    z = -ndtri_exp(log_tail)
    x = mu + sigma * z
    # mu + sigma*z cancels under deep truncation; one Newton step on log Q repairs it
    w = (x - mu) / sigma
    x = x + sigma * (_log_upper(w) - log_tail) * np.exp(_log_upper(w) - _log_phi(w))
    out = np.maximum(x, 0.0)
    return out[()] if out.ndim == 0 else out


def _terms(mu, sigma, y):
    a = -mu / sigma
    w = (y - mu) / sigma
    log_p = log_ndtr(mu / sigma)
    # observations below the support sit at the boundary for the tail ratio
    r = np.exp(_log_upper(np.maximum(w, a)) - log_p)
    phi_w_over_p = np.exp(_log_phi(w) - log_p)
    big_r = np.exp(_log_upper(_SQRT2 * a) - _LOG_SQRT_PI - 2.0 * log_p)
    return a, w, log_p, r, phi_w_over_p, big_r


def crps(mu, sigma, y):
    """Closed-form CRPS of the [0, inf)-truncated normal at observation ``y``."""
    mu, sigma = _check(mu, sigma)
    y = np.asarray(y, dtype=float)
    a, w, log_p, r, phi_w_over_p, big_r = _terms(mu, sigma, y)
    lam = np.exp(_log_phi(a) - log_p)
    above = w * (1.0 - 2.0 * r) + 2.0 * phi_w_over_p - big_r
    # y below the support: E|Z - w| = E[Z] - w
    below = (lam - w) - (big_r - lam)
    out = sigma * np.where(w >= a, above, below)
    if not np.all(np.isfinite(out)):
        raise InvalidParameters("truncated-normal CRPS is not finite for these parameters")
    return out[()] if out.ndim == 0 else out


def crps_grad(mu, sigma, y):
    """Partial derivatives ``(d/dmu, d/dsigma)`` of :func:`crps`."""
    mu, sigma = _check(mu, sigma)
    y = np.asarray(y, dtype=float)
    a, w, log_p, r, phi_w_over_p, big_r = _terms(mu, sigma, y)
    lam = np.exp(_log_phi(a) - log_p)
    # d/da of sqrt(2) phi(sqrt(2) a) / (sqrt(pi) p^2)
    boundary = _SQRT2 * np.exp(_log_phi(_SQRT2 * a) - _LOG_SQRT_PI - 2.0 * log_p)

    g = w * (1.0 - 2.0 * r) + 2.0 * phi_w_over_p - big_r
    g_w = 1.0 - 2.0 * r
    g_a = -2.0 * w * r * lam + 2.0 * phi_w_over_p * lam + boundary - 2.0 * big_r * lam

    # below the support the score is sigma * (lam - w - big_r + lam)
    lam_a = lam * (lam - a)
    g_below = 2.0 * lam - w - big_r
    g_a_below = 2.0 * lam_a + boundary - 2.0 * big_r * lam
    g_w_below = -1.0

    inside = w >= a
    g = np.where(inside, g, g_below)
    g_a = np.where(inside, g_a, g_a_below)
    g_w = np.where(inside, g_w, g_w_below)

    d_mu = -(g_a + g_w)
    d_sigma = g - a * g_a - w * g_w
    if not (np.all(np.isfinite(d_mu)) and np.all(np.isfinite(d_sigma))):
        raise InvalidParameters("truncated-normal CRPS gradient is not finite for these parameters")
    if d_mu.ndim == 0:
        return d_mu[()], d_sigma[()]
    return d_mu, d_sigma


# Wrappers taking a TruncNormalParams.

def tn_cdf(p: TruncNormalParams, x):
    return cdf(x, p.mu, p.sigma)


def tn_quantile(p: TruncNormalParams, q):
    return quantile(q, p.mu, p.sigma)


def tn_crps(p: TruncNormalParams, y):
    return crps(p.mu, p.sigma, y)


def tn_crps_grad(p: TruncNormalParams, y):
    return crps_grad(p.mu, p.sigma, y)

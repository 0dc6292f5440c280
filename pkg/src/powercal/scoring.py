"""Verification metrics: CRPS, pinball loss, ensemble-mean MSE, skill scores, reliability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class UndefinedSkill(ValueError):
    """Raised when a skill score has a non-positive reference metric."""


def crps_empirical(members, y) -> float:
    """CRPS of the ensemble's empirical step CDF against the observation ``y``.

    Uses the energy form ``mean|X - y| - 1/(2K^2) sum_ij |X_i - X_j|``, which
    is exactly the integral of the squared CDF difference for a step CDF.
    """
    x = np.sort(np.asarray(members, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty ensemble")
    if not np.all(np.isfinite(x)):
        raise ValueError("ensemble members must be finite")
    k = x.size
    # sum_ij |x_i - x_j| = 2 sum_i (2i - k - 1) x_(i) on sorted members
    spread = 2.0 * np.dot(2.0 * np.arange(1, k + 1) - k - 1, x)
    return float(np.mean(np.abs(x - y)) - spread / (2.0 * k * k))


def crps_ensembles(members, y) -> np.ndarray:
    """Row-wise :func:`crps_empirical` for an ``(n, K)`` matrix and ``(n,)`` targets."""
    x = np.sort(np.asarray(members, dtype=float), axis=1)
    y = np.asarray(y, dtype=float)
    k = x.shape[1]
    coef = 2.0 * np.arange(1, k + 1) - k - 1
    spread = 2.0 * x @ coef
    return np.mean(np.abs(x - y[:, None]), axis=1) - spread / (2.0 * k * k)


def crps_average(pairs: Iterable) -> float:
    scores = [crps_empirical(members, y) for members, y in pairs]
    if not scores:
        raise ValueError("cannot average CRPS over zero samples")
    return math.fsum(scores) / len(scores)


def pinball(q, yhat, y):
    """Pinball loss of quantile forecast ``yhat`` at level ``q``."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("pinball level must lie strictly inside (0, 1)")
    diff = np.asarray(y, dtype=float) - np.asarray(yhat, dtype=float)
    out = np.where(diff >= 0, q * diff, (q - 1.0) * diff)
    return out[()] if out.ndim == 0 else out


def mse_ensemble_mean(pairs: Iterable) -> float:
    errors = [(float(np.mean(members)) - y) ** 2 for members, y in pairs]
    if not errors:
        raise ValueError("cannot average MSE over zero samples")
    return math.fsum(errors) / len(errors)


def skill_score(metric_sys: float, metric_ref: float) -> float:
    """``1 - sys/ref``; raises :class:`UndefinedSkill` when ``ref <= 0``."""
    if not metric_ref > 0:
        raise UndefinedSkill(f"reference metric must be > 0, got {metric_ref}")
    return 1.0 - metric_sys / metric_ref


def skill_or_nan(metric_sys, metric_ref) -> float:
    try:
        return skill_score(metric_sys, metric_ref)
    except UndefinedSkill:
        return float("nan")


def ensemble_quantile(sorted_members, q) -> np.ndarray:
    """Quantile ``q`` of sorted ensembles by linear interpolation of plotting positions.

    Member ``i`` (1-based) of a K-member ensemble sits at level ``i/(K+1)``;
    levels outside ``[1/(K+1), K/(K+1)]`` take the extreme member.
    Works on a single ensemble or row-wise on an ``(n, K)`` matrix.
    """
    x = np.asarray(sorted_members, dtype=float)
    k = x.shape[-1]
    pos = np.clip(np.asarray(q, dtype=float) * (k + 1) - 1.0, 0.0, k - 1.0)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, k - 1)
    frac = pos - lo
    return x[..., lo] * (1.0 - frac) + x[..., hi] * frac


def reliability_levels(step: float = 0.05) -> np.ndarray:
    n = int(round(1.0 / step))
    if n < 2 or not math.isclose(n * step, 1.0, rel_tol=1e-9):
        raise ValueError(f"grid step must divide 1 into at least two bins, got {step}")
    return np.arange(1, n) / n


@dataclass(frozen=True)
class ReliabilityCurve:
    lead: int
    levels: np.ndarray
    frequencies: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.frequencies - self.levels)))

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.levels.tolist(), self.frequencies.tolist()))


def reliability_frequencies(ensembles, y, grid_step: float = 0.05):
    """Observed frequency of ``y <= ensemble quantile`` at each grid level.

    ``ensembles`` is an ``(n, K)`` matrix whose rows must already be sorted.
    """
    x = np.asarray(ensembles, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("reliability needs a nonempty (n, K) ensemble matrix")
    if np.any(np.diff(x, axis=1) < 0):
        raise ValueError("ensembles must be sorted nondecreasing")
    levels = reliability_levels(grid_step)
    quants = ensemble_quantile(x, levels)
    freq = np.mean(y[:, None] <= quants, axis=0)
    return levels, freq


def reliability_curve(ensembles: Sequence, lead: int = 1, grid_step: float = 0.05) -> ReliabilityCurve:
    """Reliability curve from a sequence of ``(sorted ensemble, y)`` pairs."""
    ensembles = list(ensembles)
    if not ensembles:
        raise ValueError("reliability needs at least one sample")
    x = np.vstack([np.asarray(e, dtype=float) for e, _ in ensembles])
    y = np.array([obs for _, obs in ensembles], dtype=float)
    levels, freq = reliability_frequencies(x, y, grid_step)
    return ReliabilityCurve(lead, levels, freq)


@dataclass(frozen=True)
class ScoreRow:
    lead: int
    method: str
    crps: float
    crpss: float
    mse_ens: float
    msess: float


class ScoreTable(list):
    """Rows of per-lead, per-method scores."""

    columns = ("lead_days", "method", "crps", "crpss", "mse_ens", "msess")

    def get(self, lead: int, method: str) -> ScoreRow:
        for row in self:
            if row.lead == lead and row.method == method:
                return row
        raise KeyError((lead, method))

    def column(self, method: str, name: str) -> tuple[list[int], np.ndarray]:
        rows = sorted((r for r in self if r.method == method), key=lambda r: r.lead)
        return [r.lead for r in rows], np.array([getattr(r, name) for r in rows])

"""Synthetic power scenarios with known, recoverable forecast distortions.

The truth is ``y_t = scale * softplus(level + seasonal_t + AR1_t)``, with
``scale`` chosen so the long-run mean equals ``target_mean``. A raw member
at lead ``l`` verifying on date ``v`` is

    max(0, y_v + bias(l) + r_v * skill(l) * (deflation(l) * xi_{v,i} + shared_sd * eta_v))

``xi`` is per-member noise and ``eta`` a forecast error shared by the whole
ensemble, so no calibrator can remove it. ``r_v`` is a lognormal regime
factor that makes the ensemble spread informative when ``regime_sd > 0``.
Noise is drawn once per valid date and reused across leads, so two leads
differ only through their schedules.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import seasonal_position
from .core import MAX_LEAD, EnsembleForecast, ForecastPanel, ObservationSeries, check_lead

_STREAM_TRUTH, _STREAM_NOISE, _STREAM_HISTORY = 0, 1, 2


def _softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class ScenarioConfig:
    n_dates: int = 730
    leads: tuple[int, ...] = tuple(range(1, MAX_LEAD + 1))
    n_members: int = 51
    start: dt.date = dt.date(2023, 1, 1)
    target_mean: float = 40.0
    level: float = 0.5
    seasonal_amplitude: float = 0.6
    peak_day: float = 15.0
    ar_coef: float = 0.8
    ar_sd: float = 0.7
    bias: float | Sequence[float] = -5.0
    deflation: float | Sequence[float] = 0.5
    skill_start: float = 1.0
    skill_plateau: float = 7.0
    saturation_lead: int = 15
    skill: Sequence[float] | None = None
    shared_sd: float = 1.0
    regime_sd: float = 0.25
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "leads", tuple(check_lead(l) for l in self.leads))
        if self.n_dates < 1:
            raise ValueError("n_dates must be >= 1")
        if self.n_members < 2:
            raise ValueError("need at least two members")
        if not self.leads:
            raise ValueError("need at least one lead time")
        if not 0 <= self.ar_coef < 1:
            raise ValueError("AR coefficient must lie in [0, 1)")
        if self.ar_sd < 0 or self.shared_sd < 0 or self.regime_sd < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if self.target_mean <= 0:
            raise ValueError("target mean must be > 0")
        self.bias_schedule()
        rho = self.deflation_schedule()
        if np.any((rho <= 0) | (rho > 1)):
            raise ValueError("dispersion deflation must lie in (0, 1]")
        s = self.skill_schedule()
        if np.any(s < 0):
            raise ValueError("skill schedule must be >= 0")
        order = np.argsort(self.leads)
        if np.any(np.diff(s[order]) < 0):
            raise ValueError("skill schedule must be nondecreasing in lead time")

    def _per_lead(self, value, name):
        try:
            return np.broadcast_to(np.asarray(value, dtype=float), (len(self.leads),)).astype(float)
        except ValueError:
            raise ValueError(f"{name} schedule must be a scalar or one value per lead") from None

    def bias_schedule(self) -> np.ndarray:
        return self._per_lead(self.bias, "bias")

    def deflation_schedule(self) -> np.ndarray:
        return self._per_lead(self.deflation, "deflation")

    def skill_schedule(self) -> np.ndarray:
        """Forecast-error scale per lead; linear up to ``saturation_lead`` then flat."""
        if self.skill is not None:
            return self._per_lead(self.skill, "skill")
        leads = np.asarray(self.leads, dtype=float)
        span = max(self.saturation_lead - 1, 1)
        frac = np.clip((leads - 1) / span, 0.0, 1.0)
        return self.skill_start + (self.skill_plateau - self.skill_start) * frac


@dataclass(frozen=True)
class TruthMetadata:
    """What the generator knows and a calibrator should recover."""

    config: ScenarioConfig
    scale: float
    bias: dict[int, float]
    deflation: dict[int, float]
    skill: dict[int, float]
    truth: dict[dt.date, float] = field(repr=False)

    def ideal_spread_ratio(self, lead: int) -> float:
        """Predictive std over raw member std once the bias is removed."""
        rho = self.deflation[lead]
        k = self.config.n_members
        return float(np.sqrt(self.config.shared_sd**2 + rho**2 / k) / rho)


def _scale_for_mean(cfg: ScenarioConfig) -> float:
    # E[softplus(level + seasonal + AR)] over a uniform phase and the stationary AR law
    nodes, weights = np.polynomial.hermite_e.hermegauss(60)
    weights = weights / weights.sum()
    phase = np.arange(365) / 365.0
    seasonal = cfg.seasonal_amplitude * np.cos(2 * np.pi * phase)
    z = cfg.level + seasonal[:, None] + cfg.ar_sd * nodes[None, :]
    return cfg.target_mean / float(np.mean(_softplus(z) @ weights))


def _seasonal(cfg: ScenarioConfig, days) -> np.ndarray:
    pos = np.array([seasonal_position(d) for d in days])
    return cfg.seasonal_amplitude * np.cos(2 * np.pi * (pos - cfg.peak_day) / 365.0)


def _ar_path(cfg: ScenarioConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if cfg.ar_sd == 0:
        return np.zeros(n)
    innov_sd = cfg.ar_sd * np.sqrt(1 - cfg.ar_coef**2)
    eps = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = cfg.ar_sd * eps[0]
    for t in range(1, n):
        out[t] = cfg.ar_coef * out[t - 1] + innov_sd * eps[t]
    return out


def _truth(cfg: ScenarioConfig, days, rng) -> np.ndarray:
    z = cfg.level + _seasonal(cfg, days) + _ar_path(cfg, len(days), rng)
    return _scale_for_mean(cfg) * _softplus(z)


def _streams(cfg: ScenarioConfig):
    return np.random.SeedSequence(cfg.seed).spawn(3)


def generate(cfg: ScenarioConfig) -> tuple[ForecastPanel, ObservationSeries, TruthMetadata]:
    """Build the raw forecast panel, the observations and the ground-truth metadata."""
    streams = _streams(cfg)
    max_lead = max(cfg.leads)
    n_days = cfg.n_dates + max_lead
    days = [cfg.start + dt.timedelta(days=i) for i in range(n_days)]
    y = _truth(cfg, days, np.random.default_rng(streams[_STREAM_TRUTH]))

    noise_rng = np.random.default_rng(streams[_STREAM_NOISE])
    xi = noise_rng.standard_normal((n_days, cfg.n_members))
    eta = noise_rng.standard_normal(n_days)
    regime = np.exp(cfg.regime_sd * noise_rng.standard_normal(n_days) - 0.5 * cfg.regime_sd**2)

    bias, rho, skill = cfg.bias_schedule(), cfg.deflation_schedule(), cfg.skill_schedule()
    forecasts = []
    for j, lead in enumerate(cfg.leads):
        v = np.arange(cfg.n_dates) + lead
        noise = regime[v, None] * skill[j] * (rho[j] * xi[v] + cfg.shared_sd * eta[v, None])
        members = np.maximum(0.0, y[v, None] + bias[j] + noise)
        for i in range(cfg.n_dates):
            forecasts.append(EnsembleForecast(days[i], lead, members[i]))

    obs = ObservationSeries(zip(days, y))
    meta = TruthMetadata(
        config=cfg,
        scale=_scale_for_mean(cfg),
        bias=dict(zip(cfg.leads, bias.tolist())),
        deflation=dict(zip(cfg.leads, rho.tolist())),
        skill=dict(zip(cfg.leads, skill.tolist())),
        truth=dict(zip(days, y.tolist())),
    )
    return ForecastPanel(forecasts), obs, meta


def history(cfg: ScenarioConfig, years: int) -> ObservationSeries:
    """Truth series for the ``years`` calendar years before the scenario start."""
    if years < 1:
        raise ValueError("history needs at least one year")
    try:
        first = cfg.start.replace(year=cfg.start.year - years)
    except ValueError:  # Feb 29 start
        first = dt.date(cfg.start.year - years, 3, 1)
    n = (cfg.start - first).days
    days = [first + dt.timedelta(days=i) for i in range(n)]
    y = _truth(cfg, days, np.random.default_rng(_streams(cfg)[_STREAM_HISTORY]))
    return ObservationSeries(zip(days, y))

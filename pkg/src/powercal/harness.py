"""Online expanding-window evaluation and training-size convergence study.

For every lead time the pairs are ordered by issue date. The pair at
position ``i >= warmup`` is predicted by a calibrator fitted on pairs
``0..i-1`` only, so the first ``warmup`` dates get no calibrated output.
"""

from __future__ import annotations

import datetime as dt
import inspect
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .baselines import ClimatologyStore
from .core import CalibratedEnsemble, ForecastPanel, ObservationSeries, align, stack_pairs
from .postprocessors import METHODS, FitError, make_calibrator
from .scoring import ReliabilityCurve, ScoreRow, ScoreTable, crps_ensembles, reliability_frequencies, skill_or_nan

log = logging.getLogger(__name__)

RAW = "raw"
BOOTSTRAP = "climatological_bootstrap"
CLIMATOLOGY = "climatology"

DEFAULT_STRIDES = {"qr": 5, "qrf": 10, "qrn": 10, "drn": 10}


@dataclass(frozen=True)
class OnlineConfig:
    warmup: int = 30
    methods: tuple[str, ...] = ("emos", "qr")
    leads: tuple[int, ...] | None = None
    seed: int = 0
    grid_size: int | None = None
    refit_stride: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_STRIDES))
    method_options: Mapping[str, Mapping] = field(default_factory=dict)
    reliability_step: float = 0.05
    bootstrap_half_width: int = 1
    bootstrap_draws: int | None = None

    def __post_init__(self):
        if self.warmup < 2:
            raise ValueError("warm-up size must be >= 2")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {sorted(METHODS)}")
        if any(int(s) < 1 for s in self.refit_stride.values()):
            raise ValueError("refit strides must be >= 1")

    def stride(self, method: str) -> int:
        return int(self.refit_stride.get(method, 1))

    def options(self, method: str) -> dict:
        opts = dict(self.method_options.get(method, {}))
        # warm starts pay off when the same model is refitted date after date
        if "warm_start" in inspect.signature(METHODS[method]).parameters:
            opts.setdefault("warm_start", True)
        return opts


@dataclass
class OnlineResult:
    calibrated: dict[str, list[CalibratedEnsemble]]
    scores: ScoreTable
    reliability: dict[tuple[int, str], ReliabilityCurve]
    warnings: list[str]
    evaluation_dates: dict[int, list[dt.date]]


def _bootstrap_seed(seed: int, lead: int, day: dt.date) -> list[int]:
    return [int(seed), int(lead), day.toordinal()]


def _online_predictions(method, config, grid_size, X, y, leads_arr, warnings, lead):
    """Expanding-window predictions for positions ``warmup..n-1`` (NaN rows where fitting failed)."""
    n = X.shape[0]
    cal = make_calibrator(method, grid_size, config.seed, **config.options(method))
    out = np.full((n, grid_size), np.nan)
    stride = config.stride(method)
    last_fit = None
    for i in range(config.warmup, n):
        if last_fit is None or i - last_fit >= stride:
            try:
                cal.fit(X[:i], y[:i], None if leads_arr is None else leads_arr[:i])
                last_fit = i
            except FitError as exc:
                warnings.append(f"lead {lead} {method}: fit on {i} pairs failed ({exc})")
        if cal.fitted:
            out[i] = cal.predict_quantiles(X[i], None if leads_arr is None else leads_arr[i])
    return out


def _joint_predictions(method, config, grid_size, per_lead, warnings):
    """One calibrator for all leads, with lead time as a feature.

    At each issue date it is fitted on every pair (any lead) issued earlier.
    """
    cal = make_calibrator(method, grid_size, config.seed, **config.options(method))
    pooled = sorted(
        (d, lead, i) for lead, (dates, _, _) in per_lead.items() for i, d in enumerate(dates)
    )
    outputs = {lead: np.full((len(dates), grid_size), np.nan) for lead, (dates, _, _) in per_lead.items()}
    issue_days = sorted({d for d, _, _ in pooled})
    stride = config.stride(method)
    last_fit = None
    cursor = 0
    for k, day in enumerate(issue_days):
        while cursor < len(pooled) and pooled[cursor][0] < day:
            cursor += 1
        targets = [(lead, i) for d, lead, i in pooled[cursor:] if d == day and i >= config.warmup]
        if not targets:
            continue
        if last_fit is None or k - last_fit >= stride:
            train = pooled[:cursor]
            Xtr = np.vstack([per_lead[l][1][i] for _, l, i in train])
            ytr = np.array([per_lead[l][2][i] for _, l, i in train])
            ltr = np.array([l for _, l, _ in train], dtype=float)
            try:
                cal.fit(Xtr, ytr, ltr)
                last_fit = k
            except FitError as exc:
                warnings.append(f"{method} joint fit before {day} failed ({exc})")
        if cal.fitted:
            for lead, i in targets:
                outputs[lead][i] = cal.predict_quantiles(per_lead[lead][1][i], lead)
    return outputs


def run_online(panel: ForecastPanel, obs: ObservationSeries, config: OnlineConfig,
               history: ObservationSeries | None = None) -> OnlineResult:
    """Online post-processing of every lead and method, plus scores and reliability.

    ``history`` feeds the climatology and bootstrap baselines; without it the
    skill columns are NaN and the bootstrap row is omitted.
    """
    leads = list(config.leads) if config.leads else panel.leads
    grid_size = config.grid_size or panel.n_members
    store = None
    if history is not None:
        store = ClimatologyStore(history, config.bootstrap_half_width, config.bootstrap_draws or panel.n_members)
    warnings: list[str] = []

    per_lead = {}
    for lead in leads:
        pairs = align(panel, obs, lead)
        if len(pairs) < config.warmup + 1:
            msg = f"lead {lead}: only {len(pairs)} aligned pairs, need {config.warmup + 1}; skipped"
            log.warning(msg)
            warnings.append(msg)
            continue
        X, y = stack_pairs(pairs)
        per_lead[lead] = ([p.issue_date for p in pairs], X, y)

    preds: dict[str, dict[int, np.ndarray]] = {}
    for method in config.methods:
        joint = bool(config.method_options.get(method, {}).get("use_lead", False))
        if joint:
            preds[method] = _joint_predictions(method, config, grid_size, per_lead, warnings)
        else:
            preds[method] = {
                lead: _online_predictions(method, config, grid_size, X, y, None, warnings, lead)
                for lead, (_, X, y) in per_lead.items()
            }

    calibrated = {m: [] for m in config.methods}
    scores = ScoreTable()
    reliability = {}
    eval_dates = {}
    for lead, (dates, X, y) in per_lead.items():
        idx = np.arange(config.warmup, len(dates))
        ok = np.ones(idx.size, bool)
        for method in config.methods:
            ok &= ~np.isnan(preds[method][lead][idx, 0])
            for i in idx:
                row = preds[method][lead][i]
                if not np.isnan(row[0]):
                    calibrated[method].append(CalibratedEnsemble(dates[i], lead, row))

        valid = [dates[i] + dt.timedelta(days=lead) for i in idx]
        clim = np.full(idx.size, np.nan)
        boot = None
        if store is not None:
            boot = np.full((idx.size, store.draws), np.nan)
            for j, day in enumerate(valid):
                try:
                    clim[j] = store.climatology_mean(day)
                    boot[j] = np.sort(store.bootstrap_ensemble(day, _bootstrap_seed(config.seed, lead, day)))
                except ValueError as exc:
                    warnings.append(f"lead {lead}: no climatology for {day} ({exc}); date excluded")
                    ok[j] = False
        sel = idx[ok]
        if sel.size == 0:
            warnings.append(f"lead {lead}: no date where every method has output")
            continue
        eval_dates[lead] = [dates[i] for i in sel]
        y_eval = y[sel]

        ensembles = {RAW: np.sort(X[sel], axis=1)}
        if boot is not None:
            ensembles[BOOTSTRAP] = boot[ok]
        for method in config.methods:
            ensembles[method] = preds[method][lead][sel]

        if store is not None:
            clim_eval = clim[ok]
            clim_crps = float(np.mean(np.abs(clim_eval - y_eval)))
            clim_mse = float(np.mean((clim_eval - y_eval) ** 2))
            scores.append(ScoreRow(lead, CLIMATOLOGY, clim_crps, 0.0, clim_mse, 0.0))
        else:
            clim_crps = clim_mse = float("nan")
        for name, ens in ensembles.items():
            c = float(np.mean(crps_ensembles(ens, y_eval)))
            mse = float(np.mean((ens.mean(axis=1) - y_eval) ** 2))
            scores.append(ScoreRow(lead, name, c, skill_or_nan(c, clim_crps), mse, skill_or_nan(mse, clim_mse)))
            levels, freq = reliability_frequencies(ens, y_eval, config.reliability_step)
            reliability[(lead, name)] = ReliabilityCurve(lead, levels, freq)

    return OnlineResult(calibrated, scores, reliability, warnings, eval_dates)


@dataclass(frozen=True)
class ConvergenceRow:
    training_size: int
    method: str
    crps: float


class ConvergenceCurve(list):
    columns = ("training_size", "method", "crps")

    def series(self, method: str) -> tuple[list[int], np.ndarray]:
        rows = [r for r in self if r.method == method]
        return [r.training_size for r in rows], np.array([r.crps for r in rows])


def convergence_study(panel: ForecastPanel, obs: ObservationSeries, sizes: Sequence[int],
                      methods: Sequence[str] = ("emos", "qr"), seed: int = 0,
                      method_options: Mapping[str, Mapping] | None = None,
                      grid_size: int | None = None, leads: Sequence[int] | None = None) -> ConvergenceCurve:
    """Fit on the first ``s`` pairs of every lead, score the rest, average CRPS over leads."""
    sizes = sorted(set(int(s) for s in sizes))
    if not sizes:
        raise ValueError("convergence study needs at least one training size")
    method_options = method_options or {}
    grid_size = grid_size or panel.n_members
    data = {}
    for lead in (leads or panel.leads):
        X, y = stack_pairs(align(panel, obs, lead))
        if X.shape[0] < sizes[-1] + 1:
            raise ValueError(f"lead {lead} has {X.shape[0]} pairs; largest training size needs {sizes[-1] + 1}")
        data[lead] = (X, y)
    curve = ConvergenceCurve()
    for size in sizes:
        for method in methods:
            per_lead = []
            for lead, (X, y) in data.items():
                cal = make_calibrator(method, grid_size, seed, **dict(method_options.get(method, {})))
                lead_arr = np.full(X.shape[0], float(lead))
                cal.fit(X[:size], y[:size], lead_arr[:size])
                q = cal.predict_quantiles(X[size:], lead_arr[size:])
                per_lead.append(float(np.mean(crps_ensembles(q, y[size:]))))
            curve.append(ConvergenceRow(size, method, float(np.mean(per_lead))))
    return curve

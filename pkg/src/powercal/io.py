"""CSV formats for forecasts, observations and every output table."""

from __future__ import annotations

import csv
import datetime as dt
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import DomainError, EnsembleForecast, ForecastPanel, ObservationSeries, check_lead

FORMAT_VERSION = "1.0"

FORECAST_COLUMNS = ("issue_date", "lead_days", "member", "value")
OBSERVATION_COLUMNS = ("date", "value")
SCORE_COLUMNS = ("lead_days", "method", "crps", "crpss", "mse_ens", "msess")
RELIABILITY_COLUMNS = ("lead_days", "method", "quantile", "frequency")
CONVERGENCE_COLUMNS = ("training_size", "method", "crps")
CALIBRATED_COLUMNS = ("issue_date", "lead_days", "method", "quantile", "value")


class FormatError(ValueError):
    """A file does not follow its documented schema."""


def _rows(path, columns):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None
    with fh:
        try:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != columns:
                raise FormatError(f"{path}:1: expected header {','.join(columns)}, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(columns):
                    raise FormatError(f"{path}:{lineno}: expected {len(columns)} fields, got {len(row)}")
                yield lineno, row
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: not valid UTF-8 ({exc})") from None


def _date(text, path, lineno):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise FormatError(f"{path}:{lineno}: bad ISO-8601 date {text!r}") from None


def _float(text, path, lineno):
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: bad number {text!r}") from None


def load_forecasts(path) -> ForecastPanel:
    """Read ``issue_date,lead_days,member,value`` rows into a panel."""
    members: dict[tuple[dt.date, int], dict[int, float]] = defaultdict(dict)
    for lineno, (issue, lead, member, value) in _rows(path, FORECAST_COLUMNS):
        day = _date(issue, path, lineno)
        try:
            lead_i, member_i = int(lead), int(member)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: lead_days and member must be integers") from None
        try:
            check_lead(lead_i)
        except DomainError as exc:
            raise DomainError(f"{path}:{lineno}: {exc}") from None
        slot = members[(day, lead_i)]
        if member_i in slot:
            raise FormatError(f"{path}:{lineno}: duplicate row for {day} lead {lead_i} member {member_i}")
        slot[member_i] = _float(value, path, lineno)
    forecasts = []
    for (day, lead), slot in members.items():
        values = [slot[m] for m in sorted(slot)]
        forecasts.append(EnsembleForecast(day, lead, np.array(values)))
    return ForecastPanel(forecasts)


def load_observations(path) -> ObservationSeries:
    values = {}
    for lineno, (day_s, value) in _rows(path, OBSERVATION_COLUMNS):
        day = _date(day_s, path, lineno)
        if day in values:
            raise FormatError(f"{path}:{lineno}: duplicate date {day}")
        y = _float(value, path, lineno)
        if y < 0:
            raise DomainError(f"{path}:{lineno}: observation must be >= 0, got {y}")
        values[day] = y
    return ObservationSeries(values)


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return "nan" if np.isnan(x) else repr(float(x))
    if isinstance(x, dt.date):
        return x.isoformat()
    return str(x)


def write_table(path, columns, rows: Iterable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path, columns) -> list[dict]:
    return [dict(zip(columns, row)) for _, row in _rows(path, columns)]


def write_forecasts(path, panel: ForecastPanel) -> None:
    write_table(path, FORECAST_COLUMNS, (
        (day, lead, m, float(v))
        for (day, lead), fc in panel.items() for m, v in enumerate(fc.members)
    ))


def write_observations(path, obs: ObservationSeries) -> None:
    write_table(path, OBSERVATION_COLUMNS, ((d, float(v)) for d, v in obs.items()))


def write_scores(path, table) -> None:
    write_table(path, SCORE_COLUMNS, (
        (r.lead, r.method, r.crps, r.crpss, r.mse_ens, r.msess)
        for r in sorted(table, key=lambda r: (r.lead, r.method))
    ))


def write_reliability(path, curves) -> None:
    rows = []
    for (lead, method), curve in sorted(curves.items()):
        rows.extend((lead, method, float(q), float(f)) for q, f in zip(curve.levels, curve.frequencies))
    write_table(path, RELIABILITY_COLUMNS, rows)


def write_calibrated(path, calibrated, levels) -> None:
    rows = []
    for method in sorted(calibrated):
        for ens in sorted(calibrated[method], key=lambda e: (e.issue_date, e.lead)):
            rows.extend((ens.issue_date, ens.lead, method, float(q), float(v))
                        for q, v in zip(levels, ens.quantile_values))
    write_table(path, CALIBRATED_COLUMNS, rows)


def write_convergence(path, curve) -> None:
    write_table(path, CONVERGENCE_COLUMNS, ((r.training_size, r.method, r.crps) for r in curve))


@dataclass
class RunManifest:
    """Inputs and settings of one CLI run, written next to its outputs."""

    forecasts: str | None = None
    obs: str | None = None
    history: str | None = None
    methods: list[str] = field(default_factory=list)
    warmup: int = 30
    grid_size: int | None = None
    seed: int = 0
    out: str = "."
    format_version: str = FORMAT_VERSION

    def check_inputs(self) -> None:
        for name in ("forecasts", "obs", "history"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{name} file not found: {path}")

    def write(self, directory) -> None:
        Path(directory, "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
                                                   encoding="utf-8")

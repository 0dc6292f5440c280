"""Shared data model: ensemble forecasts, observations, quantile grids.

All containers are immutable once built. Dates are plain ``datetime.date``
objects (daily resolution, no time zone).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np

MIN_LEAD = 1
MAX_LEAD = 46


class DomainError(ValueError):
    """A value violates a domain invariant (negative power, bad lead, ...)."""


def check_lead(days: int) -> int:
    days = int(days)
    if not MIN_LEAD <= days <= MAX_LEAD:
        raise DomainError(f"lead time must be within [{MIN_LEAD}, {MAX_LEAD}] days, got {days}")
    return days


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EnsembleForecast:
    """One raw ensemble: the members issued on ``issue_date`` for ``lead`` days ahead."""

    issue_date: dt.date
    lead: int
    members: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lead", check_lead(self.lead))
        members = _readonly(self.members)
        if members.ndim != 1 or members.size < 2:
            raise DomainError("an ensemble needs a 1-d vector of at least 2 members")
        if not np.all(np.isfinite(members)):
            raise DomainError(f"non-finite member in forecast {self.issue_date} lead {self.lead}")
        object.__setattr__(self, "members", members)

    @property
    def valid_date(self) -> dt.date:
        return self.issue_date + dt.timedelta(days=self.lead)

    @property
    def size(self) -> int:
        return self.members.size


class ForecastPanel(Mapping):
    """All forecasts of one series keyed by ``(issue_date, lead)``.

    Every forecast in a panel carries the same member count.
    """

    def __init__(self, forecasts: Iterable[EnsembleForecast]):
        entries: dict[tuple[dt.date, int], EnsembleForecast] = {}
        n_members = None
        for fc in forecasts:
            key = (fc.issue_date, fc.lead)
            if key in entries:
                raise DomainError(f"duplicate forecast for issue date {key[0]} lead {key[1]}")
            if n_members is None:
                n_members = fc.size
            elif fc.size != n_members:
                raise DomainError(
                    f"forecast {key[0]} lead {key[1]} has {fc.size} members, panel has {n_members}"
                )
            entries[key] = fc
        self._entries = MappingProxyType(dict(sorted(entries.items())))
        self.n_members = n_members or 0

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self) -> Iterator[tuple[dt.date, int]]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other):
        if not isinstance(other, ForecastPanel) or list(self) != list(other):
            return False
        return all(np.array_equal(self[k].members, other[k].members) for k in self)

    __hash__ = None

    @property
    def leads(self) -> list[int]:
        return sorted({lead for _, lead in self._entries})

    @property
    def issue_dates(self) -> list[dt.date]:
        return sorted({d for d, _ in self._entries})

    def at_lead(self, lead: int) -> list[EnsembleForecast]:
        """Forecasts for one lead time in issue-date order."""
        return [fc for (_, ld), fc in self._entries.items() if ld == lead]


class ObservationSeries(Mapping):
    """Dated nonnegative observations, stored in date order."""

    def __init__(self, values: Mapping[dt.date, float] | Iterable[tuple[dt.date, float]]):
        items = values.items() if isinstance(values, Mapping) else values
        data: dict[dt.date, float] = {}
        for day, y in items:
            y = float(y)
            if not np.isfinite(y) or y < 0:
                raise DomainError(f"observation on {day} must be finite and >= 0, got {y}")
            if day in data:
                raise DomainError(f"duplicate observation date {day}")
            data[day] = y
        self._data = MappingProxyType(dict(sorted(data.items())))

    def __getitem__(self, day):
        return self._data[day]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __eq__(self, other):
        return isinstance(other, ObservationSeries) and dict(self._data) == dict(other._data)

    __hash__ = None

    def to_arrays(self) -> tuple[list[dt.date], np.ndarray]:
        return list(self._data), np.fromiter(self._data.values(), float, len(self._data))


@dataclass(frozen=True)
class QuantileGrid:
    """The evaluation levels ``i / (K + 1)`` for ``i = 1..K``."""

    K: int
    levels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.K) < 1:
            raise ValueError(f"quantile grid size must be >= 1, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "levels", _readonly(np.arange(1, self.K + 1) / (self.K + 1)))

    def __len__(self):
        return self.K


def quantile_grid(K: int) -> QuantileGrid:
    return QuantileGrid(K)


@dataclass(frozen=True)
class CalibratedEnsemble:
    """Post-processed quantile values for one (issue date, lead)."""

    issue_date: dt.date
    lead: int
    quantile_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lead", check_lead(self.lead))
        values = _readonly(self.quantile_values)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("calibrated ensemble needs a nonempty 1-d quantile vector")
        if not np.all(np.isfinite(values)):
            raise DomainError("calibrated quantiles must be finite")
        if np.any(np.diff(values) < 0):
            raise DomainError("calibrated quantiles must be nondecreasing")
        if values[0] < 0:
            raise DomainError("calibrated quantiles must be >= 0")
        object.__setattr__(self, "quantile_values", values)


class AlignedPair(NamedTuple):
    issue_date: dt.date
    members: np.ndarray
    y: float


def align(panel: ForecastPanel, obs: ObservationSeries, lead: int) -> list[AlignedPair]:
    """Pair every forecast at ``lead`` with the observation on its valid date.

    Forecasts whose valid date has no observation are dropped silently.
    """
    lead = check_lead(lead)
    pairs = []
    for fc in panel.at_lead(lead):
        y = obs.get(fc.valid_date)
        if y is not None:
            pairs.append(AlignedPair(fc.issue_date, fc.members, y))
    return pairs


def stack_pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Split aligned pairs into an ``(n, K)`` member matrix and an ``(n,)`` target vector."""
    pairs = list(pairs)
    if not pairs:
        return np.empty((0, 0)), np.empty(0)
    X = np.vstack([p.members for p in pairs])
    y = np.array([p.y for p in pairs], dtype=float)
    return X, y

"""Reference forecasts: point climatology and windowed climatological bootstrap."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .core import ObservationSeries

_YEAR = 365.0


def seasonal_position(day: dt.date) -> float:
    """Day-of-year on a 365-day circle; Feb 29 sits at 59.5 between Feb 28 and Mar 1."""
    doy = day.timetuple().tm_yday
    leap = day.year % 4 == 0 and (day.year % 100 != 0 or day.year % 400 == 0)
    if not leap or doy < 60:
        return float(doy)
    if doy == 60:
        return 59.5
    return float(doy - 1)


def _circular_distance(a, b):
    d = np.abs(np.asarray(a) - b) % _YEAR
    return np.minimum(d, _YEAR - d)


@dataclass(frozen=True)
class ClimatologyStore:
    """Historical daily series queried by day-of-year windows.

    ``half_width`` is ``w``: the bootstrap pool spans ``2w + 1`` calendar days
    around the target in every historical year. ``draws`` is the ensemble size.
    """

    history: ObservationSeries
    half_width: int = 1
    draws: int = 51
    _pos: np.ndarray = field(init=False, repr=False, compare=False)
    _values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("window half-width must be >= 0")
        if self.draws < 1:
            raise ValueError("bootstrap draw count must be >= 1")
        days, values = self.history.to_arrays()
        object.__setattr__(self, "_pos", np.array([seasonal_position(d) for d in days]))
        object.__setattr__(self, "_values", values)

    def window(self, target: dt.date, half_width: int) -> np.ndarray:
        mask = _circular_distance(self._pos, seasonal_position(target)) <= half_width
        return self._values[mask]

    def pool(self, target: dt.date) -> np.ndarray:
        return self.window(target, self.half_width)

    def climatology_mean(self, target: dt.date) -> float:
        """Mean of the same day-of-year over all historical years."""
        same_day = self.window(target, 0)
        if same_day.size == 0:
            raise ValueError(f"no historical value on the day-of-year of {target}")
        return float(np.mean(same_day))

    def bootstrap_ensemble(self, target: dt.date, seed) -> np.ndarray:
        pool = self.pool(target)
        if pool.size == 0:
            raise ValueError(f"empty bootstrap pool around {target}")
        rng = np.random.default_rng(seed)
        return pool[rng.integers(0, pool.size, size=self.draws)]


def climatology_mean(store: ClimatologyStore, target_date: dt.date) -> float:
    return store.climatology_mean(target_date)


def bootstrap_ensemble(store: ClimatologyStore, target_date: dt.date, seed) -> np.ndarray:
    return store.bootstrap_ensemble(target_date, seed)

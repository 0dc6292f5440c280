"""Weather-side preparation: shear extrapolation, capacity weighting, ensemble thinning."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

DEFAULT_SHEAR_EXPONENT = 1.0 / 7.0

Cell = tuple[int, int]
CellDate = tuple[int, int, dt.date]


def shear_extrapolate(u10, alpha: float = DEFAULT_SHEAR_EXPONENT, z_ref: float = 10.0, z_hub: float = 100.0):
    """Power-law extrapolation of a wind speed from ``z_ref`` to ``z_hub`` metres."""
    u10 = np.asarray(u10, dtype=float)
    if np.any(u10 < 0):
        raise ValueError("wind speed must be >= 0")
    out = u10 * (z_hub / z_ref) ** alpha
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class GridField:
    """Values of one weather variable on a set of grid cells at one date."""

    date: dt.date
    values: Mapping[Cell, float]

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.values.values()):
            raise ValueError("grid field values must be finite")


class CapacityMap:
    """Installed capacity in MW per grid cell and date."""

    def __init__(self, capacity: Mapping[CellDate, float]):
        for key, mw in capacity.items():
            if not mw >= 0:
                raise ValueError(f"capacity must be >= 0, got {mw} at {key}")
        self.capacity = dict(sorted(capacity.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])))

    @classmethod
    def from_csv(cls, path) -> "CapacityMap":
        """Read ``lat_index,lon_index,date,capacity_mw`` rows."""
        capacity = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                try:
                    key = (int(row["lat_index"]), int(row["lon_index"]), dt.date.fromisoformat(row["date"]))
                    mw = float(row["capacity_mw"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{Path(path).name}:{lineno}: malformed capacity row ({exc})") from None
                if key in capacity:
                    raise ValueError(f"{Path(path).name}:{lineno}: duplicate capacity entry {key}")
                capacity[key] = mw
        return cls(capacity)


def capacity_weights(cap: CapacityMap, per_date: bool = False) -> dict[CellDate, float]:
    """Capacity share of every (cell, date).

    By default the denominator sums over cells *and* dates, so all weights
    together sum to one. ``per_date=True`` normalises within each date instead.
    """
    if per_date:
        totals: dict[dt.date, float] = {}
        for (_, _, day), mw in cap.capacity.items():
            totals[day] = totals.get(day, 0.0) + mw
        if any(t <= 0 for t in totals.values()) or not totals:
            raise ValueError("every date needs positive total capacity")
        return {key: mw / totals[key[2]] for key, mw in cap.capacity.items()}
    total = sum(cap.capacity.values())
    if not total > 0:
        raise ValueError("total capacity must be > 0")
    return {key: mw / total for key, mw in cap.capacity.items()}


def weighted_field(field: GridField, weights: Mapping[CellDate, float]) -> float:
    """Capacity-weighted sum of a field at its date (cells without weight count as zero)."""
    return float(sum(v * weights.get((i, j, field.date), 0.0) for (i, j), v in field.values.items()))


def thin_ensemble(members, k_target: int, seed) -> np.ndarray:
    """Draw ``k_target`` members uniformly without replacement, deterministically per seed."""
    members = np.asarray(members, dtype=float)
    if not 1 <= k_target <= members.size:
        raise ValueError(f"cannot keep {k_target} of {members.size} members")
    if k_target == members.size:
        return members.copy()
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(members.size, size=k_target, replace=False))
    return members[idx]

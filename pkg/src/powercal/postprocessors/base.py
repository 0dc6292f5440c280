"""Common calibrator contract: fit on past pairs, emit K sorted nonnegative quantiles."""

from __future__ import annotations

import base64
import json
import pickle
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from ..core import CalibratedEnsemble, EnsembleForecast, QuantileGrid

FORMAT = "powercal-calibrator/1"


class FitError(RuntimeError):
    """Fitting failed; ``diagnostics`` carries whatever the optimiser reported."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotFittedError(RuntimeError):
    pass


def ensemble_mean_spread(members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row means and standard deviations (ddof=1) of an ``(n, K)`` member matrix."""
    return members.mean(axis=1), members.std(axis=1, ddof=1)


def finalize_quantiles(values: np.ndarray) -> np.ndarray:
    """Sort each row and clip at zero so rows satisfy the calibrated-ensemble contract."""
    return np.maximum(np.sort(values, axis=-1), 0.0)


class Calibrator:
    """Base class for the eight post-processing methods.

    Subclasses implement ``_fit`` and ``_predict`` on ``(n, K)`` member
    matrices and expose their fitted state through ``_get_state`` /
    ``_set_state`` for serialisation.
    """

    method: ClassVar[str] = ""
    uses_lead: bool = False

    def __init__(self, grid: QuantileGrid | int | None = None, seed: int = 0):
        self.grid = QuantileGrid(grid) if isinstance(grid, int) else grid
        self.seed = seed
        self.n_members: int | None = None
        self.fitted = False

    # -- public API -------------------------------------------------------

    def fit(self, members, y, leads=None):
        X = np.asarray(members, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("members must be (n, K) and y must be (n,)")
        if X.shape[1] < 2:
            raise ValueError("ensembles need at least two members")
        if self.grid is None:
            self.grid = QuantileGrid(X.shape[1])
        self.n_members = X.shape[1]
        leads = None if leads is None else np.asarray(leads, dtype=float)
        self._fit(X, y, leads)
        self.fitted = True
        return self

    def predict_quantiles(self, members, leads=None) -> np.ndarray:
        """Calibrated quantiles for one ensemble ``(K,)`` or a batch ``(m, K)``."""
        if not self.fitted:
            raise NotFittedError(f"{self.method} calibrator used before fit")
        X = np.asarray(members, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_members:
            raise ValueError(f"expected {self.n_members} members, got {X.shape[1]}")
        if leads is not None:
            leads = np.broadcast_to(np.asarray(leads, dtype=float), (X.shape[0],))
        out = finalize_quantiles(self._predict(X, leads))
        return out[0] if single else out

    def predict(self, raw: EnsembleForecast) -> CalibratedEnsemble:
        values = self.predict_quantiles(raw.members, leads=raw.lead if self.uses_lead else None)
        return CalibratedEnsemble(raw.issue_date, raw.lead, values)

    @property
    def levels(self) -> np.ndarray:
        return self.grid.levels

    # -- subclass hooks ---------------------------------------------------

    def _fit(self, X, y, leads):
        raise NotImplementedError

    def _predict(self, X, leads):
        raise NotImplementedError

    def _get_state(self) -> dict[str, Any]:
        raise NotImplementedError

    def _set_state(self, state: dict[str, Any]) -> None:
        raise NotImplementedError

    def get_config(self) -> dict[str, Any]:
        return {}


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.tolist(), "dtype": str(value.dtype)}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value):
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=value["dtype"])
        if "__pickle__" in value:
            return pickle.loads(base64.b64decode(value["__pickle__"]))
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def pickled(obj) -> dict:
    """Wrap an opaque object (e.g. a fitted forest) for the JSON calibrator file."""
    return {"__pickle__": base64.b64encode(pickle.dumps(obj)).decode("ascii")}


def calibrator_to_dict(cal: Calibrator) -> dict:
    if not cal.fitted:
        raise NotFittedError("only fitted calibrators can be serialised")
    return {
        "format": FORMAT,
        "method": cal.method,
        "grid_size": cal.grid.K,
        "seed": cal.seed,
        "n_members": cal.n_members,
        "config": _encode(cal.get_config()),
        "params": _encode(cal._get_state()),
    }


def calibrator_from_dict(blob: dict) -> Calibrator:
    from . import METHODS

    if blob.get("format") != FORMAT:
        raise ValueError(f"unsupported calibrator format {blob.get('format')!r}")
    cls = METHODS[blob["method"]]
    cal = cls(grid=int(blob["grid_size"]), seed=blob["seed"], **_decode(blob["config"]))
    cal.n_members = int(blob["n_members"])
    cal._set_state(_decode(blob["params"]))
    cal.fitted = True
    return cal


def save_calibrator(cal: Calibrator, path) -> None:
    Path(path).write_text(json.dumps(calibrator_to_dict(cal)), encoding="utf-8")


def load_calibrator(path) -> Calibrator:
    return calibrator_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

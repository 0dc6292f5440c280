"""Statistical post-processing of ensemble power forecasts."""

from .core import (
    MAX_LEAD,
    MIN_LEAD,
    AlignedPair,
    CalibratedEnsemble,
    DomainError,
    EnsembleForecast,
    ForecastPanel,
    ObservationSeries,
    QuantileGrid,
    align,
    quantile_grid,
    stack_pairs,
)
from .harness import OnlineConfig, OnlineResult, convergence_study, run_online
from .postprocessors import METHODS, Calibrator, FitError, make_calibrator

__version__ = "0.1.0"

__all__ = [
    "MAX_LEAD", "MIN_LEAD", "AlignedPair", "CalibratedEnsemble", "DomainError", "EnsembleForecast",
    "ForecastPanel", "ObservationSeries", "QuantileGrid", "align", "quantile_grid", "stack_pairs",
    "OnlineConfig", "OnlineResult", "convergence_study", "run_online",
    "METHODS", "Calibrator", "FitError", "make_calibrator",
]

"""The eight calibration methods behind one fit/predict contract."""

from .base import (
    Calibrator,
    FitError,
    NotFittedError,
    calibrator_from_dict,
    calibrator_to_dict,
    load_calibrator,
    save_calibrator,
)
from .bma import BMA, BmaParams, EMDivergence
from .drn import DRN
from .emos import EMOS, EmosParams
from .mbm import MBM, MbmParams
from .moe import ExpertAggregator, MixtureOfExperts
from .networks import NetworkParams
from .qr import QuantileRegression
from .qrf import QRF
from .qrn import QRN

METHODS = {
    "emos": EMOS,
    "bma": BMA,
    "mbm": MBM,
    "drn": DRN,
    "qr": QuantileRegression,
    "moe": MixtureOfExperts,
    "qrf": QRF,
    "qrn": QRN,
}


def make_calibrator(method: str, grid=None, seed: int = 0, **options) -> Calibrator:
    try:
        cls = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None
    return cls(grid=grid, seed=seed, **options)


def _fit(method, members, y, leads=None, grid=None, seed=0, **options):
    return make_calibrator(method, grid, seed, **options).fit(members, y, leads)


def fit_emos(members, y, **kw): return _fit("emos", members, y, **kw)
def fit_bma(members, y, **kw): return _fit("bma", members, y, **kw)
def fit_mbm(members, y, **kw): return _fit("mbm", members, y, **kw)
def fit_drn(members, y, **kw): return _fit("drn", members, y, **kw)
def fit_qr(members, y, **kw): return _fit("qr", members, y, **kw)
def fit_qrf(members, y, **kw): return _fit("qrf", members, y, **kw)
def fit_qrn(members, y, **kw): return _fit("qrn", members, y, **kw)


def fit_moe(members, y, algorithm: str = "ewa", **kw):
    return _fit("moe", members, y, algorithm=algorithm, **kw)


def predict(calibrator: Calibrator, raw):
    return calibrator.predict(raw)


__all__ = [
    "METHODS", "Calibrator", "FitError", "NotFittedError", "make_calibrator", "predict",
    "EMOS", "EmosParams", "BMA", "BmaParams", "EMDivergence", "MBM", "MbmParams", "DRN",
    "QuantileRegression", "MixtureOfExperts", "ExpertAggregator", "QRF", "QRN", "NetworkParams",
    "fit_emos", "fit_bma", "fit_mbm", "fit_drn", "fit_qr", "fit_moe", "fit_qrf", "fit_qrn",
    "save_calibrator", "load_calibrator", "calibrator_to_dict", "calibrator_from_dict",
]

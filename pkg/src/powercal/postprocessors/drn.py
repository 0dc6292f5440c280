"""Distributional regression network: ensemble mean and spread in, truncated-normal parameters out."""

from __future__ import annotations

import numpy as np

from .. import distributions as tn
from .base import Calibrator, FitError, ensemble_mean_spread
from .networks import MLP, NetworkParams, inv_softplus, sigmoid, softplus, train

SIGMA_FLOOR = 1e-6


class DRN(Calibrator):
    """Network mapping (mean, spread) to (mu, sigma) of a [0, inf)-truncated normal.

    Trained full-batch with Adam on the mean closed-form CRPS. ``hidden_units=0``
    gives the affine, EMOS-like variant.
    """

    method = "drn"

    def __init__(self, grid=None, seed=0, hidden_units: int = 16, lr: float = 0.01,
                 max_epochs: int = 3000, patience: int = 100, min_delta: float = 1e-6,
                 warm_start: bool = False):
        super().__init__(grid, seed)
        self.hidden_units = hidden_units
        self.lr = lr
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_delta = min_delta
        self.warm_start = warm_start
        sizes = (2, hidden_units, 2) if hidden_units else (2, 2)
        self.net = MLP(sizes)
        self.params: NetworkParams | None = None
        self._norm = None

    def get_config(self):
        return {"hidden_units": self.hidden_units, "lr": self.lr, "max_epochs": self.max_epochs,
                "patience": self.patience, "min_delta": self.min_delta, "warm_start": self.warm_start}

    def _features(self, X):
        xbar, s = ensemble_mean_spread(X)
        fm, fs = self._norm["x_mean"], self._norm["x_std"]
        return (np.column_stack([xbar, s]) - fm) / fs

    def outputs_to_params(self, out):
        ym, ys = self._norm["y_mean"], self._norm["y_std"]
        mu = ym + ys * out[:, 0]
        sigma = ys * (softplus(out[:, 1]) + SIGMA_FLOOR)
        return mu, sigma

    def loss_and_grad(self, flat, x, y):
        """Mean CRPS in units of the target scale, and its gradient w.r.t. ``flat``."""
        out, acts = self.net.forward(flat, x)
        mu, sigma = self.outputs_to_params(out)
        ys = self._norm["y_std"]
        n = y.size
        loss = float(np.mean(tn.crps(mu, sigma, y))) / ys
        g_mu, g_sigma = tn.crps_grad(mu, sigma, y)
        grad_out = np.column_stack([g_mu, g_sigma * sigmoid(out[:, 1])]) / n
        return loss, self.net.backward(flat, acts, grad_out)

    def _fit(self, X, y, leads):
        if X.shape[0] < 2:
            raise FitError("DRN needs at least two training pairs")
        xbar, s = ensemble_mean_spread(X)
        feats = np.column_stack([xbar, s])
        y_std = float(np.std(y)) or 1.0
        self._norm = {
            "x_mean": feats.mean(axis=0),
            "x_std": np.where(feats.std(axis=0) > 0, feats.std(axis=0), 1.0),
            "y_mean": float(np.mean(y)),
            "y_std": y_std,
        }
        x = self._features(X)
        if self.warm_start and self.params is not None:
            flat = self.params.flat.copy()
        else:
            rng = np.random.default_rng(self.seed)
            flat = self.net.init(rng)
            flat[self.net.output_bias_slice()] = [0.0, inv_softplus(0.5)]
        try:
            flat, loss, history = train(
                lambda p: self.loss_and_grad(p, x, y), flat,
                lr=self.lr, max_epochs=self.max_epochs, patience=self.patience, min_delta=self.min_delta,
            )
        except (FloatingPointError, tn.InvalidParameters) as exc:
            raise FitError(f"DRN training aborted: {exc}", {"method": "drn"}) from exc
        self.params = NetworkParams(self.net.sizes, flat)
        self.train_crps = loss * y_std
        self.n_epochs = len(history)

    def distribution(self, X):
        out, _ = self.net.forward(self.params.flat, self._features(np.atleast_2d(X)))
        return self.outputs_to_params(out)

    def _predict(self, X, leads):
        mu, sigma = self.distribution(X)
        return tn.quantile(self.levels[None, :], mu[:, None], sigma[:, None])

    def _get_state(self):
        return {"flat": self.params.flat, "norm": dict(self._norm)}

    def _set_state(self, state):
        self.params = NetworkParams(self.net.sizes, np.asarray(state["flat"], dtype=float))
        norm = state["norm"]
        self._norm = {
            "x_mean": np.asarray(norm["x_mean"], dtype=float),
            "x_std": np.asarray(norm["x_std"], dtype=float),
            "y_mean": float(norm["y_mean"]),
            "y_std": float(norm["y_std"]),
        }

"""Quantile regression network with non-crossing outputs.

The last layer emits a base value and K-1 raw increments; increments pass
through softplus and are cumulatively summed, so every output vector is
sorted whatever the parameters.
"""

from __future__ import annotations

import numpy as np

from ..core import MAX_LEAD
from .base import Calibrator, FitError
from .networks import MLP, NetworkParams, inv_softplus, sigmoid, softplus, train


def pinball_grad(levels, pred, y):
    """Subgradient of the pinball loss w.r.t. the prediction: ``1{y < pred} - q``."""
    return (y[:, None] < pred).astype(float) - levels[None, :]


class QRN(Calibrator):
    method = "qrn"

    def __init__(self, grid=None, seed=0, hidden_units: int = 32, use_lead: bool = False,
                 lr: float = 0.005, max_epochs: int = 3000, patience: int = 150,
                 min_delta: float = 1e-6, warm_start: bool = False):
        super().__init__(grid, seed)
        self.hidden_units = hidden_units
        self.uses_lead = use_lead
        self.lr = lr
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_delta = min_delta
        self.warm_start = warm_start
        self.net: MLP | None = None
        self.params: NetworkParams | None = None
        self._norm = None

    def get_config(self):
        return {"hidden_units": self.hidden_units, "use_lead": self.uses_lead, "lr": self.lr,
                "max_epochs": self.max_epochs, "patience": self.patience,
                "min_delta": self.min_delta, "warm_start": self.warm_start}

    def _build(self, n_inputs):
        k = self.grid.K
        sizes = (n_inputs, self.hidden_units, k) if self.hidden_units else (n_inputs, k)
        self.net = MLP(sizes)

    def _features(self, X, leads):
        x = (np.sort(X, axis=1) - self._norm["x_mean"]) / self._norm["x_std"]
        if self.uses_lead:
            if leads is None:
                raise ValueError("this QRN was fitted with lead time as a feature; pass leads")
            x = np.column_stack([x, np.asarray(leads, dtype=float) / MAX_LEAD])
        return x

    @staticmethod
    def outputs_to_standard_quantiles(out):
        """Cumulative sum of [base, softplus(increments)]."""
        steps = np.concatenate([out[:, :1], softplus(out[:, 1:])], axis=1)
        return np.cumsum(steps, axis=1)

    def loss_and_grad(self, flat, x, y_std_units):
        """Mean pinball loss over samples and grid levels (standardised units) and its gradient."""
        out, acts = self.net.forward(flat, x)
        q = self.outputs_to_standard_quantiles(out)
        levels = self.levels
        diff = y_std_units[:, None] - q
        loss = float(np.mean(np.where(diff >= 0, levels * diff, (levels - 1.0) * diff)))
        g_q = pinball_grad(levels, q, y_std_units) / q.size
        # d q_k / d step_j = 1 for j <= k  ->  reverse cumulative sum
        g_steps = np.cumsum(g_q[:, ::-1], axis=1)[:, ::-1]
        grad_out = np.concatenate([g_steps[:, :1], g_steps[:, 1:] * sigmoid(out[:, 1:])], axis=1)
        return loss, self.net.backward(flat, acts, grad_out)

    def _fit(self, X, y, leads):
        if X.shape[0] < 2:
            raise FitError("QRN needs at least two training pairs")
        if self.uses_lead and leads is None:
            raise ValueError("QRN with use_lead=True needs lead times at fit")
        x_std = float(np.std(X))
        y_std = float(np.std(y)) or 1.0
        self._norm = {"x_mean": float(np.mean(X)), "x_std": x_std if x_std > 0 else 1.0,
                      "y_mean": float(np.mean(y)), "y_std": y_std}
        x = self._features(X, leads)
        ys = (y - self._norm["y_mean"]) / y_std
        reuse = self.warm_start and self.params is not None and self.net is not None and self.net.sizes[0] == x.shape[1]
        if reuse:
            flat = self.params.flat.copy()
        else:
            self._build(x.shape[1])
            rng = np.random.default_rng(self.seed)
            flat = self.net.init(rng) * 0.1
            # start from the unconditional quantiles of the training targets
            start = np.quantile(ys, self.levels)
            gaps = np.maximum(np.diff(start), 1e-3)
            flat[self.net.output_bias_slice()] = np.concatenate([[start[0]], inv_softplus(gaps)])
        try:
            flat, loss, history = train(
                lambda p: self.loss_and_grad(p, x, ys), flat,
                lr=self.lr, max_epochs=self.max_epochs, patience=self.patience, min_delta=self.min_delta,
            )
        except FloatingPointError as exc:
            raise FitError(f"QRN training aborted: {exc}", {"method": "qrn"}) from exc
        self.params = NetworkParams(self.net.sizes, flat)
        self.train_loss = loss * y_std
        self.n_epochs = len(history)

    def _predict(self, X, leads):
        out, _ = self.net.forward(self.params.flat, self._features(X, leads))
        return self._norm["y_mean"] + self._norm["y_std"] * self.outputs_to_standard_quantiles(out)

    def _get_state(self):
        return {"sizes": list(self.net.sizes), "flat": self.params.flat, "norm": dict(self._norm)}

    def _set_state(self, state):
        self.net = MLP(state["sizes"])
        self.params = NetworkParams(self.net.sizes, np.asarray(state["flat"], dtype=float))
        self._norm = {k: float(v) for k, v in state["norm"].items()}

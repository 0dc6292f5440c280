"""Online aggregation of the sorted members, one convex mixture per grid level."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .base import Calibrator

ALGORITHMS = ("ewa", "fixed_share")


class ExpertAggregator:
    """Exponentially weighted average forecaster over ``n_experts``.

    Weights may carry leading batch dimensions (one simplex per batch entry).
    With ``eta=None`` the learning rate is tuned online as
    ``sqrt(8 ln K / t) / B`` where ``B`` is the largest per-round loss range
    seen so far; pass ``eta`` explicitly for a fixed rate.
    ``fixed_share`` mixes ``share`` of uniform mass back in after every update.
    """

    def __init__(self, n_experts: int, batch_shape=(), algorithm: str = "ewa",
                 eta: float | None = None, share: float = 0.01):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown aggregation algorithm {algorithm!r}; choose from {ALGORITHMS}")
        self.n_experts = n_experts
        self.algorithm = algorithm
        self.eta = eta
        self.share = share
        shape = tuple(batch_shape) + (n_experts,)
        self.log_weights = np.full(shape, -np.log(n_experts))
        self.cum_losses = np.zeros(shape)
        self.cum_mixture_loss = np.zeros(tuple(batch_shape))
        self.loss_range = np.zeros(tuple(batch_shape))
        self.t = 0

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def current_eta(self):
        if self.eta is not None:
            return np.full(self.loss_range.shape, float(self.eta))
        with np.errstate(divide="ignore", invalid="ignore"):
            eta = np.sqrt(8.0 * np.log(self.n_experts) / max(self.t, 1)) / self.loss_range
        return np.where(self.loss_range > 0, eta, 0.0)

    def update(self, expert_losses, mixture_loss=None):
        """Record one round of losses and move the weights."""
        losses = np.asarray(expert_losses, dtype=float)
        if mixture_loss is None:
            mixture_loss = np.sum(self.weights * losses, axis=-1)
        self.cum_mixture_loss = self.cum_mixture_loss + mixture_loss
        self.cum_losses = self.cum_losses + losses
        self.t += 1
        self.loss_range = np.maximum(self.loss_range, np.ptp(losses, axis=-1))
        eta = self.current_eta()[..., None]
        if self.algorithm == "ewa" and self.eta is None:
            # rate changes each round: recompute from cumulative losses
            logits = -eta * self.cum_losses
        else:
            logits = self.log_weights - eta * losses
        logits = logits - logsumexp(logits, axis=-1, keepdims=True)
        if self.algorithm == "fixed_share":
            k = self.n_experts
            logits = np.logaddexp(np.log1p(-self.share) + logits, np.log(self.share / k))
        self.log_weights = logits

    @property
    def regret(self):
        """Cumulative mixture loss minus the best single expert's cumulative loss."""
        return self.cum_mixture_loss - self.cum_losses.min(axis=-1)


class MixtureOfExperts(Calibrator):
    """Per-level convex combination of the sorted members, learned sequentially.

    Pairs are consumed in the order given (date order). With ``gradient=True``
    each expert is charged the linearised pinball loss ``g * x_k`` where ``g``
    is the pinball subgradient at the current mixture prediction.
    """

    method = "moe"

    def __init__(self, grid=None, seed=0, algorithm: str = "ewa", eta: float | None = None,
                 share: float = 0.01, gradient: bool = True):
        super().__init__(grid, seed)
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown aggregation algorithm {algorithm!r}; choose from {ALGORITHMS}")
        self.algorithm = algorithm
        self.eta = eta
        self.share = share
        self.gradient = gradient
        self.weights: np.ndarray | None = None
        self.weight_history: list[np.ndarray] = []
        self._record = False

    def get_config(self):
        return {"algorithm": self.algorithm, "eta": self.eta, "share": self.share, "gradient": self.gradient}

    def _fit(self, X, y, leads):
        k_raw = X.shape[1]
        levels = self.levels
        agg = ExpertAggregator(k_raw, (levels.size,), self.algorithm, self.eta, self.share)
        Xs = np.sort(X, axis=1)
        self.weight_history = []
        for x, obs in zip(Xs, y):
            pred = agg.weights @ x
            if self.gradient:
                g = (obs < pred).astype(float) - levels
                losses = g[:, None] * x[None, :]
                agg.update(losses, mixture_loss=g * pred)
            else:
                diff = obs - x[None, :]
                losses = np.where(diff >= 0, levels[:, None] * diff, (levels[:, None] - 1) * diff)
                d = obs - pred
                agg.update(losses, mixture_loss=np.where(d >= 0, levels * d, (levels - 1) * d))
            if self._record:
                self.weight_history.append(agg.weights)
        self.aggregator = agg
        self.weights = agg.weights

    def fit(self, members, y, leads=None, record_weights: bool = False):
        """Fit sequentially; ``record_weights`` keeps the weights after every round."""
        self._record = record_weights
        return super().fit(members, y, leads)

    def _predict(self, X, leads):
        return np.sort(X, axis=1) @ self.weights.T

    def _get_state(self):
        return {"weights": self.weights}

    def _set_state(self, state):
        self.weights = np.asarray(state["weights"], dtype=float)

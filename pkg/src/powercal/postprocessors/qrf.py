"""Quantile regression forest.

Trees are grown by scikit-learn; each leaf keeps the empirical CDF of the
training targets that land in it, and a prediction averages those leaf CDFs
over the trees before reading off the grid quantiles.
"""

from __future__ import annotations

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from ..core import MAX_LEAD
from .base import Calibrator, FitError, pickled


def forest_weights(train_leaves, leaves) -> np.ndarray:
    """Per-training-row weights of the averaged leaf CDFs.

    ``train_leaves`` is ``(n, T)`` and ``leaves`` is ``(m, T)`` leaf indices;
    returns ``(m, n)`` rows summing to one.
    """
    n, n_trees = train_leaves.shape
    weights = np.zeros((leaves.shape[0], n))
    for t in range(n_trees):
        same = leaves[:, t][:, None] == train_leaves[:, t][None, :]
        weights += same / same.sum(axis=1, keepdims=True)
    return weights / n_trees


def weighted_quantiles(sorted_targets, weights, levels) -> np.ndarray:
    """``inf{y : F(y) >= q}`` for the weighted empirical CDF of each weight row."""
    cdf = np.cumsum(weights, axis=1)
    out = np.empty((weights.shape[0], len(levels)))
    for i, row in enumerate(cdf):
        idx = np.searchsorted(row, np.asarray(levels) - 1e-12, side="left")
        out[i] = sorted_targets[np.minimum(idx, sorted_targets.size - 1)]
    return out


class QRF(Calibrator):
    method = "qrf"

    def __init__(self, grid=None, seed=0, n_trees: int = 200, min_leaf: int = 5,
                 max_features="sqrt", bootstrap: bool = True, use_lead: bool = False):
        super().__init__(grid, seed)
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.uses_lead = use_lead
        self.forest: RandomForestRegressor | None = None

    def get_config(self):
        return {"n_trees": self.n_trees, "min_leaf": self.min_leaf, "max_features": self.max_features,
                "bootstrap": self.bootstrap, "use_lead": self.uses_lead}

    def _features(self, X, leads):
        x = np.sort(X, axis=1)
        if self.uses_lead:
            if leads is None:
                raise ValueError("this QRF was fitted with lead time as a feature; pass leads")
            x = np.column_stack([x, np.asarray(leads, dtype=float) / MAX_LEAD])
        return x

    def _fit(self, X, y, leads):
        if X.shape[0] < self.min_leaf:
            raise FitError(f"QRF needs at least min_leaf={self.min_leaf} pairs, got {X.shape[0]}")
        if self.uses_lead and leads is None:
            raise ValueError("QRF with use_lead=True needs lead times at fit")
        x = self._features(X, leads)
        self.forest = RandomForestRegressor(
            n_estimators=self.n_trees, min_samples_leaf=self.min_leaf, max_features=self.max_features,
            bootstrap=self.bootstrap, random_state=self.seed, n_jobs=1,
        ).fit(x, y)
        order = np.argsort(y, kind="stable")
        self._targets = y[order]
        self._train_leaves = self.forest.apply(x)[order]

    def _predict(self, X, leads):
        leaves = self.forest.apply(self._features(X, leads))
        w = forest_weights(self._train_leaves, leaves)
        return weighted_quantiles(self._targets, w, self.levels)

    def _get_state(self):
        return {"forest": pickled(self.forest), "targets": self._targets, "train_leaves": self._train_leaves}

    def _set_state(self, state):
        self.forest = state["forest"]
        self._targets = np.asarray(state["targets"], dtype=float)
        self._train_leaves = np.asarray(state["train_leaves"])

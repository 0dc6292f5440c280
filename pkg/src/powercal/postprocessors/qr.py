"""Linear quantile regression on the sorted raw members, one model per grid level."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .base import Calibrator, FitError

SAMPLES_PER_PREDICTOR = 10
# order statistics are nearly collinear; a handful of block means does as well out of sample
MAX_AUTO_PREDICTORS = 5


def fit_linear_quantile(A, y, q):
    """Minimise the mean pinball loss of ``A @ beta`` at level ``q``.

    Solves the LP dual ``max y.d  s.t.  A^T d = 0,  q - 1 <= d <= q``; the
    primal coefficients are the (negated) equality multipliers.
    """
    res = linprog(-y, A_eq=A.T, b_eq=np.zeros(A.shape[1]), bounds=(q - 1.0, q), method="highs")
    if res.status != 0:
        raise FitError(f"quantile LP failed at level {q}: {res.message}", {"status": res.status})
    return -res.eqlin.marginals


def block_means(sorted_members, n_blocks: int) -> np.ndarray:
    """Means of ``n_blocks`` contiguous groups of order statistics (``n_blocks == K`` is the identity)."""
    k = sorted_members.shape[1]
    if n_blocks >= k:
        return sorted_members
    groups = np.array_split(np.arange(k), n_blocks)
    return np.column_stack([sorted_members[:, g].mean(axis=1) for g in groups])


class QuantileRegression(Calibrator):
    """One pinball-loss linear model per grid level on the order statistics.

    ``n_predictors=None`` averages the order statistics into at most five
    contiguous blocks, fewer when there are under ten samples per
    coefficient, so the design stays well overdetermined.
    ``n_predictors=0`` fits intercepts only.
    """

    method = "qr"

    def __init__(self, grid=None, seed=0, n_predictors: int | None = None):
        super().__init__(grid, seed)
        self.n_predictors = n_predictors
        self.coef: np.ndarray | None = None
        self.keep: np.ndarray | None = None
        self.n_blocks = 0

    def get_config(self):
        return {"n_predictors": self.n_predictors}

    def _choose_blocks(self, n, k):
        if self.n_predictors is not None:
            return min(int(self.n_predictors), k)
        return max(1, min(k, MAX_AUTO_PREDICTORS, n // SAMPLES_PER_PREDICTOR - 1))

    def _design(self, X):
        if self.n_blocks == 0:
            return np.ones((X.shape[0], 1))
        feats = block_means(np.sort(X, axis=1), self.n_blocks)[:, self.keep]
        return np.column_stack([np.ones(X.shape[0]), feats])

    def _fit(self, X, y, leads):
        n, k = X.shape
        self.n_blocks = self._choose_blocks(n, k)
        if self.n_blocks:
            feats = block_means(np.sort(X, axis=1), self.n_blocks)
            scale = max(np.max(np.abs(feats)), 1.0)
            # constant predictors duplicate the intercept
            self.keep = np.ptp(feats, axis=0) > 1e-12 * scale
            if not self.keep.any():
                self.n_blocks = 0
        if n < (int(self.keep.sum()) if self.n_blocks else 0) + 1:
            raise FitError(f"quantile regression needs more pairs than predictors, got {n}")
        A = self._design(X)
        self.coef = np.column_stack([fit_linear_quantile(A, y, q) for q in self.levels])

    def _predict(self, X, leads):
        return self._design(X) @ self.coef

    def _get_state(self):
        return {"coef": self.coef, "keep": self.keep if self.keep is not None else np.zeros(0, bool),
                "n_blocks": self.n_blocks}

    def _set_state(self, state):
        self.coef = np.asarray(state["coef"], dtype=float)
        self.keep = np.asarray(state["keep"], dtype=bool)
        self.n_blocks = int(state["n_blocks"])

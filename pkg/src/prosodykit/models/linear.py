"""Joint linear regression baseline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DataError
from .validation import check_xy


class LinearRegressor(BaseEstimator):
    """Least squares via normal equations, solved jointly for 3 outputs.

    A tiny ridge keeps the Gram matrix invertible when feature columns
    are duplicated or constant; the intercept is never penalized.
    """

    kind = "linreg"

    def __init__(self, ridge: float = 1e-8):
        self.ridge = ridge

    def fit(self, X, Y):
        X, Y = check_xy(X, Y)
        if X.shape[0] < 1:
            raise DataError("need at least one training row")
        n, d = X.shape
        design = np.hstack([X, np.ones((n, 1))])
        gram = design.T @ design
        penalty = np.full(d + 1, self.ridge)
        penalty[d] = 0.0
        gram[np.diag_indices_from(gram)] += penalty
        solution = np.linalg.solve(gram, design.T @ Y)
        self.coef_ = solution[:d]
        self.intercept_ = solution[d]
        self.input_dims_ = d
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

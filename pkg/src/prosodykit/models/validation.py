"""Input checks shared by the model estimators."""

from __future__ import annotations

import numpy as np

from ..errors import DataError


def check_matrix(name, X, ndim=2):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != ndim:
        raise DataError("%s must be %d-dimensional, got %d" % (name, ndim, X.ndim))
    if not np.all(np.isfinite(X)):
        raise DataError("%s contains non-finite values" % name)
    return X


def check_xy(X, Y, x_ndim=2, y_cols=3):
    X = check_matrix("X", X, ndim=x_ndim)
    Y = check_matrix("Y", Y, ndim=x_ndim)
    if X.shape[0] != Y.shape[0]:
        raise DataError(
            "X and Y row counts differ: %d vs %d" % (X.shape[0], Y.shape[0])
        )
    if Y.shape[-1] != y_cols:
        raise DataError("Y must have %d columns, got %d" % (y_cols, Y.shape[-1]))
    return X, Y

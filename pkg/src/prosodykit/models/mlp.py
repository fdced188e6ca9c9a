"""Two-hidden-layer MLP trained with Adam on MSE, in plain numpy.

Analytic gradients are exposed so their correctness can be verified
against finite differences; everything runs in float64 so runs with a
fixed seed are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DataError, TrainingDiverged
from .optim import Adam
from .validation import check_xy

N_OUTPUTS = 3


class MlpRegressor(BaseEstimator):
    """ReLU MLP with two hidden layers and a linear 3-unit output."""

    kind = "mlp"

    def __init__(
        self,
        hidden=(10, 10),
        seed: int = 0,
        lr: float = 1e-3,
        batch_size: int = 32,
        epochs: int = 200,
    ):
        self.hidden = hidden
        self.seed = seed
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs

    def _initialize(self, input_dims, rng):
        h1, h2 = self.hidden
        if h1 < 1 or h2 < 1:
            raise DataError("hidden layer sizes must be >= 1")
        # He init on the ReLU layers, Glorot on the linear output.
        self.params_ = {
            "W1": rng.normal(0.0, np.sqrt(2.0 / input_dims), (input_dims, h1)),
            "b1": np.zeros(h1),
            "W2": rng.normal(0.0, np.sqrt(2.0 / h1), (h1, h2)),
            "b2": np.zeros(h2),
            "W3": rng.uniform(
                -np.sqrt(6.0 / (h2 + N_OUTPUTS)),
                np.sqrt(6.0 / (h2 + N_OUTPUTS)),
                (h2, N_OUTPUTS),
            ),
            "b3": np.zeros(N_OUTPUTS),
        }
        self.input_dims_ = input_dims

    def _forward(self, X):
        p = self.params_
        h1 = np.maximum(X @ p["W1"] + p["b1"], 0.0)
        h2 = np.maximum(h1 @ p["W2"] + p["b2"], 0.0)
        out = h2 @ p["W3"] + p["b3"]
        return h1, h2, out

    def loss_and_gradients(self, X, Y):
        """MSE over all outputs and its gradient for every parameter."""
        p = self.params_
        h1, h2, out = self._forward(X)
        diff = out - Y
        loss = float(np.mean(diff * diff))
        dout = 2.0 * diff / diff.size
        grads = {
            "W3": h2.T @ dout,
            "b3": dout.sum(axis=0),
        }
        dh2 = (dout @ p["W3"].T) * (h2 > 0.0)
        grads["W2"] = h1.T @ dh2
        grads["b2"] = dh2.sum(axis=0)
        dh1 = (dh2 @ p["W2"].T) * (h1 > 0.0)
        grads["W1"] = X.T @ dh1
        grads["b1"] = dh1.sum(axis=0)
        return loss, grads

    def fit(self, X, Y, X_val=None, Y_val=None):
        X, Y = check_xy(X, Y)
        if X.shape[0] < 1:
            raise DataError("need at least one training row")
        if X_val is not None:
            X_val, Y_val = check_xy(X_val, Y_val)
        rng = np.random.default_rng(self.seed)
        self._initialize(X.shape[1], rng)
        optimizer = Adam(self.params_, lr=self.lr)
        n = X.shape[0]
        self.training_log_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = order[start:start + self.batch_size]
                loss, grads = self.loss_and_gradients(X[batch], Y[batch])
                if not np.isfinite(loss):
                    raise TrainingDiverged(epoch)
                optimizer.step(self.params_, grads)
            train_loss = self._loss(X, Y)
            if not np.isfinite(train_loss):
                raise TrainingDiverged(epoch)
            entry = {"epoch": epoch, "train_loss": train_loss}
            if X_val is not None:
                entry["val_loss"] = self._loss(X_val, Y_val)
            self.training_log_.append(entry)
        return self

    def _loss(self, X, Y):
        _, _, out = self._forward(X)
        return float(np.mean((out - Y) ** 2))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self._forward(X)[2]

"""Bidirectional LSTM over short segment windows, in plain numpy.

Each input window of L consecutive segment feature rows is read forward
and backward by two LSTMs (hidden size 40 each); the concatenated
per-timestep states feed a tanh dense layer and a linear 3-unit output,
so every position in the window gets a prediction.  Backpropagation
through time is written out by hand and verified against finite
differences in the test suite.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DataError, TrainingDiverged
from .optim import Adam
from .validation import check_matrix
from .windows import sliding_window_predict

N_OUTPUTS = 3


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class BiLstmRegressor(BaseEstimator):
    """Joint 3-attribute sequence regressor with per-timestep outputs."""

    kind = "bilstm"

    def __init__(
        self,
        hidden_size: int = 40,
        dense_size: int = 20,
        seed: int = 0,
        lr: float = 1e-3,
        batch_size: int = 32,
        epochs: int = 30,
        val_fraction: float = 0.15,
        min_windows: int = 10,
    ):
        self.hidden_size = hidden_size
        self.dense_size = dense_size
        self.seed = seed
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.val_fraction = val_fraction
        self.min_windows = min_windows

    # --- parameters ---

    def _initialize(self, input_dims, rng):
        h = self.hidden_size
        gates = 4 * h
        self.params_ = {}
        for prefix in ("fwd", "bwd"):
            self.params_[prefix + "_Wx"] = _glorot(
                rng, input_dims, gates, (input_dims, gates)
            )
            self.params_[prefix + "_Wh"] = _glorot(rng, h, gates, (h, gates))
            bias = np.zeros(gates)
            bias[h:2 * h] = 1.0  # open forget gates at the start of training
            self.params_[prefix + "_b"] = bias
        self.params_["Wd"] = _glorot(
            rng, 2 * h, self.dense_size, (2 * h, self.dense_size)
        )
        self.params_["bd"] = np.zeros(self.dense_size)
        self.params_["Wo"] = _glorot(
            rng, self.dense_size, N_OUTPUTS, (self.dense_size, N_OUTPUTS)
        )
        self.params_["bo"] = np.zeros(N_OUTPUTS)
        self.input_dims_ = input_dims

    # --- forward / backward ---

    def _run_direction(self, X, prefix):
        p = self.params_
        Wx, Wh, b = p[prefix + "_Wx"], p[prefix + "_Wh"], p[prefix + "_b"]
        batch, length, _ = X.shape
        h_size = self.hidden_size
        hs = np.zeros((batch, length, h_size))
        h = np.zeros((batch, h_size))
        c = np.zeros((batch, h_size))
        steps = range(length - 1, -1, -1) if prefix == "bwd" else range(length)
        cache = []
        for t in steps:
            z = X[:, t] @ Wx + h @ Wh + b
            gate_i = _sigmoid(z[:, :h_size])
            gate_f = _sigmoid(z[:, h_size:2 * h_size])
            gate_g = np.tanh(z[:, 2 * h_size:3 * h_size])
            gate_o = _sigmoid(z[:, 3 * h_size:])
            c_new = gate_f * c + gate_i * gate_g
            cache.append((t, h, c, gate_i, gate_f, gate_g, gate_o, c_new))
            h = gate_o * np.tanh(c_new)
            c = c_new
            hs[:, t] = h
        return hs, cache

    def _direction_backward(self, X, cache, d_hs, prefix):
        p = self.params_
        Wx, Wh = p[prefix + "_Wx"], p[prefix + "_Wh"]
        d_wx = np.zeros_like(Wx)
        d_wh = np.zeros_like(Wh)
        d_b = np.zeros(Wx.shape[1])
        dh_carry = np.zeros((X.shape[0], self.hidden_size))
        dc_carry = np.zeros_like(dh_carry)
        for t, h_prev, c_prev, gate_i, gate_f, gate_g, gate_o, c_new in reversed(
            cache
        ):
            dh = d_hs[:, t] + dh_carry
            tanh_c = np.tanh(c_new)
            d_o = dh * tanh_c
            dc = dc_carry + dh * gate_o * (1.0 - tanh_c * tanh_c)
            d_i = dc * gate_g
            d_f = dc * c_prev
            d_g = dc * gate_i
            dc_carry = dc * gate_f
            dz = np.concatenate(
                [
                    d_i * gate_i * (1.0 - gate_i),
                    d_f * gate_f * (1.0 - gate_f),
                    d_g * (1.0 - gate_g * gate_g),
                    d_o * gate_o * (1.0 - gate_o),
                ],
                axis=1,
            )
            d_wx += X[:, t].T @ dz
            d_wh += h_prev.T @ dz
            d_b += dz.sum(axis=0)
            dh_carry = dz @ Wh.T
        return d_wx, d_wh, d_b

    def predict_windows(self, X) -> np.ndarray:
        """Per-timestep predictions for a batch of windows (N, L, d)."""
        X = np.asarray(X, dtype=np.float64)
        p = self.params_
        batch, length, _ = X.shape
        hs_f, _ = self._run_direction(X, "fwd")
        hs_b, _ = self._run_direction(X, "bwd")
        hcat = np.concatenate([hs_f, hs_b], axis=2)
        flat = hcat.reshape(batch * length, 2 * self.hidden_size)
        a1 = np.tanh(flat @ p["Wd"] + p["bd"])
        out = a1 @ p["Wo"] + p["bo"]
        return out.reshape(batch, length, N_OUTPUTS)

    def loss_and_gradients(self, X, Y):
        """Windowed MSE over all timesteps plus gradients for all params."""
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        p = self.params_
        batch, length, _ = X.shape
        h_size = self.hidden_size
        hs_f, cache_f = self._run_direction(X, "fwd")
        hs_b, cache_b = self._run_direction(X, "bwd")
        flat = np.concatenate([hs_f, hs_b], axis=2).reshape(
            batch * length, 2 * h_size
        )
        a1 = np.tanh(flat @ p["Wd"] + p["bd"])
        out = a1 @ p["Wo"] + p["bo"]
        diff = out - Y.reshape(batch * length, N_OUTPUTS)
        loss = float(np.mean(diff * diff))

        dout = 2.0 * diff / diff.size
        grads = {"Wo": a1.T @ dout, "bo": dout.sum(axis=0)}
        da1 = dout @ p["Wo"].T
        dz1 = da1 * (1.0 - a1 * a1)
        grads["Wd"] = flat.T @ dz1
        grads["bd"] = dz1.sum(axis=0)
        d_hcat = (dz1 @ p["Wd"].T).reshape(batch, length, 2 * h_size)
        for prefix, cache, sl in (
            ("fwd", cache_f, slice(None, h_size)),
            ("bwd", cache_b, slice(h_size, None)),
        ):
            d_wx, d_wh, d_b = self._direction_backward(
                X, cache, d_hcat[:, :, sl], prefix
            )
            grads[prefix + "_Wx"] = d_wx
            grads[prefix + "_Wh"] = d_wh
            grads[prefix + "_b"] = d_b
        return loss, grads

    # --- training ---

    def fit(self, X, Y, origins=None):
        """Train on full windows; origins are (chapter_id, start) per window.

        Validation holds out whole chapters (the tail of a seeded shuffle
        of the chapter list), never individual windows, and the returned
        parameters are the epoch snapshot with the lowest validation loss.
        Without origins there is no validation split and the best train
        loss picks the snapshot.
        """
        X = check_matrix("X", X, ndim=3)
        Y = check_matrix("Y", Y, ndim=3)
        if X.shape[:2] != Y.shape[:2] or Y.shape[2] != N_OUTPUTS:
            raise DataError("windows and targets must align, targets 3-wide")
        n = X.shape[0]
        if n < self.min_windows:
            raise DataError(
                "need at least %d windows, got %d" % (self.min_windows, n)
            )
        self.window_len_ = X.shape[1]
        rng = np.random.default_rng(self.seed)
        self._initialize(X.shape[2], rng)

        train_idx, val_idx = self._split_indices(n, origins, rng)
        optimizer = Adam(self.params_, lr=self.lr)
        best = None
        self.training_log_ = []
        for epoch in range(self.epochs):
            order = train_idx[rng.permutation(len(train_idx))]
            for start in range(0, len(order), self.batch_size):
                batch = order[start:start + self.batch_size]
                loss, grads = self.loss_and_gradients(X[batch], Y[batch])
                if not np.isfinite(loss):
                    raise TrainingDiverged(epoch)
                optimizer.step(self.params_, grads)
            train_loss, _ = self.loss_and_gradients(X[train_idx], Y[train_idx])
            entry = {"epoch": epoch, "train_loss": train_loss}
            select_loss = train_loss
            if len(val_idx):
                val_loss, _ = self.loss_and_gradients(X[val_idx], Y[val_idx])
                entry["val_loss"] = val_loss
                select_loss = val_loss
            if not np.isfinite(select_loss):
                raise TrainingDiverged(epoch)
            self.training_log_.append(entry)
            if best is None or select_loss < best[0]:
                best = (
                    select_loss,
                    epoch,
                    {k: v.copy() for k, v in self.params_.items()},
                )
        _, self.best_epoch_, self.params_ = best
        return self

    def _split_indices(self, n, origins, rng):
        if origins is None or self.val_fraction <= 0:
            return np.arange(n), np.array([], dtype=int)
        chapters = []
        for chapter_id, _ in origins:
            if chapter_id not in chapters:
                chapters.append(chapter_id)
        n_val = int(round(self.val_fraction * len(chapters)))
        if len(chapters) < 2:
            n_val = 0
        else:
            n_val = min(max(n_val, 1), len(chapters) - 1)
        shuffled = list(np.array(chapters, dtype=object)[rng.permutation(len(chapters))])
        held_out = set(shuffled[len(shuffled) - n_val:]) if n_val else set()
        train_idx = np.array(
            [i for i, (ch, _) in enumerate(origins) if ch not in held_out],
            dtype=int,
        )
        val_idx = np.array(
            [i for i, (ch, _) in enumerate(origins) if ch in held_out],
            dtype=int,
        )
        return train_idx, val_idx

    def predict(self, features) -> np.ndarray:
        """Per-segment predictions for one chapter's ordered feature rows."""
        return sliding_window_predict(
            self.predict_windows, features, self.window_len_
        )

"""Finite-difference verification of analytic gradients.

Central differences with step 1e-5 in float64 leave truncation and
roundoff error far below the 1e-4 relative-error bound being enforced.
"""

from __future__ import annotations

import numpy as np


def probe_gradients(model, X, Y, rng, n_probe: int = 20, step: float = 1e-5):
    """Max relative error between analytic and numeric gradients.

    Probes n_probe randomly chosen parameter entries of a model exposing
    params_ and loss_and_gradients(X, Y).
    """
    _, grads = model.loss_and_gradients(X, Y)
    names = sorted(grads)
    worst = 0.0
    for _ in range(n_probe):
        name = names[int(rng.integers(len(names)))]
        arr = model.params_[name]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        original = arr[idx]
        arr[idx] = original + step
        loss_plus, _ = model.loss_and_gradients(X, Y)
        arr[idx] = original - step
        loss_minus, _ = model.loss_and_gradients(X, Y)
        arr[idx] = original
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        analytic = grads[name][idx]
        denom = max(abs(analytic) + abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def _jitter_biases(model, rng):
    # Zero-init biases can leave pre-activations exactly on a ReLU kink
    # (e.g. an all-dead hidden row), where central differences straddle
    # the nondifferentiable point.  Random biases make the probe generic.
    for name, arr in model.params_.items():
        if arr.ndim == 1:
            arr += rng.normal(0.0, 0.1, arr.shape)


def mlp_gradient_check(seed: int, n_probe: int = 20) -> float:
    """Gradient check on a small random MLP instance."""
    from .mlp import MlpRegressor

    rng = np.random.default_rng(seed)
    model = MlpRegressor(hidden=(4, 3), seed=seed)
    model._initialize(5, rng)
    _jitter_biases(model, rng)
    X = rng.normal(size=(6, 5))
    Y = rng.normal(size=(6, 3))
    return probe_gradients(model, X, Y, rng, n_probe=n_probe)


def bilstm_gradient_check(seed: int, n_probe: int = 20) -> float:
    """Gradient check on a small random BiLSTM instance."""
    from .bilstm import BiLstmRegressor

    rng = np.random.default_rng(seed)
    model = BiLstmRegressor(hidden_size=3, dense_size=4, seed=seed)
    model._initialize(3, rng)
    _jitter_biases(model, rng)
    X = rng.normal(size=(4, 3, 3))
    Y = rng.normal(size=(4, 3, 3))
    return probe_gradients(model, X, Y, rng, n_probe=n_probe)

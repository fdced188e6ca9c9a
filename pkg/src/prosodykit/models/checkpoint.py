"""Model checkpoints as a single JSON document."""

from __future__ import annotations

import json

import numpy as np

from ..errors import FormatError
from .bilstm import BiLstmRegressor
from .linear import LinearRegressor
from .mlp import MlpRegressor


def _model_payload(model) -> dict:
    payload = {
        "kind": model.kind,
        "config": model.get_params(),
        "input_dims": model.input_dims_,
        "training_log": getattr(model, "training_log_", []),
    }
    if model.kind == "linreg":
        payload["weights"] = {
            "coef": model.coef_.tolist(),
            "intercept": model.intercept_.tolist(),
        }
    else:
        payload["weights"] = {k: v.tolist() for k, v in model.params_.items()}
    if model.kind == "bilstm":
        payload["window_len"] = model.window_len_
        payload["best_epoch"] = model.best_epoch_
    return payload


def model_json(model) -> str:
    """Deterministic JSON text for a trained model."""
    return json.dumps(_model_payload(model), sort_keys=True)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_json(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    config = payload.get("config", {})
    weights = payload.get("weights", {})
    if kind == "linreg":
        model = LinearRegressor(**config)
        model.coef_ = np.array(weights["coef"])
        model.intercept_ = np.array(weights["intercept"])
    elif kind == "mlp":
        config["hidden"] = tuple(config["hidden"])
        model = MlpRegressor(**config)
        model.params_ = {k: np.array(v) for k, v in weights.items()}
    elif kind == "bilstm":
        model = BiLstmRegressor(**config)
        model.params_ = {k: np.array(v) for k, v in weights.items()}
        model.window_len_ = payload["window_len"]
        model.best_epoch_ = payload["best_epoch"]
    else:
        raise FormatError("unknown model kind %r" % kind)
    model.input_dims_ = payload["input_dims"]
    model.training_log_ = payload.get("training_log", [])
    return model

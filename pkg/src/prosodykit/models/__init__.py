"""Predictor families and their training, inference, and evaluation."""

from .bilstm import BiLstmRegressor
from .checkpoint import load_model, model_json, save_model
from .evaluate import EvalChapter, correlation_csv, evaluate, split_books
from .gradcheck import bilstm_gradient_check, mlp_gradient_check, probe_gradients
from .linear import LinearRegressor
from .mlp import MlpRegressor
from .windows import make_windows, sliding_window_predict, window_coverage

__all__ = [
    "BiLstmRegressor",
    "EvalChapter",
    "LinearRegressor",
    "MlpRegressor",
    "bilstm_gradient_check",
    "correlation_csv",
    "evaluate",
    "load_model",
    "make_windows",
    "mlp_gradient_check",
    "model_json",
    "probe_gradients",
    "save_model",
    "sliding_window_predict",
    "split_books",
    "window_coverage",
]

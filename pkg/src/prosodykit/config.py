"""Pipeline configuration: one JSON file, validated up front.

Every omitted key gets its documented default so the effective config
written next to the artifacts fully determines a run.  Validation is
strict: unknown keys anywhere are errors, and file paths named by the
config must exist when it is loaded.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError

SPLIT_DEFAULTS = {"seed": 0, "ratio": 0.75}

PITCH_DEFAULTS = {
    "floor_hz": 75.0,
    "ceil_hz": 600.0,
    "threshold": 0.15,
    "window_s": 0.04,
    "rms_gate_db": -60.0,
}

INTENSITY_DEFAULTS = {"window_s": 0.03}

FEATURE_DEFAULTS = {
    "kind": "tfidf",
    "min_df": 2,
    "pca_components": None,
    "embeddings_path": None,
    "character": None,
}

CHARACTER_DEFAULTS = {
    "table_path": None,
    "attribution_path": None,
    "pca_components": 5,
}

MODEL_DEFAULTS = {
    "linreg": {"ridge": 1e-8},
    "mlp": {
        "hidden": [10, 10],
        "lr": 1e-3,
        "batch_size": 32,
        "epochs": 200,
        "seed": 0,
    },
    "bilstm": {
        "window_len": 3,
        "hidden_size": 40,
        "dense_size": 20,
        "lr": 1e-3,
        "batch_size": 32,
        "epochs": 30,
        "seed": 0,
        "val_fraction": 0.15,
        "min_windows": 10,
    },
}

# fallback de-normalization reference when a chapter has no usable stats
SSML_DEFAULTS = {
    "pitch_mean_hz": 200.0,
    "pitch_std_hz": 30.0,
    "vol_mean_db": 0.0,
    "vol_std_db": 4.0,
}

ANALYSIS_DEFAULTS = {"attribution_path": None, "characters_path": None}

_TOP_KEYS = {
    "manifest",
    "dataset_root",
    "output_dir",
    "jobs",
    "split",
    "pitch",
    "intensity",
    "features",
    "model",
    "ssml",
    "analysis",
}


def _fail(message):
    raise ConfigError(message)


def _section(cfg, name, defaults):
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        _fail("%s must be an object" % name)
    unknown = set(value) - set(defaults)
    if unknown:
        _fail("%s has unknown keys: %s" % (name, ", ".join(sorted(unknown))))
    merged = dict(defaults)
    merged.update(value)
    return merged


def _number(section, key, value, lo=None, hi=None, open_lo=False, open_hi=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail("%s.%s must be a number, got %r" % (section, key, value))
    if lo is not None and (value <= lo if open_lo else value < lo):
        _fail("%s.%s must be %s %s" % (section, key, ">" if open_lo else ">=", lo))
    if hi is not None and (value >= hi if open_hi else value > hi):
        _fail("%s.%s must be %s %s" % (section, key, "<" if open_hi else "<=", hi))
    return float(value)


def _integer(section, key, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail("%s.%s must be an integer, got %r" % (section, key, value))
    if lo is not None and value < lo:
        _fail("%s.%s must be >= %d" % (section, key, lo))
    return value


def _existing_path(base: Path, section, key, value, kind="file") -> str:
    if not isinstance(value, str) or not value:
        _fail("%s.%s must be a path string" % (section, key))
    resolved = (base / value).resolve()
    ok = resolved.is_dir() if kind == "dir" else resolved.is_file()
    if not ok:
        _fail("%s.%s: no such %s: %s" % (section, key, kind, resolved))
    return str(resolved)


def load_config(path) -> dict:
    """Read, validate, and fully default a pipeline config file."""
    path = Path(path)
    if not path.is_file():
        _fail("config file not found: %s" % path)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        _fail("config is not valid JSON: %s" % exc)
    if not isinstance(cfg, dict):
        _fail("config must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        _fail("unknown config keys: %s" % ", ".join(sorted(unknown)))

    base = path.parent
    out = {}

    has_manifest = bool(cfg.get("manifest"))
    has_root = bool(cfg.get("dataset_root"))
    if has_manifest == has_root:
        _fail("config needs exactly one of manifest or dataset_root")
    out["manifest"] = (
        _existing_path(base, "config", "manifest", cfg["manifest"])
        if has_manifest
        else None
    )
    out["dataset_root"] = (
        _existing_path(base, "config", "dataset_root", cfg["dataset_root"], kind="dir")
        if has_root
        else None
    )

    if "output_dir" not in cfg:
        _fail("config.output_dir is required")
    if not isinstance(cfg["output_dir"], str) or not cfg["output_dir"]:
        _fail("config.output_dir must be a path string")
    out["output_dir"] = str((base / cfg["output_dir"]).resolve())

    jobs = cfg.get("jobs")
    if jobs is not None:
        jobs = _integer("config", "jobs", jobs, lo=1)
    out["jobs"] = jobs

    split = _section(cfg, "split", SPLIT_DEFAULTS)
    split["seed"] = _integer("split", "seed", split["seed"])
    split["ratio"] = _number(
        "split", "ratio", split["ratio"], lo=0.0, hi=1.0, open_lo=True, open_hi=True
    )
    out["split"] = split

    pitch = _section(cfg, "pitch", PITCH_DEFAULTS)
    pitch["floor_hz"] = _number("pitch", "floor_hz", pitch["floor_hz"], lo=0.0, open_lo=True)
    pitch["ceil_hz"] = _number("pitch", "ceil_hz", pitch["ceil_hz"], lo=0.0, open_lo=True)
    if pitch["ceil_hz"] <= pitch["floor_hz"]:
        _fail("pitch.ceil_hz must exceed pitch.floor_hz")
    pitch["threshold"] = _number("pitch", "threshold", pitch["threshold"], lo=0.0, open_lo=True)
    pitch["window_s"] = _number("pitch", "window_s", pitch["window_s"], lo=0.0, open_lo=True)
    pitch["rms_gate_db"] = _number("pitch", "rms_gate_db", pitch["rms_gate_db"])
    out["pitch"] = pitch

    intensity = _section(cfg, "intensity", INTENSITY_DEFAULTS)
    intensity["window_s"] = _number(
        "intensity", "window_s", intensity["window_s"], lo=0.0, open_lo=True
    )
    out["intensity"] = intensity

    out["features"] = _validate_features(base, cfg)
    out["model"] = _validate_model(cfg)

    ssml = _section(cfg, "ssml", SSML_DEFAULTS)
    for key in ("pitch_mean_hz", "pitch_std_hz", "vol_std_db"):
        ssml[key] = _number("ssml", key, ssml[key], lo=0.0, open_lo=True)
    ssml["vol_mean_db"] = _number("ssml", "vol_mean_db", ssml["vol_mean_db"])
    out["ssml"] = ssml

    analysis = _section(cfg, "analysis", ANALYSIS_DEFAULTS)
    for key in ("attribution_path", "characters_path"):
        if analysis[key] is not None:
            analysis[key] = _existing_path(base, "analysis", key, analysis[key])
    out["analysis"] = analysis

    return out


def _validate_features(base: Path, cfg) -> dict:
    features = _section(cfg, "features", FEATURE_DEFAULTS)
    if features["kind"] not in ("tfidf", "external"):
        _fail("features.kind must be tfidf or external")
    features["min_df"] = _integer("features", "min_df", features["min_df"], lo=1)
    if features["pca_components"] is not None:
        features["pca_components"] = _integer(
            "features", "pca_components", features["pca_components"], lo=1
        )
    if features["kind"] == "external":
        if not features["embeddings_path"]:
            _fail("features.embeddings_path is required when kind is external")
        features["embeddings_path"] = _existing_path(
            base, "features", "embeddings_path", features["embeddings_path"]
        )
    elif features["embeddings_path"] is not None:
        _fail("features.embeddings_path only applies when kind is external")
    if features["character"] is not None:
        character = dict(CHARACTER_DEFAULTS)
        if not isinstance(features["character"], dict):
            _fail("features.character must be an object")
        unknown = set(features["character"]) - set(character)
        if unknown:
            _fail(
                "features.character has unknown keys: %s"
                % ", ".join(sorted(unknown))
            )
        character.update(features["character"])
        for key in ("table_path", "attribution_path"):
            if not character[key]:
                _fail("features.character.%s is required" % key)
            character[key] = _existing_path(
                base, "features.character", key, character[key]
            )
        character["pca_components"] = _integer(
            "features.character", "pca_components", character["pca_components"], lo=1
        )
        features["character"] = character
    return features


def _validate_model(cfg) -> dict:
    model = cfg.get("model", {})
    if not isinstance(model, dict):
        _fail("model must be an object")
    kind = model.get("kind", "linreg")
    if kind not in MODEL_DEFAULTS:
        _fail("model.kind must be one of %s" % ", ".join(sorted(MODEL_DEFAULTS)))
    defaults = dict(MODEL_DEFAULTS[kind])
    unknown = set(model) - set(defaults) - {"kind"}
    if unknown:
        _fail("model has unknown keys for kind %s: %s" % (kind, ", ".join(sorted(unknown))))
    merged = dict(defaults)
    merged.update({k: v for k, v in model.items() if k != "kind"})
    merged["kind"] = kind
    if kind == "linreg":
        merged["ridge"] = _number("model", "ridge", merged["ridge"], lo=0.0)
    else:
        merged["lr"] = _number("model", "lr", merged["lr"], lo=0.0, open_lo=True)
        merged["batch_size"] = _integer("model", "batch_size", merged["batch_size"], lo=1)
        merged["epochs"] = _integer("model", "epochs", merged["epochs"], lo=1)
        merged["seed"] = _integer("model", "seed", merged["seed"])
    if kind == "mlp":
        hidden = merged["hidden"]
        if (
            not isinstance(hidden, list)
            or not hidden
            or any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in hidden)
        ):
            _fail("model.hidden must be a list of positive integers")
    if kind == "bilstm":
        merged["window_len"] = _integer("model", "window_len", merged["window_len"], lo=1)
        merged["hidden_size"] = _integer("model", "hidden_size", merged["hidden_size"], lo=1)
        merged["dense_size"] = _integer("model", "dense_size", merged["dense_size"], lo=1)
        merged["val_fraction"] = _number(
            "model", "val_fraction", merged["val_fraction"], lo=0.0, hi=1.0, open_hi=True
        )
        merged["min_windows"] = _integer("model", "min_windows", merged["min_windows"], lo=1)
    return merged


def effective_config_json(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"

"""Pipeline orchestration as subcommands over a JSON config.

Each subcommand reads the artifacts its predecessors wrote under the
configured output directory and adds its own:

    extract         prosody/<key>.csv, segments/<key>.json
    featurize       features/<key>.npz, features/index.json, split.json
    train           models/model.json
    predict         predictions/<key>.csv
    evaluate        reports/evaluation_<subset>.json + correlations CSV
    emit-ssml       ssml/<key>.ssml, .plain.ssml, .sidecar.json
    analyze-readers reports/readers.json + quote histogram CSVs

where <key> is <book_id>__<chapter_id>.  Logs go to stderr, a JSON
summary of every run goes to stdout, and the fully defaulted config is
recorded as effective_config.json next to the artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .analysis import (
    DialogueRow,
    character_pair_stats,
    gender_dialogue_test,
    quote_distribution,
    quote_distribution_csv,
)
from .audio.intensity import intensity_track
from .audio.pitch import PitchParams, pitch_track
from .audio.wav import decode_wav
from .config import effective_config_json, load_config
from .dataset import discover_corpus, load_chapter, load_manifest
from .errors import ConfigError, InsufficientCharacters, NoData, ProsodyKitError
from .features import (
    FeatureMatrix,
    PcaReducer,
    TfidfFeaturizer,
    append_character_embedding,
    load_character_table,
    load_external_embeddings,
    load_quote_attribution,
)
from .models import (
    BiLstmRegressor,
    EvalChapter,
    LinearRegressor,
    MlpRegressor,
    correlation_csv,
    evaluate,
    load_model,
    make_windows,
    save_model,
    split_books,
)
from .prosody import ATTRIBUTES, compute_chapter_prosody, prosody_csv
from .segmentation import segment_chapter
from .ssml import ReferenceStats, build_document

log = logging.getLogger("prosodykit")


def _entries(cfg):
    if cfg["manifest"]:
        return load_manifest(cfg["manifest"])
    return discover_corpus(cfg["dataset_root"])


def _out_dir(cfg, name) -> Path:
    path = Path(cfg["output_dir"]) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(path: Path, producer: str, what: str) -> Path:
    if not path.exists():
        raise ConfigError(
            "missing %s (%s); run the `%s` subcommand first" % (what, path, producer)
        )
    return path


def _write_text(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def _dump_json(payload) -> str:
    return json.dumps(payload, sort_keys=True) + "\n"


def _load_segment_files(cfg) -> list:
    seg_dir = _require(
        Path(cfg["output_dir"]) / "segments", "extract", "extracted segments"
    )
    files = sorted(seg_dir.glob("*.json"))
    if not files:
        raise ConfigError(
            "no chapter files under %s; run the `extract` subcommand first" % seg_dir
        )
    return [json.loads(f.read_text(encoding="utf-8")) for f in files]


def _chapter_key(payload) -> str:
    return "%s__%s" % (payload["book_id"], payload["chapter_id"])


# --- extract ---

def _extract_one(entry, cfg) -> tuple:
    """Process one chapter end to end; returns (key, error or None)."""
    try:
        chapter, trees = load_chapter(entry)
        audio = decode_wav(entry.audio_path)
        track_p = pitch_track(audio, PitchParams(**cfg["pitch"]))
        track_i = intensity_track(audio, window_s=cfg["intensity"]["window_s"])
        segments = segment_chapter(chapter, trees)
        if not segments:
            raise NoData("chapter produced no segments")
        result = compute_chapter_prosody(chapter, segments, track_p, track_i)
        out = Path(cfg["output_dir"])
        _write_text(out / "prosody" / (entry.key + ".csv"), prosody_csv(result))
        payload = {
            "book_id": entry.book_id,
            "chapter_id": entry.chapter_id,
            "stats": {name: list(result.stats[name]) for name in ATTRIBUTES},
            "flags": [[sid, reason] for sid, reason in result.flags],
            "segments": [
                {
                    "segment_id": seg.segment_id,
                    "sentence_id": seg.sentence_id,
                    "text": seg.text,
                    "start_char": seg.start_char,
                    "end_char": seg.end_char,
                    "word_count": len(seg.word_span),
                    "is_quote": bool(seg.is_quote),
                    "pitch_z": seg.prosody[0],
                    "volume_z": seg.prosody[1],
                    "rate_z": seg.prosody[2],
                }
                for seg in result.segments
            ],
        }
        _write_text(out / "segments" / (entry.key + ".json"), _dump_json(payload))
        return entry.key, None
    except Exception as exc:  # isolate failures per chapter
        return entry.key, "%s: %s" % (type(exc).__name__, exc)


def cmd_extract(cfg, args) -> tuple:
    entries = _entries(cfg)
    _out_dir(cfg, "prosody")
    _out_dir(cfg, "segments")
    jobs = cfg["jobs"] or os.cpu_count() or 1
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_extract_one, e, cfg) for e in entries]
            results = [f.result() for f in futures]
    else:
        results = [_extract_one(e, cfg) for e in entries]
    results.sort(key=lambda r: r[0])
    failed = [
        {"chapter": key, "error": error} for key, error in results if error
    ]
    for item in failed:
        log.error("chapter %s failed: %s", item["chapter"], item["error"])
    succeeded = len(results) - len(failed)
    summary = {
        "command": "extract",
        "chapters": len(results),
        "succeeded": succeeded,
        "failed": failed,
    }
    return (0 if succeeded > 0 else 1), summary


# --- featurize ---

def _global_id(key, segment_id) -> str:
    return "%s__%s" % (key, segment_id)


def _fit_transform_features(cfg, chapters, train_books):
    """Per-chapter feature matrices per the config's feature choice."""
    features_cfg = cfg["features"]
    keys = [_chapter_key(c) for c in chapters]
    texts = [[s["text"] for s in c["segments"]] for c in chapters]
    if features_cfg["kind"] == "tfidf":
        train_texts = [
            t
            for c, chapter_texts in zip(chapters, texts)
            for t in chapter_texts
            if c["book_id"] in train_books
        ]
        featurizer = TfidfFeaturizer(min_df=features_cfg["min_df"])
        featurizer.fit(train_texts)
        matrices = [featurizer.transform(t) for t in texts]
        meta = {"kind": "tfidf", "vocabulary": len(featurizer.vocabulary_)}
        if features_cfg["pca_components"]:
            reducer = PcaReducer(n_components=features_cfg["pca_components"])
            reducer.fit(
                np.vstack(
                    [
                        m
                        for c, m in zip(chapters, matrices)
                        if c["book_id"] in train_books
                    ]
                )
            )
            matrices = [reducer.transform(m) for m in matrices]
            meta["pca_components"] = features_cfg["pca_components"]
    else:
        expected = [
            _global_id(key, s["segment_id"])
            for key, c in zip(keys, chapters)
            for s in c["segments"]
        ]
        table = load_external_embeddings(features_cfg["embeddings_path"], expected)
        matrices = []
        offset = 0
        for c in chapters:
            n = len(c["segments"])
            matrices.append(table.data[offset : offset + n])
            offset += n
        meta = {"kind": "external", "source": features_cfg["embeddings_path"]}

    if features_cfg["character"]:
        char_cfg = features_cfg["character"]
        vectors, _ = load_character_table(char_cfg["table_path"])
        attribution = load_quote_attribution(char_cfg["attribution_path"])
        pca = PcaReducer(n_components=char_cfg["pca_components"])
        # fit on characters attributed in training books; the whole table
        # is the fallback when those are too few to span a subspace
        train_chars = sorted(
            {
                char
                for key, c in zip(keys, chapters)
                if c["book_id"] in train_books
                for gid, char in attribution.items()
                if gid.startswith(key + "__") and char in vectors
            }
        )
        if len(train_chars) >= 2:
            pca.fit(np.vstack([vectors[c] for c in train_chars]))
        else:
            log.warning(
                "fewer than 2 characters in training dialogue; fitting the "
                "character PCA on the full table"
            )
            pca.fit(np.vstack([vectors[c] for c in sorted(vectors)]))
        appended = []
        for key, c, matrix in zip(keys, chapters, matrices):
            prefix = key + "__"
            local = {
                gid[len(prefix):]: char
                for gid, char in attribution.items()
                if gid.startswith(prefix)
            }
            lite = [
                SimpleNamespace(segment_id=s["segment_id"], is_quote=s["is_quote"])
                for s in c["segments"]
            ]
            fm = FeatureMatrix(
                data=matrix,
                row_ids=[s["segment_id"] for s in c["segments"]],
                provenance=meta["kind"],
            )
            appended.append(
                append_character_embedding(fm, lite, vectors, local, pca).data
            )
        matrices = appended
        meta["character_dims"] = char_cfg["pca_components"]
    return matrices, meta


def cmd_featurize(cfg, args) -> tuple:
    chapters = _load_segment_files(cfg)
    out = Path(cfg["output_dir"])
    seed = cfg["split"]["seed"]
    train_ids, test_ids = split_books(
        [c["book_id"] for c in chapters], ratio=cfg["split"]["ratio"], seed=seed
    )
    _write_text(
        out / "split.json",
        _dump_json(
            {
                "seed": seed,
                "ratio": cfg["split"]["ratio"],
                "train_books": sorted(train_ids),
                "test_books": sorted(test_ids),
            }
        ),
    )
    matrices, meta = _fit_transform_features(cfg, chapters, set(train_ids))
    feat_dir = _out_dir(cfg, "features")
    index = []
    for c, matrix in zip(chapters, matrices):
        key = _chapter_key(c)
        np.savez(
            feat_dir / (key + ".npz"),
            x=np.asarray(matrix, dtype=np.float64),
            y=np.array(
                [[s["pitch_z"], s["volume_z"], s["rate_z"]] for s in c["segments"]],
                dtype=np.float64,
            ),
            is_quote=np.array([s["is_quote"] for s in c["segments"]], dtype=bool),
            segment_ids=np.array(
                [s["segment_id"] for s in c["segments"]], dtype=np.int64
            ),
        )
        index.append(
            {
                "key": key,
                "book_id": c["book_id"],
                "chapter_id": c["chapter_id"],
                "rows": len(c["segments"]),
            }
        )
    dims = int(matrices[0].shape[1]) if matrices else 0
    meta["dims"] = dims
    _write_text(feat_dir / "index.json", _dump_json(index))
    _write_text(feat_dir / "meta.json", _dump_json(meta))
    summary = {
        "command": "featurize",
        "chapters": len(chapters),
        "dims": dims,
        "train_books": len(train_ids),
        "test_books": len(test_ids),
    }
    return 0, summary


# --- train / predict / evaluate ---

def _load_feature_index(cfg) -> list:
    path = _require(
        Path(cfg["output_dir"]) / "features" / "index.json",
        "featurize",
        "feature index",
    )
    return json.loads(path.read_text(encoding="utf-8"))


def _load_split(cfg) -> dict:
    path = _require(
        Path(cfg["output_dir"]) / "split.json", "featurize", "book split"
    )
    return json.loads(path.read_text(encoding="utf-8"))


def _load_chapter_features(cfg, entry) -> dict:
    path = _require(
        Path(cfg["output_dir"]) / "features" / (entry["key"] + ".npz"),
        "featurize",
        "chapter features",
    )
    with np.load(path) as data:
        return {name: data[name] for name in data.files}


def _build_model(model_cfg):
    kind = model_cfg["kind"]
    if kind == "linreg":
        return LinearRegressor(ridge=model_cfg["ridge"])
    if kind == "mlp":
        return MlpRegressor(
            hidden=tuple(model_cfg["hidden"]),
            seed=model_cfg["seed"],
            lr=model_cfg["lr"],
            batch_size=model_cfg["batch_size"],
            epochs=model_cfg["epochs"],
        )
    return BiLstmRegressor(
        hidden_size=model_cfg["hidden_size"],
        dense_size=model_cfg["dense_size"],
        seed=model_cfg["seed"],
        lr=model_cfg["lr"],
        batch_size=model_cfg["batch_size"],
        epochs=model_cfg["epochs"],
        val_fraction=model_cfg["val_fraction"],
        min_windows=model_cfg["min_windows"],
    )


def cmd_train(cfg, args) -> tuple:
    split = _load_split(cfg)
    index = _load_feature_index(cfg)
    train_books = set(split["train_books"])
    train_entries = [e for e in index if e["book_id"] in train_books]
    if not train_entries:
        raise NoData("no training chapters in the feature index")
    model_cfg = cfg["model"]
    model = _build_model(model_cfg)
    loaded = [(e, _load_chapter_features(cfg, e)) for e in train_entries]
    n_rows = sum(d["x"].shape[0] for _, d in loaded)
    if model_cfg["kind"] == "bilstm":
        X, Y, origins = make_windows(
            ((e["key"], d["x"], d["y"]) for e, d in loaded),
            model_cfg["window_len"],
        )
        model.fit(X, Y, origins)
    else:
        X = np.vstack([d["x"] for _, d in loaded])
        Y = np.vstack([d["y"] for _, d in loaded])
        model.fit(X, Y)
    models_dir = _out_dir(cfg, "models")
    save_model(model, models_dir / "model.json")
    summary = {
        "command": "train",
        "kind": model_cfg["kind"],
        "train_chapters": len(train_entries),
        "train_segments": int(n_rows),
    }
    log_entries = getattr(model, "training_log_", None)
    if log_entries:
        summary["final_train_loss"] = log_entries[-1]["train_loss"]
        summary["epochs_run"] = len(log_entries)
    best_epoch = getattr(model, "best_epoch_", None)
    if best_epoch is not None:
        summary["best_epoch"] = best_epoch
    return 0, summary


def _load_trained_model(cfg):
    path = _require(
        Path(cfg["output_dir"]) / "models" / "model.json",
        "train",
        "model checkpoint",
    )
    return load_model(path)


def cmd_predict(cfg, args) -> tuple:
    model = _load_trained_model(cfg)
    index = _load_feature_index(cfg)
    pred_dir = _out_dir(cfg, "predictions")
    total = 0
    for entry in index:
        data = _load_chapter_features(cfg, entry)
        preds = model.predict(data["x"])
        lines = ["segment_id,pitch_z,volume_z,rate_z"]
        for seg_id, row in zip(data["segment_ids"], preds):
            lines.append(
                "%d,%.6f,%.6f,%.6f" % (seg_id, row[0], row[1], row[2])
            )
        _write_text(pred_dir / (entry["key"] + ".csv"), "\n".join(lines) + "\n")
        total += len(preds)
    summary = {
        "command": "predict",
        "chapters": len(index),
        "segments": total,
    }
    return 0, summary


def cmd_evaluate(cfg, args) -> tuple:
    subset_flag = args.subset
    subset = "dialogue_only" if subset_flag == "dialogue" else "all"
    model = _load_trained_model(cfg)
    split = _load_split(cfg)
    index = _load_feature_index(cfg)
    test_books = set(split["test_books"])
    chapters = []
    for entry in index:
        if entry["book_id"] not in test_books:
            continue
        data = _load_chapter_features(cfg, entry)
        chapters.append(
            EvalChapter(
                book_id=entry["book_id"],
                chapter_id=entry["chapter_id"],
                features=data["x"],
                targets=data["y"],
                is_quote=data["is_quote"],
            )
        )
    if not chapters:
        raise NoData("no test chapters in the feature index")
    report = evaluate(model, chapters, subset=subset)
    reports_dir = _out_dir(cfg, "reports")
    _write_text(
        reports_dir / ("evaluation_%s.json" % subset_flag),
        json.dumps(report, indent=2, sort_keys=True) + "\n",
    )
    _write_text(
        reports_dir / ("correlations_%s.csv" % subset_flag),
        correlation_csv(report),
    )
    summary = {
        "command": "evaluate",
        "subset": subset_flag,
        "n_segments": report["n_segments"],
        "mse": report["mse"],
    }
    return 0, summary


# --- emit-ssml ---

def _read_predictions(path) -> list:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "segment_id,pitch_z,volume_z,rate_z":
        raise ConfigError("malformed prediction file %s" % path)
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        out.append((int(cells[0]), tuple(float(v) for v in cells[1:4])))
    return out


def cmd_emit_ssml(cfg, args) -> tuple:
    chapters = _load_segment_files(cfg)
    pred_dir = _require(
        Path(cfg["output_dir"]) / "predictions", "predict", "predictions"
    )
    ssml_dir = _out_dir(cfg, "ssml")
    fallback = ReferenceStats(
        pitch_mean_hz=cfg["ssml"]["pitch_mean_hz"],
        pitch_std_hz=cfg["ssml"]["pitch_std_hz"],
        vol_mean_db=cfg["ssml"]["vol_mean_db"],
        vol_std_db=cfg["ssml"]["vol_std_db"],
    )
    total_phrases = 0
    for c in chapters:
        key = _chapter_key(c)
        pred_path = _require(
            pred_dir / (key + ".csv"), "predict", "predictions for " + key
        )
        preds = dict(_read_predictions(pred_path))
        texts = []
        zs = []
        for seg in c["segments"]:
            if seg["segment_id"] not in preds:
                raise ConfigError(
                    "no prediction for segment %s of %s; rerun the `predict` "
                    "subcommand" % (seg["segment_id"], key)
                )
            texts.append(seg["text"])
            zs.append(preds[seg["segment_id"]])
        pitch_mean, pitch_std = c["stats"]["pitch"]
        vol_mean, vol_std = c["stats"]["volume"]
        usable = pitch_mean > 0 and pitch_std > 0 and vol_std > 0
        ref = (
            ReferenceStats(pitch_mean, pitch_std, vol_mean, vol_std)
            if usable
            else fallback
        )
        doc = build_document(texts, zs, ref)
        if not usable:
            doc["sidecar"]["default_reference"] = True
        _write_text(ssml_dir / (key + ".ssml"), doc["ssml"] + "\n")
        _write_text(ssml_dir / (key + ".plain.ssml"), doc["plain"] + "\n")
        _write_text(
            ssml_dir / (key + ".sidecar.json"),
            json.dumps(doc["sidecar"], indent=2, sort_keys=True) + "\n",
        )
        total_phrases += len(texts)
    summary = {
        "command": "emit-ssml",
        "chapters": len(chapters),
        "phrases": total_phrases,
    }
    return 0, summary


# --- analyze-readers ---

def _raw_value(seg, stats, imputed, attr):
    """Undo the chapter z-scoring; None for values that were imputed."""
    if (seg["segment_id"], attr) in imputed:
        return None
    mean, std = stats[attr]
    return mean + seg[attr + "_z"] * std


def cmd_analyze_readers(cfg, args) -> tuple:
    chapters = _load_segment_files(cfg)
    analysis_cfg = cfg["analysis"]
    for key in ("attribution_path", "characters_path"):
        if not analysis_cfg[key]:
            raise ConfigError(
                "analysis.%s must be set in the config for analyze-readers" % key
            )
    _, genders = load_character_table(analysis_cfg["characters_path"])
    attribution = load_quote_attribution(analysis_cfg["attribution_path"])

    books = {}
    quote_flags = []
    z_values = {attr: [] for attr in ATTRIBUTES}
    for c in chapters:
        key = _chapter_key(c)
        stats = c["stats"]
        imputed = {
            (sid, reason.split("_")[0])
            for sid, reason in c["flags"]
            if reason.endswith("_imputed")
        }
        for seg in c["segments"]:
            quote_flags.append(seg["is_quote"])
            for attr in ATTRIBUTES:
                z_values[attr].append(seg[attr + "_z"])
            if not seg["is_quote"]:
                continue
            char_id = attribution.get(_global_id(key, seg["segment_id"]))
            if char_id is None:
                continue
            books.setdefault(c["book_id"], []).append(
                DialogueRow(
                    character_id=char_id,
                    word_count=seg["word_count"],
                    pitch_hz=_raw_value(seg, stats, imputed, "pitch"),
                    volume_db=_raw_value(seg, stats, imputed, "volume"),
                )
            )

    characters = {}
    for book_id in sorted(books):
        try:
            top, second = character_pair_stats(books[book_id], genders)
            characters[book_id] = [top.__dict__, second.__dict__]
        except InsufficientCharacters as exc:
            characters[book_id] = {"error": str(exc)}
            log.warning("book %s: %s", book_id, exc)

    try:
        gender_report = gender_dialogue_test(books, genders) if books else None
    except NoData as exc:
        gender_report = None
        log.warning("gender comparison skipped: %s", exc)

    reports_dir = _out_dir(cfg, "reports")
    quote_summaries = {}
    for attr in ATTRIBUTES:
        summary_attr = quote_distribution(quote_flags, z_values[attr])
        quote_summaries[attr] = summary_attr
        _write_text(
            reports_dir / ("quote_hist_%s.csv" % attr),
            quote_distribution_csv(summary_attr),
        )
    _write_text(
        reports_dir / "readers.json",
        json.dumps(
            {
                "gender": gender_report,
                "characters": characters,
                "quote": quote_summaries,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    summary = {
        "command": "analyze-readers",
        "books_with_dialogue": len(books),
        "eligible_books": gender_report["n"] if gender_report else 0,
    }
    if gender_report:
        summary["p_pitch"] = gender_report["p_pitch"]
        summary["p_volume"] = gender_report["p_volume"]
    return 0, summary


# --- entry point ---

_COMMANDS = {
    "extract": cmd_extract,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "emit-ssml": cmd_emit_ssml,
    "analyze-readers": cmd_analyze_readers,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prosodykit",
        description="Prosody extraction, modeling, and SSML generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            help="override the split seed (featurize) and model seed (train)",
        )
        p.add_argument(
            "--jobs", type=int, default=None, help="worker pool size"
        )
        if name == "evaluate":
            p.add_argument(
                "--subset",
                choices=("dialogue", "all"),
                default="all",
                help="restrict scoring to dialogue segments",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            cfg["jobs"] = args.jobs
        if args.seed is not None:
            cfg["split"]["seed"] = args.seed
            if "seed" in cfg["model"]:
                cfg["model"]["seed"] = args.seed
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "effective_config.json", effective_config_json(cfg))
        code, summary = _COMMANDS[args.command](cfg, args)
    except ProsodyKitError as exc:
        log.error("%s", exc)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())

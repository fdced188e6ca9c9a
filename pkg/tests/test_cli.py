import io
import json
import re
import shutil
import xml.etree.ElementTree as ET
from contextlib import redirect_stdout
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from prosodykit.audio.wav import encode_wav_pcm16
from prosodykit.cli import main

SR = 16000

WORD_DUR = 0.4
WORD_GAP = 0.1

CHAPTER_TEXTS = {
    ("bk01", "ch1"): (
        'Anna said, "Go away now." Then Bob walked around the misty garden '
        "slowly.",
        "anna",
    ),
    ("bk01", "ch2"): (
        'Bob said, "Stay right here." Then Anna wandered around the sunny '
        "meadow quietly.",
        "bob",
    ),
    ("bk02", "ch1"): (
        'Clara said, "Come back soon." Then Dan strolled around the foggy '
        "harbor briskly.",
        "clara",
    ),
    ("bk02", "ch2"): (
        'Dan said, "Look over there." Then Clara drifted around the quiet '
        "valley calmly.",
        "dan",
    ),
}

TOKEN_RE = re.compile(r"[A-Za-z]+")


def build_alignment(text, pitch_base):
    """Gentle-style word list plus per-word synthesis directives."""
    words = []
    synth = []
    cursor = 0
    for i, match in enumerate(TOKEN_RE.finditer(text)):
        token = match.group(0)
        start = 0.5 * i + 0.05
        end = start + WORD_DUR
        d1 = 0.15 + 0.01 * (i % 5)
        d2 = WORD_DUR - d1
        words.append(
            {
                "word": token,
                "case": "success",
                "start": start,
                "end": end,
                "startOffset": match.start(),
                "endOffset": match.end(),
                "phones": [
                    {"phone": "ah", "duration": d1},
                    {"phone": "n", "duration": d2},
                ],
            }
        )
        freq = pitch_base + 9.0 * i + (90.0 if 2 <= i <= 4 else 0.0)
        amp = 0.08 + 0.03 * (i % 7)
        synth.append((start, end, freq, amp))
        cursor = match.end()
    assert cursor > 0
    return {"words": words}, synth


def synth_wav(path, synth):
    total = synth[-1][1] + 0.5
    x = np.zeros(int(total * SR))
    for start, end, freq, amp in synth:
        i0, i1 = int(start * SR), int(end * SR)
        t = np.arange(i1 - i0) / SR
        x[i0:i1] = amp * np.sin(2.0 * np.pi * freq * t)
    encode_wav_pcm16(path, x, SR)


def build_corpus(root: Path) -> Path:
    """Synthesize a 2-book, 4-chapter corpus with dialogue and audio."""
    manifest = []
    for n, ((book, chapter), (text, _)) in enumerate(sorted(CHAPTER_TEXTS.items())):
        cdir = root / "books" / book
        cdir.mkdir(parents=True, exist_ok=True)
        (cdir / (chapter + ".txt")).write_text(text, encoding="utf-8")
        align, synth = build_alignment(text, pitch_base=150.0 + 8.0 * n)
        (cdir / (chapter + ".json")).write_text(json.dumps(align), encoding="utf-8")
        synth_wav(cdir / (chapter + ".wav"), synth)
        manifest.append(
            {
                "book_id": book,
                "chapter_id": chapter,
                "text_path": "books/%s/%s.txt" % (book, chapter),
                "align_path": "books/%s/%s.json" % (book, chapter),
                "audio_path": "books/%s/%s.wav" % (book, chapter),
            }
        )
    (root / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    return root


def write_config(root: Path, name="config.json", **overrides) -> Path:
    payload = {
        "manifest": "manifest.json",
        "output_dir": "out",
        "jobs": 1,
        "split": {"seed": 7, "ratio": 0.75},
        "features": {"kind": "tfidf", "min_df": 1},
        "model": {"kind": "linreg"},
    }
    payload.update(overrides)
    path = root / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def run_cli(argv) -> tuple:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    text = buf.getvalue().strip()
    return code, json.loads(text) if text else None


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="module")
def pipeline(corpus):
    """Run every subcommand once over the fixture corpus."""
    config = write_config(corpus)
    summaries = {}
    for name, argv in [
        ("extract", ["extract", "--config", str(config)]),
        ("featurize", ["featurize", "--config", str(config)]),
        ("train", ["train", "--config", str(config)]),
        ("predict", ["predict", "--config", str(config)]),
        ("evaluate", ["evaluate", "--config", str(config), "--subset", "all"]),
        (
            "evaluate_dialogue",
            ["evaluate", "--config", str(config), "--subset", "dialogue"],
        ),
        ("emit-ssml", ["emit-ssml", "--config", str(config)]),
    ]:
        code, summary = run_cli(argv)
        assert code == 0, "%s failed: %r" % (name, summary)
        summaries[name] = summary
    return SimpleNamespace(
        root=corpus, out=corpus / "out", config=config, summaries=summaries
    )


def read_segments(out: Path) -> dict:
    return {
        p.stem: json.loads(p.read_text(encoding="utf-8"))
        for p in sorted((out / "segments").glob("*.json"))
    }


class TestExtract:
    def test_every_chapter_succeeds(self, pipeline):
        summary = pipeline.summaries["extract"]
        assert summary["chapters"] == 4
        assert summary["succeeded"] == 4
        assert summary["failed"] == []

    def test_one_csv_per_chapter(self, pipeline):
        csvs = sorted((pipeline.out / "prosody").glob("*.csv"))
        assert [p.stem for p in csvs] == [
            "bk01__ch1",
            "bk01__ch2",
            "bk02__ch1",
            "bk02__ch2",
        ]
        header = csvs[0].read_text(encoding="utf-8").splitlines()[0]
        assert header == "segment_id,sentence_id,is_quote,pitch_z,volume_z,rate_z,flags"

    def test_segments_artifact_shape(self, pipeline):
        chapters = read_segments(pipeline.out)
        assert len(chapters) == 4
        for payload in chapters.values():
            segs = payload["segments"]
            assert len(segs) == 3
            assert [s["segment_id"] for s in segs] == [0, 1, 2]
            assert [s["is_quote"] for s in segs] == [False, True, False]
            assert all(s["word_count"] > 0 for s in segs)
            assert set(payload["stats"]) == {"pitch", "volume", "rate"}

    def test_quote_segment_prosody_reflects_audio(self, pipeline):
        # quote words were synthesized 90 Hz above their neighbors
        for payload in read_segments(pipeline.out).values():
            segs = payload["segments"]
            assert segs[1]["pitch_z"] == max(s["pitch_z"] for s in segs)

    def test_effective_config_written(self, pipeline):
        path = pipeline.out / "effective_config.json"
        cfg = json.loads(path.read_text(encoding="utf-8"))
        assert cfg["split"]["ratio"] == 0.75
        assert cfg["pitch"]["floor_hz"] == 75.0
        assert cfg["model"]["kind"] == "linreg"

    def test_rerun_is_byte_identical(self, pipeline):
        def snapshot():
            return {
                p.name: p.read_bytes()
                for d in ("prosody", "segments")
                for p in sorted((pipeline.out / d).iterdir())
            }

        before = snapshot()
        code, _ = run_cli(["extract", "--config", str(pipeline.config)])
        assert code == 0
        assert snapshot() == before

    def test_parallel_run_matches_serial(self, pipeline, tmp_path):
        parallel_root = tmp_path / "parallel"
        shutil.copytree(pipeline.root / "books", parallel_root / "books")
        shutil.copy(
            pipeline.root / "manifest.json", parallel_root / "manifest.json"
        )
        config = write_config(parallel_root, jobs=2)
        code, summary = run_cli(["extract", "--config", str(config)])
        assert code == 0
        assert summary["succeeded"] == 4
        for p in sorted((parallel_root / "out" / "prosody").glob("*.csv")):
            want = (pipeline.out / "prosody" / p.name).read_bytes()
            assert p.read_bytes() == want


class TestFeaturize:
    def test_split_is_book_level_and_seeded(self, pipeline):
        split = json.loads(
            (pipeline.out / "split.json").read_text(encoding="utf-8")
        )
        assert split["seed"] == 7
        assert sorted(split["train_books"] + split["test_books"]) == [
            "bk01",
            "bk02",
        ]
        assert len(split["train_books"]) == 1
        assert len(split["test_books"]) == 1

    def test_split_rerun_identical(self, pipeline):
        before = (pipeline.out / "split.json").read_bytes()
        code, _ = run_cli(["featurize", "--config", str(pipeline.config)])
        assert code == 0
        assert (pipeline.out / "split.json").read_bytes() == before

    def test_seed_flag_overrides_config(self, pipeline):
        code, _ = run_cli(
            ["featurize", "--config", str(pipeline.config), "--seed", "3"]
        )
        assert code == 0
        split = json.loads(
            (pipeline.out / "split.json").read_text(encoding="utf-8")
        )
        assert split["seed"] == 3
        # restore the module pipeline's artifacts
        code, _ = run_cli(["featurize", "--config", str(pipeline.config)])
        assert code == 0

    def test_feature_rows_align_with_segments(self, pipeline):
        chapters = read_segments(pipeline.out)
        for key, payload in chapters.items():
            with np.load(pipeline.out / "features" / (key + ".npz")) as data:
                assert data["x"].shape[0] == len(payload["segments"])
                assert data["y"].shape == (len(payload["segments"]), 3)
                assert data["is_quote"].tolist() == [
                    s["is_quote"] for s in payload["segments"]
                ]

    def test_targets_are_chapter_zscores(self, pipeline):
        key = "bk01__ch1"
        payload = read_segments(pipeline.out)[key]
        with np.load(pipeline.out / "features" / (key + ".npz")) as data:
            want = [
                [s["pitch_z"], s["volume_z"], s["rate_z"]]
                for s in payload["segments"]
            ]
            assert np.allclose(data["y"], want)


class TestTrainPredictEvaluate:
    def test_checkpoint_written(self, pipeline):
        payload = json.loads(
            (pipeline.out / "models" / "model.json").read_text(encoding="utf-8")
        )
        assert payload["kind"] == "linreg"

    def test_predictions_cover_all_chapters(self, pipeline):
        preds = sorted((pipeline.out / "predictions").glob("*.csv"))
        assert len(preds) == 4
        lines = preds[0].read_text(encoding="utf-8").splitlines()
        assert lines[0] == "segment_id,pitch_z,volume_z,rate_z"
        assert len(lines) == 4

    def test_evaluation_counts_test_segments(self, pipeline):
        summary = pipeline.summaries["evaluate"]
        assert summary["n_segments"] == 6
        assert set(summary["mse"]) == {"pitch", "volume", "rate", "mean"}

    def test_dialogue_subset_restricts_to_quotes(self, pipeline):
        summary = pipeline.summaries["evaluate_dialogue"]
        assert summary["n_segments"] == 2

    def test_reports_on_disk(self, pipeline):
        report = json.loads(
            (pipeline.out / "reports" / "evaluation_all.json").read_text(
                encoding="utf-8"
            )
        )
        assert report["subset"] == "all"
        corr = (pipeline.out / "reports" / "correlations_all.csv").read_text(
            encoding="utf-8"
        )
        assert corr.splitlines()[0] == "book_id,attribute,correlation"


class TestEmitSsml:
    def test_phrase_count_matches_segment_count(self, pipeline):
        chapters = read_segments(pipeline.out)
        total = 0
        for key, payload in chapters.items():
            doc = (pipeline.out / "ssml" / (key + ".ssml")).read_text(
                encoding="utf-8"
            )
            root = ET.fromstring(doc)
            assert root.tag == "speak"
            phrases = list(root)
            assert len(phrases) == len(payload["segments"])
            assert [e.text for e in phrases] == [
                s["text"] for s in payload["segments"]
            ]
            total += len(phrases)
        assert pipeline.summaries["emit-ssml"]["phrases"] == total

    def test_plain_variant_next_to_enhanced(self, pipeline):
        plain = (pipeline.out / "ssml" / "bk01__ch1.plain.ssml").read_text(
            encoding="utf-8"
        )
        root = ET.fromstring(plain)
        assert root.tag == "speak"
        assert len(list(root)) == 0

    def test_sidecar_uses_chapter_reference(self, pipeline):
        side = json.loads(
            (pipeline.out / "ssml" / "bk01__ch1.sidecar.json").read_text(
                encoding="utf-8"
            )
        )
        assert side["default_reference"] is False
        assert side["reference"]["pitch_mean_hz"] > 0
        assert len(side["phrases"]) == 3
        assert all("clamped" in p for p in side["phrases"])


class TestAnalyzeReaders:
    @pytest.fixture()
    def analysis_config(self, pipeline):
        root = pipeline.root
        chapters = read_segments(pipeline.out)
        rows = ["segment_id,character_id"]
        for key, payload in sorted(chapters.items()):
            speaker = CHAPTER_TEXTS[tuple(key.split("__"))][1]
            for seg in payload["segments"]:
                if seg["is_quote"]:
                    rows.append("%s__%s,%s" % (key, seg["segment_id"], speaker))
        (root / "attribution.csv").write_text(
            "\n".join(rows) + "\n", encoding="utf-8"
        )
        chars = [
            "anna\tf\t1.0\t0.0\t0.5",
            "bob\tm\t0.0\t1.0\t0.5",
            "clara\tfemale\t1.0\t0.5\t0.0",
            "dan\tmale\t0.0\t0.5\t1.0",
        ]
        (root / "characters.tsv").write_text(
            "\n".join(chars) + "\n", encoding="utf-8"
        )
        return write_config(
            root,
            name="analysis_config.json",
            analysis={
                "attribution_path": "attribution.csv",
                "characters_path": "characters.tsv",
            },
        )

    def test_reports_characters_and_quote_histograms(
        self, pipeline, analysis_config
    ):
        code, summary = run_cli(
            ["analyze-readers", "--config", str(analysis_config)]
        )
        assert code == 0
        assert summary["books_with_dialogue"] == 2
        # each book has well under 100 dialogue words per gender
        assert summary["eligible_books"] == 0
        report = json.loads(
            (pipeline.out / "reports" / "readers.json").read_text(
                encoding="utf-8"
            )
        )
        assert report["gender"] is None
        assert sorted(report["characters"]) == ["bk01", "bk02"]
        pair = report["characters"]["bk01"]
        assert {c["character_id"] for c in pair} == {"anna", "bob"}
        assert all(c["mean_pitch_hz"] > 0 for c in pair)
        for attr in ("pitch", "volume", "rate"):
            hist = (
                pipeline.out / "reports" / ("quote_hist_%s.csv" % attr)
            ).read_text(encoding="utf-8")
            assert len(hist.splitlines()) == 25
        assert report["quote"]["pitch"]["gap"] > 0

    def test_requires_analysis_paths(self, pipeline, caplog):
        code, _ = run_cli(["analyze-readers", "--config", str(pipeline.config)])
        assert code == 1
        assert "analysis.attribution_path" in caplog.text


class TestFailureHandling:
    def test_corrupt_wav_is_isolated(self, tmp_path, caplog):
        root = build_corpus(tmp_path / "corpus")
        (root / "books" / "bk01" / "ch1.wav").write_bytes(b"not a wav file")
        config = write_config(root)
        code, summary = run_cli(["extract", "--config", str(config)])
        assert code == 0
        assert summary["succeeded"] == 3
        assert [f["chapter"] for f in summary["failed"]] == ["bk01__ch1"]
        assert "bk01__ch1" in caplog.text

    def test_all_chapters_failing_exits_nonzero(self, tmp_path):
        root = build_corpus(tmp_path / "corpus")
        for wav in (root / "books").rglob("*.wav"):
            wav.write_bytes(b"junk")
        config = write_config(root)
        code, summary = run_cli(["extract", "--config", str(config)])
        assert code == 1
        assert summary["succeeded"] == 0

    def test_missing_upstream_names_producer(self, tmp_path, caplog):
        root = build_corpus(tmp_path / "corpus")
        config = write_config(root)
        code, _ = run_cli(["train", "--config", str(config)])
        assert code == 1
        assert "featurize" in caplog.text

    def test_predict_before_train_names_producer(self, tmp_path, caplog):
        root = build_corpus(tmp_path / "corpus")
        config = write_config(root)
        for argv in (
            ["extract", "--config", str(config)],
            ["featurize", "--config", str(config)],
        ):
            code, _ = run_cli(argv)
            assert code == 0
        code, _ = run_cli(["predict", "--config", str(config)])
        assert code == 1
        assert "train" in caplog.text

    def test_bad_config_exits_nonzero(self, tmp_path, caplog):
        config = tmp_path / "config.json"
        config.write_text('{"output_dir": "out"}', encoding="utf-8")
        code, _ = run_cli(["extract", "--config", str(config)])
        assert code == 1
        assert "manifest" in caplog.text


class TestAlternativeModels:
    @pytest.fixture()
    def derived(self, pipeline, tmp_path):
        """A copy of the corpus and artifacts safe to retrain in."""
        root = tmp_path / "corpus"
        shutil.copytree(pipeline.root / "books", root / "books")
        shutil.copy(pipeline.root / "manifest.json", root / "manifest.json")
        shutil.copytree(pipeline.out, root / "out")
        return root

    def test_mlp_pipeline(self, derived):
        config = write_config(
            derived,
            model={"kind": "mlp", "hidden": [6, 6], "epochs": 3},
        )
        code, summary = run_cli(["train", "--config", str(config)])
        assert code == 0
        assert summary["kind"] == "mlp"
        assert summary["epochs_run"] == 3
        code, _ = run_cli(["predict", "--config", str(config)])
        assert code == 0

    def test_bilstm_pipeline_end_to_end(self, derived):
        config = write_config(
            derived,
            model={
                "kind": "bilstm",
                "window_len": 3,
                "hidden_size": 6,
                "dense_size": 4,
                "epochs": 2,
                "min_windows": 2,
            },
        )
        for argv in (
            ["train", "--config", str(config)],
            ["predict", "--config", str(config)],
            ["evaluate", "--config", str(config)],
            ["emit-ssml", "--config", str(config)],
        ):
            code, _ = run_cli(argv)
            assert code == 0
        doc = (derived / "out" / "ssml" / "bk01__ch1.ssml").read_text(
            encoding="utf-8"
        )
        assert len(list(ET.fromstring(doc))) == 3

    def test_external_embeddings_featurize(self, derived):
        chapters = {
            p.stem: json.loads(p.read_text(encoding="utf-8"))
            for p in sorted((derived / "out" / "segments").glob("*.json"))
        }
        lines = ["segment_id\td0\td1"]
        for key, payload in sorted(chapters.items()):
            for seg in payload["segments"]:
                lines.append(
                    "%s__%s\t%.3f\t%.3f"
                    % (key, seg["segment_id"], seg["pitch_z"], 0.5)
                )
        (derived / "emb.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        config = write_config(
            derived,
            features={"kind": "external", "embeddings_path": "emb.tsv"},
        )
        code, summary = run_cli(["featurize", "--config", str(config)])
        assert code == 0
        assert summary["dims"] == 2
        with np.load(derived / "out" / "features" / "bk01__ch1.npz") as data:
            assert data["x"].shape[1] == 2

    def test_character_embedding_block(self, derived):
        chapters = {
            p.stem: json.loads(p.read_text(encoding="utf-8"))
            for p in sorted((derived / "out" / "segments").glob("*.json"))
        }
        rows = ["segment_id,character_id"]
        speakers = {"bk01": "anna", "bk02": "clara"}
        for key, payload in sorted(chapters.items()):
            for seg in payload["segments"]:
                if seg["is_quote"]:
                    rows.append(
                        "%s__%s,%s"
                        % (key, seg["segment_id"], speakers[key.split("__")[0]])
                    )
        (derived / "attribution.csv").write_text(
            "\n".join(rows) + "\n", encoding="utf-8"
        )
        (derived / "characters.tsv").write_text(
            "anna\tf\t1.0\t0.0\nclara\tf\t0.0\t1.0\n", encoding="utf-8"
        )
        base_config = write_config(derived)
        code, base_summary = run_cli(["featurize", "--config", str(base_config)])
        assert code == 0
        config = write_config(
            derived,
            name="char_config.json",
            features={
                "kind": "tfidf",
                "min_df": 1,
                "character": {
                    "table_path": "characters.tsv",
                    "attribution_path": "attribution.csv",
                    "pca_components": 1,
                },
            },
        )
        code, summary = run_cli(["featurize", "--config", str(config)])
        assert code == 0
        assert summary["dims"] == base_summary["dims"] + 1
        key = "bk01__ch1"
        with np.load(derived / "out" / "features" / (key + ".npz")) as data:
            x = data["x"]
        # only the attributed quote row carries a nonzero character block
        assert x[1, -1] != 0.0
        assert x[0, -1] == 0.0 and x[2, -1] == 0.0

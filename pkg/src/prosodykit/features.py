"""Per-segment text feature vectors.

Native TF-IDF over segment text, mean-pooled pretrained word vectors,
externally computed sentence embeddings loaded from TSV, and an optional
PCA-reduced character-embedding block for dialogue segments.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    DataError,
    DimError,
    FormatError,
    NoData,
    RowMismatch,
    TableError,
    UnknownCharacter,
)

_WORD_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


@dataclass
class FeatureMatrix:
    """Dense per-segment feature rows with their segment ids."""

    data: np.ndarray
    row_ids: list
    provenance: str

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DataError("feature data must be 2-dimensional")
        if len(self.row_ids) != self.data.shape[0]:
            raise DataError("row_ids length must match the row count")
        if not np.all(np.isfinite(self.data)):
            raise DataError("feature values must be finite")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]


class TfidfFeaturizer(BaseEstimator, TransformerMixin):
    """TF-IDF over lowercased alphanumeric tokens.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, rows L2-normalized.  Fit on
    training text only; transform leaves out-of-vocabulary rows as exact
    zero vectors.
    """

    def __init__(self, min_df: int = 2):
        self.min_df = min_df

    def fit(self, raw_documents, y=None):
        docs = [_tokens(d) for d in raw_documents]
        if not any(docs):
            raise NoData("no non-empty documents to fit on")
        df = {}
        for doc in docs:
            for token in set(doc):
                df[token] = df.get(token, 0) + 1
        kept = sorted(t for t, c in df.items() if c >= self.min_df)
        if not kept:
            raise NoData(
                "vocabulary is empty after the min_df=%d filter" % self.min_df
            )
        n = len(docs)
        self.vocabulary_ = {t: i for i, t in enumerate(kept)}
        self.idf_ = np.array(
            [np.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in kept]
        )
        return self

    def transform(self, raw_documents) -> np.ndarray:
        check_is_fitted(self, "vocabulary_")
        out = np.zeros((len(raw_documents), len(self.vocabulary_)))
        for row, text in enumerate(raw_documents):
            for token in _tokens(text):
                col = self.vocabulary_.get(token)
                if col is not None:
                    out[row, col] += 1.0
        out *= self.idf_
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        np.divide(out, norms, out=out, where=norms > 0)
        return out


class PcaReducer(BaseEstimator, TransformerMixin):
    """PCA by thin SVD of the mean-centered data.

    Component signs are pinned by forcing each component's
    largest-magnitude entry positive, so serialized models are
    reproducible across runs.
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        n, dims = X.shape
        if n < 2:
            raise DimError("PCA needs at least 2 samples, got %d" % n)
        if not 1 <= self.n_components <= min(n, dims):
            raise DimError(
                "n_components=%d exceeds min(n_samples, dims)=%d"
                % (self.n_components, min(n, dims))
            )
        self.mean_ = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        flip = np.sign(vt[np.arange(len(vt)), np.argmax(np.abs(vt), axis=1)])
        flip[flip == 0] = 1.0
        vt = vt * flip[:, None]
        variances = s**2 / n
        k = self.n_components
        self.components_ = vt[:k]
        self.explained_variance_ = variances[:k]
        total = variances.sum()
        self.explained_variance_ratio_ = (
            variances[:k] / total if total > 0 else np.zeros(k)
        )
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    def to_dict(self) -> dict:
        check_is_fitted(self, "components_")
        return {
            "n_components": self.n_components,
            "mean": self.mean_.tolist(),
            "components": self.components_.tolist(),
            "explained_variance": self.explained_variance_.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PcaReducer":
        model = cls(n_components=payload["n_components"])
        model.mean_ = np.array(payload["mean"])
        model.components_ = np.array(payload["components"])
        model.explained_variance_ = np.array(payload["explained_variance"])
        model.explained_variance_ratio_ = np.array(
            payload["explained_variance_ratio"]
        )
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "PcaReducer":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- pretrained word vectors ---

def load_word_vectors(lines) -> dict:
    """Parse `word d0 d1 ...` lines into a word → vector map.

    Accepts an iterable of lines or a path.  All vectors must share one
    dimensionality.
    """
    if isinstance(lines, (str, bytes)):
        with open(lines, encoding="utf-8") as fh:
            return load_word_vectors(list(fh))
    table = {}
    dims = None
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        word, cells = parts[0], parts[1:]
        try:
            vec = np.array([float(c) for c in cells])
        except ValueError:
            raise FormatError("line %d: non-numeric cell" % lineno)
        if dims is None:
            dims = len(vec)
            if dims == 0:
                raise FormatError("line %d: no vector values" % lineno)
        elif len(vec) != dims:
            raise TableError(
                "line %d: expected %d dims, got %d" % (lineno, dims, len(vec))
            )
        table[word] = vec
    if not table:
        raise NoData("word-vector table is empty")
    return table


def pool_word_vectors(tokens, table) -> tuple:
    """Mean vector over in-vocabulary lowercased tokens.

    Returns (vector, all_oov).  With no in-vocabulary token the vector is
    all zeros and all_oov is True so the caller can flag the segment.
    """
    if not table:
        raise TableError("word-vector table is empty")
    dims = len(next(iter(table.values())))
    hits = []
    for token in tokens:
        vec = table.get(token.lower())
        if vec is None:
            continue
        if len(vec) != dims:
            raise TableError(
                "vector for %r has %d dims, expected %d"
                % (token.lower(), len(vec), dims)
            )
        hits.append(vec)
    if not hits:
        return np.zeros(dims), True
    return np.mean(hits, axis=0), False


# --- externally computed sentence embeddings ---

def load_external_embeddings(path, expected_ids) -> FeatureMatrix:
    """Load a `segment_id<TAB>d0..` TSV and align rows to expected_ids."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("segment_id"):
        raise FormatError("missing segment_id header")
    by_id = {}
    dims = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        seg_id, values = cells[0], cells[1:]
        if seg_id in by_id:
            raise FormatError("line %d: duplicate segment id %r" % (lineno, seg_id))
        try:
            row = np.array([float(v) for v in values])
        except ValueError:
            raise FormatError("line %d: non-numeric cell" % lineno)
        if dims is None:
            dims = len(row)
        elif len(row) != dims:
            raise FormatError(
                "line %d: expected %d dims, got %d" % (lineno, dims, len(row))
            )
        by_id[seg_id] = row
    expected = [str(i) for i in expected_ids]
    missing = [i for i in expected if i not in by_id]
    surplus = [i for i in by_id if i not in set(expected)]
    if missing or surplus:
        raise RowMismatch(
            "embedding rows do not match segments (missing %s, surplus %s)"
            % (missing, surplus),
            missing=missing,
            surplus=surplus,
        )
    data = np.vstack([by_id[i] for i in expected]) if expected else np.zeros((0, 0))
    return FeatureMatrix(data=data, row_ids=list(expected_ids), provenance="external")


# --- character embeddings ---

def load_character_table(path) -> tuple:
    """Parse `character_id<TAB>gender<TAB>d0..` into (vectors, genders)."""
    vectors = {}
    genders = {}
    dims = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            if len(cells) < 3:
                raise FormatError("line %d: expected id, gender, values" % lineno)
            char_id, gender = cells[0], cells[1]
            try:
                vec = np.array([float(v) for v in cells[2:]])
            except ValueError:
                raise FormatError("line %d: non-numeric cell" % lineno)
            if dims is None:
                dims = len(vec)
            elif len(vec) != dims:
                raise TableError(
                    "line %d: expected %d dims, got %d" % (lineno, dims, len(vec))
                )
            vectors[char_id] = vec
            genders[char_id] = gender
    if not vectors:
        raise NoData("character table is empty")
    return vectors, genders


def load_quote_attribution(path) -> dict:
    """Parse a `segment_id,character_id` CSV into a dict."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "segment_id,character_id":
        raise FormatError("missing segment_id,character_id header")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise FormatError("line %d: expected two cells" % lineno)
        out[cells[0]] = cells[1]
    return out


def append_character_embedding(
    features: FeatureMatrix, segments, char_vectors, quote_attribution, pca
) -> FeatureMatrix:
    """Append a PCA-reduced speaker vector to each dialogue segment's row.

    Narration and unattributed dialogue get a zero block of the same
    width, keeping row dimensionality uniform.
    """
    if len(segments) != features.rows:
        raise DataError("segments and feature rows must correspond")
    k = pca.components_.shape[0]
    blocks = np.zeros((features.rows, k))
    for row, seg in enumerate(segments):
        if not seg.is_quote:
            continue
        char_id = quote_attribution.get(str(seg.segment_id))
        if char_id is None:
            continue
        if char_id not in char_vectors:
            raise UnknownCharacter(
                "segment %s attributed to unknown character %r"
                % (seg.segment_id, char_id)
            )
        blocks[row] = pca.transform(char_vectors[char_id][None, :])[0]
    return FeatureMatrix(
        data=np.hstack([features.data, blocks]),
        row_ids=list(features.row_ids),
        provenance=features.provenance + "+char",
    )

"""Held-out evaluation: pooled MSE and per-chapter correlations by book."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NoData

ATTRIBUTES = ("pitch", "volume", "rate")


@dataclass
class EvalChapter:
    """One chapter's ordered feature rows, targets, and dialogue mask."""

    book_id: str
    chapter_id: str
    features: np.ndarray
    targets: np.ndarray
    is_quote: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.is_quote = np.asarray(self.is_quote, dtype=bool)


def split_books(book_ids, ratio: float = 0.75, seed: int = 0):
    """Deterministic book-level train/test partition."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError("split ratio must be in (0, 1), got %r" % ratio)
    ids = sorted(set(book_ids))
    if not ids:
        return [], []
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_train = int(len(order) * ratio)
    if len(order) >= 2:
        n_train = min(max(n_train, 1), len(order) - 1)
    return order[:n_train], order[n_train:]


def evaluate(model, chapters, subset: str = "all") -> dict:
    """Score a model on held-out chapters.

    Predictions always run over each chapter's full segment sequence (so
    windowed models keep their context); the subset filter then restricts
    which segments are scored.  MSE is pooled over segments; Pearson
    correlation is computed per chapter and averaged per book.
    """
    if subset not in ("all", "dialogue_only"):
        raise ConfigError("subset must be 'all' or 'dialogue_only'")
    sq_err_sum = np.zeros(3)
    n_selected = 0
    book_corrs = {}
    for chapter in chapters:
        preds = model.predict(chapter.features)
        mask = chapter.is_quote if subset == "dialogue_only" else np.ones(
            len(chapter.targets), dtype=bool
        )
        if not mask.any():
            continue
        p = preds[mask]
        t = chapter.targets[mask]
        sq_err_sum += ((p - t) ** 2).sum(axis=0)
        n_selected += len(t)
        per_attr = book_corrs.setdefault(
            chapter.book_id, {a: [] for a in ATTRIBUTES}
        )
        for col, attr in enumerate(ATTRIBUTES):
            r = _pearson(p[:, col], t[:, col])
            if r is not None:
                per_attr[attr].append(r)
    if n_selected == 0:
        raise NoData("no segments selected for subset %r" % subset)
    mse = sq_err_sum / n_selected
    per_book = {
        book: {
            attr: (float(np.mean(rs)) if rs else None)
            for attr, rs in attrs.items()
        }
        for book, attrs in book_corrs.items()
    }
    return {
        "subset": subset,
        "n_segments": int(n_selected),
        "mse": {
            "pitch": float(mse[0]),
            "volume": float(mse[1]),
            "rate": float(mse[2]),
            "mean": float(mse.mean()),
        },
        "per_book_correlation": per_book,
    }


def _pearson(x, y):
    if len(x) < 2:
        return None
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def correlation_csv(report: dict) -> str:
    """Serialize per-book correlations as `book_id,attribute,correlation`."""
    out = io.StringIO()
    out.write("book_id,attribute,correlation\n")
    for book in sorted(report["per_book_correlation"]):
        attrs = report["per_book_correlation"][book]
        for attr in ATTRIBUTES:
            value = attrs.get(attr)
            cell = "" if value is None else "%.6f" % value
            out.write("%s,%s,%s\n" % (book, attr, cell))
    return out.getvalue()

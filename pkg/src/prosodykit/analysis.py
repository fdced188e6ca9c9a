"""Reader-behavior statistics over attributed dialogue.

Aggregates raw (pre-z-score) pitch and volume per character, compares
genders per book with an exact one-sided binomial test, and summarizes
quote versus non-quote value distributions for plotting.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientCharacters, NoData

HIST_LO = -3.0
HIST_HI = 3.0
HIST_BINS = 24  # width 0.25

MIN_GENDER_WORDS = 100


@dataclass
class DialogueRow:
    """One attributed dialogue segment's raw measurements."""

    character_id: str
    word_count: int
    pitch_hz: float | None = None
    volume_db: float | None = None


@dataclass
class CharacterStats:
    character_id: str
    gender: str
    word_count: int
    mean_pitch_hz: float | None = None
    mean_volume_db: float | None = None


def binom_tail_p(k: int, n: int) -> float:
    """One-sided binomial tail: P(X >= k) for X ~ Binomial(n, 1/2).

    Summed in log space so n in the hundreds cannot overflow.
    """
    if n < 0 or not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if k == 0:
        return 1.0
    log_half = -n * math.log(2.0)
    log_terms = [
        math.lgamma(n + 1)
        - math.lgamma(i + 1)
        - math.lgamma(n - i + 1)
        + log_half
        for i in range(k, n + 1)
    ]
    peak = max(log_terms)
    total = sum(math.exp(t - peak) for t in log_terms)
    return float(math.exp(peak + math.log(total)))


def _mean_present(values):
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _normalize_gender(label) -> str:
    if label is None:
        return "unknown"
    text = str(label).strip().lower()
    if text in ("f", "female"):
        return "female"
    if text in ("m", "male"):
        return "male"
    return "unknown"


def character_stats(rows, genders=None) -> list:
    """Per-character aggregates over attributed dialogue rows.

    Means are over segments with a value; ranking order is word count
    descending with ties broken by character id.
    """
    genders = genders or {}
    grouped = {}
    for row in rows:
        grouped.setdefault(row.character_id, []).append(row)
    stats = []
    for char_id, char_rows in grouped.items():
        stats.append(
            CharacterStats(
                character_id=char_id,
                gender=_normalize_gender(genders.get(char_id)),
                word_count=sum(r.word_count for r in char_rows),
                mean_pitch_hz=_mean_present([r.pitch_hz for r in char_rows]),
                mean_volume_db=_mean_present([r.volume_db for r in char_rows]),
            )
        )
    stats.sort(key=lambda s: (-s.word_count, s.character_id))
    return stats


def character_pair_stats(rows, genders=None) -> tuple:
    """The two most-quoted characters' aggregate stats."""
    ranked = character_stats(rows, genders)
    if len(ranked) < 2:
        raise InsufficientCharacters(
            "need at least 2 characters with dialogue, got %d" % len(ranked)
        )
    return ranked[0], ranked[1]


def gender_dialogue_test(books, genders) -> dict:
    """Compare dialogue pitch and volume between genders across books.

    books maps book_id to its DialogueRow list.  A book is eligible when
    each gender has at least 100 attributed dialogue words.  Reports the
    count of eligible books where female mean pitch exceeds male (and
    where male mean volume exceeds female) with exact one-sided binomial
    p-values.
    """
    per_book = []
    k_pitch = 0
    k_volume = 0
    n_eligible = 0
    for book_id in sorted(books):
        rows = books[book_id]
        by_gender = {"male": [], "female": []}
        for row in rows:
            gender = _normalize_gender(genders.get(row.character_id))
            if gender in by_gender:
                by_gender[gender].append(row)
        words = {g: sum(r.word_count for r in rs) for g, rs in by_gender.items()}
        entry = {
            "book_id": book_id,
            "male_words": words["male"],
            "female_words": words["female"],
            "male_pitch_hz": _mean_present(
                [r.pitch_hz for r in by_gender["male"]]
            ),
            "female_pitch_hz": _mean_present(
                [r.pitch_hz for r in by_gender["female"]]
            ),
            "male_volume_db": _mean_present(
                [r.volume_db for r in by_gender["male"]]
            ),
            "female_volume_db": _mean_present(
                [r.volume_db for r in by_gender["female"]]
            ),
        }
        eligible = (
            words["male"] >= MIN_GENDER_WORDS
            and words["female"] >= MIN_GENDER_WORDS
            and None
            not in (
                entry["male_pitch_hz"],
                entry["female_pitch_hz"],
                entry["male_volume_db"],
                entry["female_volume_db"],
            )
        )
        entry["eligible"] = eligible
        per_book.append(entry)
        if eligible:
            n_eligible += 1
            if entry["female_pitch_hz"] > entry["male_pitch_hz"]:
                k_pitch += 1
            if entry["male_volume_db"] > entry["female_volume_db"]:
                k_volume += 1
    if n_eligible == 0:
        raise NoData("no books meet the per-gender word threshold")
    return {
        "n": n_eligible,
        "k_pitch_female_higher": k_pitch,
        "p_pitch": binom_tail_p(k_pitch, n_eligible),
        "k_volume_male_higher": k_volume,
        "p_volume": binom_tail_p(k_volume, n_eligible),
        "per_book": per_book,
    }


def quote_distribution(is_quote, values) -> dict:
    """Summarize a value series split into quote and non-quote classes.

    Histograms use fixed 0.25-wide bins over [-3, 3]; values outside the
    range count toward the class mean and std but not the histogram.
    """
    is_quote = list(is_quote)
    values = list(values)
    if len(is_quote) != len(values):
        raise ValueError("is_quote and values must align")
    classes = {"quote": [], "non_quote": []}
    for flag, value in zip(is_quote, values):
        classes["quote" if flag else "non_quote"].append(value)
    edges = np.linspace(HIST_LO, HIST_HI, HIST_BINS + 1)
    out = {"gap": None, "empty_class": None}
    for name, vals in classes.items():
        if not vals:
            out[name] = None
            out["empty_class"] = name
            continue
        arr = np.asarray(vals, dtype=np.float64)
        counts, _ = np.histogram(arr, bins=edges)
        out[name] = {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "std": float(arr.std()),
            "histogram": counts.tolist(),
        }
    if out["quote"] and out["non_quote"]:
        out["gap"] = out["quote"]["mean"] - out["non_quote"]["mean"]
    out["bin_edges"] = edges.tolist()
    return out


def quote_distribution_csv(summary: dict) -> str:
    """Histogram rows `bin_start,bin_end,quote_count,non_quote_count`."""
    edges = summary["bin_edges"]
    out = io.StringIO()
    out.write("bin_start,bin_end,quote_count,non_quote_count\n")
    for i in range(len(edges) - 1):
        quote = summary["quote"]["histogram"][i] if summary["quote"] else ""
        nonq = (
            summary["non_quote"]["histogram"][i] if summary["non_quote"] else ""
        )
        out.write("%.2f,%.2f,%s,%s\n" % (edges[i], edges[i + 1], quote, nonq))
    return out.getvalue()

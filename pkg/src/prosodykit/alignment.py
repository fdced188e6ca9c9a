"""Ingest forced-alignment JSON and join it with chapter text.

The input schema follows the Gentle aligner's output: a ``words`` array whose
entries carry ``word``, ``case``, and (for successfully aligned words)
``start``, ``end``, and ``phones`` with per-phone durations.  Character
offsets come from ``startOffset``/``endOffset`` when the aligner provides
them, otherwise from greedy left-to-right matching against the chapter text.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import NoTimingInfo, OffsetError, SchemaError

ALIGNED = "aligned"
NOT_FOUND = "not_found"

# tolerated gap between the phone-duration sum and the word's time span;
# larger gaps keep the word but exclude it from rate-of-speech statistics
PHONE_SUM_TOLERANCE_S = 0.02


@dataclass
class AlignedWord:
    token: str
    status: str = ALIGNED
    start_s: float | None = None
    end_s: float | None = None
    phones: list[tuple[str, float]] = field(default_factory=list)
    start_char: int = -1
    end_char: int = -1
    phone_mismatch: bool = False

    @property
    def aligned(self) -> bool:
        return self.status == ALIGNED


@dataclass
class AlignedChapter:
    book_id: str
    chapter_id: str
    text: str
    words: list[AlignedWord]
    audio_path: str = ""

    def to_dict(self) -> dict:
        return {
            "book_id": self.book_id,
            "chapter_id": self.chapter_id,
            "text": self.text,
            "audio_path": self.audio_path,
            "words": [
                {
                    "token": w.token,
                    "status": w.status,
                    "start_s": w.start_s,
                    "end_s": w.end_s,
                    "phones": [[p, d] for p, d in w.phones],
                    "start_char": w.start_char,
                    "end_char": w.end_char,
                    "phone_mismatch": w.phone_mismatch,
                }
                for w in self.words
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlignedChapter":
        words = [
            AlignedWord(
                token=w["token"],
                status=w["status"],
                start_s=w["start_s"],
                end_s=w["end_s"],
                phones=[(p, float(dur)) for p, dur in w["phones"]],
                start_char=w["start_char"],
                end_char=w["end_char"],
                phone_mismatch=w["phone_mismatch"],
            )
            for w in d["words"]
        ]
        return cls(
            book_id=d["book_id"],
            chapter_id=d["chapter_id"],
            text=d["text"],
            words=words,
            audio_path=d.get("audio_path", ""),
        )


def parse_alignment(
    json_bytes: bytes | str,
    chapter_text: str,
    book_id: str = "",
    chapter_id: str = "",
    audio_path: str = "",
) -> AlignedChapter:
    """Parse aligner JSON against the chapter text.

    Raises SchemaError when the ``words`` array is missing or timestamps are
    malformed/non-monotonic, and OffsetError when a word cannot be placed in
    the text.
    """
    doc = json.loads(json_bytes)
    if not isinstance(doc, dict) or "words" not in doc:
        raise SchemaError("alignment JSON has no 'words' key")
    if not isinstance(doc["words"], list):
        raise SchemaError("'words' is not an array")

    words: list[AlignedWord] = []
    cursor = 0
    last_start = None
    lower_text = chapter_text.lower()
    for i, entry in enumerate(doc["words"]):
        if "word" not in entry:
            raise SchemaError(f"word {i}: missing 'word' field")
        token = entry["word"]
        word = AlignedWord(token=token)

        if entry.get("case") == "success":
            try:
                word.start_s = float(entry["start"])
                word.end_s = float(entry["end"])
            except (KeyError, TypeError, ValueError):
                raise SchemaError(f"word {i}: aligned word lacks start/end")
            if word.end_s < word.start_s:
                raise SchemaError(f"word {i}: end_s precedes start_s")
            if last_start is not None and word.start_s < last_start:
                raise SchemaError(
                    f"word {i}: start_s decreases ({word.start_s} after {last_start})"
                )
            last_start = word.start_s
            word.phones = [
                (p["phone"], float(p["duration"])) for p in entry.get("phones", [])
            ]
            span = word.end_s - word.start_s
            if abs(sum(d for _, d in word.phones) - span) > PHONE_SUM_TOLERANCE_S:
                word.phone_mismatch = True
        else:
            word.status = NOT_FOUND

        start_off = entry.get("startOffset")
        end_off = entry.get("endOffset")
        if start_off is not None and end_off is not None:
            if not (0 <= start_off <= end_off <= len(chapter_text)):
                raise OffsetError(i, f"offsets ({start_off}, {end_off}) out of bounds")
            if start_off < cursor:
                raise OffsetError(i, "offsets overlap the previous word")
            word.start_char, word.end_char = start_off, end_off
        else:
            # greedy left-to-right, case-insensitive (the aligner tolerates
            # noisy transcripts)
            pos = lower_text.find(token.lower(), cursor)
            if pos < 0:
                raise OffsetError(i, f"token {token!r} not found after offset {cursor}")
            word.start_char, word.end_char = pos, pos + len(token)
        cursor = word.end_char
        words.append(word)

    return AlignedChapter(
        book_id=book_id,
        chapter_id=chapter_id,
        text=chapter_text,
        words=words,
        audio_path=audio_path,
    )


def segment_time_span(chapter: AlignedChapter, word_span: range) -> tuple[float, float]:
    """Audio time envelope of a word-index span: first aligned word's start
    to last aligned word's end.  Raises NoTimingInfo when the span holds no
    aligned word."""
    aligned = [chapter.words[i] for i in word_span if chapter.words[i].aligned]
    if not aligned:
        raise NoTimingInfo(f"no aligned words in span {word_span}")
    return aligned[0].start_s, aligned[-1].end_s

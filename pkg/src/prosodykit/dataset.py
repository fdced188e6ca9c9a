"""Corpus manifests and chapter assembly.

A corpus is a JSON manifest listing chapters with their text, alignment,
and audio files, or a directory laid out as
books/<book_id>/<chapter_id>.{txt,json,wav} from which that manifest is
derived.  Optional per-chapter parse-tree files carry one bracketed
constituency tree per line.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .alignment import parse_alignment
from .errors import SchemaError
from .segmentation import parse_ptb

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

_REQUIRED_KEYS = ("book_id", "chapter_id", "text_path", "align_path", "audio_path")


@dataclass
class ChapterEntry:
    book_id: str
    chapter_id: str
    text_path: Path
    align_path: Path
    audio_path: Path
    trees_path: Path | None = None

    @property
    def key(self) -> str:
        """Filesystem-safe identifier used to name per-chapter artifacts."""
        return "%s__%s" % (self.book_id, self.chapter_id)


def _check_id(value, field: str, index: int) -> str:
    # "__" is reserved as the separator in artifact keys
    if not isinstance(value, str) or not _ID_RE.match(value) or "__" in value:
        raise SchemaError(
            "manifest entry %d: %s %r is not a safe identifier" % (index, field, value)
        )
    return value


def load_manifest(path) -> list:
    """Parse a JSON array of chapter entries.

    Relative paths resolve against the manifest's own directory.  Entries
    must carry book_id, chapter_id, text_path, align_path, audio_path;
    trees_path is optional.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("manifest is not valid JSON: %s" % exc)
    if not isinstance(raw, list):
        raise SchemaError("manifest must be a JSON array of chapter entries")
    base = path.parent
    entries = []
    seen = set()
    for index, item in enumerate(raw):
        if not isinstance(item, dict):
            raise SchemaError("manifest entry %d is not an object" % index)
        missing = [k for k in _REQUIRED_KEYS if k not in item]
        if missing:
            raise SchemaError(
                "manifest entry %d missing keys: %s" % (index, ", ".join(missing))
            )
        unknown = set(item) - set(_REQUIRED_KEYS) - {"trees_path"}
        if unknown:
            raise SchemaError(
                "manifest entry %d has unknown keys: %s"
                % (index, ", ".join(sorted(unknown)))
            )
        entry = ChapterEntry(
            book_id=_check_id(item["book_id"], "book_id", index),
            chapter_id=_check_id(item["chapter_id"], "chapter_id", index),
            text_path=base / item["text_path"],
            align_path=base / item["align_path"],
            audio_path=base / item["audio_path"],
            trees_path=base / item["trees_path"] if item.get("trees_path") else None,
        )
        if entry.key in seen:
            raise SchemaError("duplicate chapter %s" % entry.key)
        seen.add(entry.key)
        entries.append(entry)
    return entries


def discover_corpus(root) -> list:
    """Build chapter entries from a books/<book>/<chapter>.{txt,json,wav} tree."""
    root = Path(root)
    books_dir = root / "books"
    if not books_dir.is_dir():
        raise SchemaError("no books/ directory under %s" % root)
    entries = []
    for book_dir in sorted(p for p in books_dir.iterdir() if p.is_dir()):
        for text_path in sorted(book_dir.glob("*.txt")):
            stem = text_path.stem
            align_path = text_path.with_suffix(".json")
            audio_path = text_path.with_suffix(".wav")
            if not align_path.is_file() or not audio_path.is_file():
                continue
            trees_path = text_path.with_suffix(".trees")
            entries.append(
                ChapterEntry(
                    book_id=book_dir.name,
                    chapter_id=stem,
                    text_path=text_path,
                    align_path=align_path,
                    audio_path=audio_path,
                    trees_path=trees_path if trees_path.is_file() else None,
                )
            )
    return entries


def load_trees(path) -> dict:
    """Read one bracketed tree per non-blank line, keyed by sentence index."""
    trees = {}
    index = 0
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        trees[index] = parse_ptb(line)
        index += 1
    return trees


def load_chapter(entry: ChapterEntry) -> tuple:
    """Read and join a chapter's text and alignment; returns (chapter, trees)."""
    text = entry.text_path.read_text(encoding="utf-8")
    chapter = parse_alignment(
        entry.align_path.read_bytes(),
        text,
        book_id=entry.book_id,
        chapter_id=entry.chapter_id,
        audio_path=str(entry.audio_path),
    )
    trees = load_trees(entry.trees_path) if entry.trees_path else None
    return chapter, trees

"""Sentence and phrase segmentation over aligned chapter text.

Chapters are cut into sentences with a deterministic punctuation rule,
sentences into phrase segments using constituency parses (when available)
plus punctuation, and double-quoted spans are marked as dialogue.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import ParseError, TokenMismatch

# Tokens that end a phrase when they appear inside a sentence.
PHRASE_BREAKS = {",", ";", ":", "—", ".", "!", "?"}

# Words + possessive/contraction tails, or single punctuation marks.
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")

# Titles whose trailing period never ends a sentence.
_ABBREVIATIONS = {"Mr", "Mrs", "Dr", "St"}

_OPENING_QUOTES = {'"', "“"}
# Characters allowed between terminal punctuation and the sentence break.
_TRAILING_CLOSERS = {'"', "”", "’", ")"}

_BRACKET_ESCAPES = {
    "-LRB-": "(",
    "-RRB-": ")",
    "-LSB-": "[",
    "-RSB-": "]",
    "-LCB-": "{",
    "-RCB-": "}",
}


@dataclass
class ParseTree:
    """Node of a bracketed constituency parse."""

    label: str
    children: list["ParseTree"] = field(default_factory=list)
    token: str | None = None

    def leaves(self) -> list[str]:
        if self.token is not None:
            return [self.token]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out


@dataclass
class QuoteSpan:
    """Character range of one double-quoted stretch, delimiters included."""

    start: int
    end: int
    unterminated: bool = False


@dataclass
class Segment:
    """One phrase of a sentence, tied back to aligned words by index."""

    segment_id: int
    sentence_id: int
    text: str
    word_span: range
    start_char: int
    end_char: int
    is_quote: bool = False
    prosody: tuple | None = None


def tokenize(text: str, base: int = 0):
    """Return (token, start, end) triples; offsets are shifted by base."""
    return [
        (m.group(), base + m.start(), base + m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


# --- bracketed parse ingestion ---

def parse_ptb(bracketed: str) -> ParseTree:
    """Parse one Penn-Treebank-style bracketing into a ParseTree.

    Labels may be empty (unlabeled roots are common parser output).
    Bracket escapes (-LRB- and friends) are restored in leaf tokens.
    """
    text = bracketed
    pos = _skip_space(text, 0)
    if pos >= len(text):
        raise ParseError(pos, "empty input")
    tree, pos = _parse_node(text, pos)
    pos = _skip_space(text, pos)
    if pos < len(text):
        raise ParseError(pos, "trailing text after parse")
    return tree


def _skip_space(text, pos):
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _read_atom(text, pos):
    start = pos
    while pos < len(text) and not text[pos].isspace() and text[pos] not in "()":
        pos += 1
    return text[start:pos], pos


def _parse_node(text, pos):
    if text[pos] != "(":
        raise ParseError(pos, "expected '('")
    pos = _skip_space(text, pos + 1)
    label, pos = _read_atom(text, pos)
    pos = _skip_space(text, pos)
    if pos >= len(text):
        raise ParseError(pos, "unbalanced parentheses")
    if text[pos] == "(":
        children = []
        while pos < len(text) and text[pos] == "(":
            child, pos = _parse_node(text, pos)
            children.append(child)
            pos = _skip_space(text, pos)
        if pos >= len(text):
            raise ParseError(pos, "unbalanced parentheses")
        if text[pos] != ")":
            raise ParseError(pos, "expected ')'")
        return ParseTree(label=label, children=children), pos + 1
    if text[pos] == ")":
        if not label:
            raise ParseError(pos, "empty node")
        # (TAG token) collapsed by a parser into (token) is not valid here,
        # so a bare atom before ')' is a leaf with the preceding label.
        raise ParseError(pos, "node has label but no token or children")
    token, pos = _read_atom(text, pos)
    pos = _skip_space(text, pos)
    if pos >= len(text) or text[pos] != ")":
        raise ParseError(pos, "expected ')' after token")
    return ParseTree(label=label, token=_BRACKET_ESCAPES.get(token, token)), pos + 1


# --- phrase splitting ---

def split_phrases(sentence_tokens, tree: ParseTree | None = None):
    """Cut a sentence's tokens into phrase spans.

    Cut points come from phrase-break punctuation and, when a parse is
    given, from the edges of maximal inner S constituents.  Runs of
    adjacent cut points collapse to a single cut: the last punctuation
    cut in the run when one exists (punctuation binds to the left),
    otherwise the earliest cut (conjunctions bind to the right).
    """
    n = len(sentence_tokens)
    if n == 0:
        return []
    punct_cuts = {
        i + 1 for i, tok in enumerate(sentence_tokens) if tok in PHRASE_BREAKS
    }
    edge_cuts = set()
    if tree is not None:
        if tree.leaves() != list(sentence_tokens):
            raise TokenMismatch(
                "parse-tree leaves do not match the sentence tokens"
            )
        for start, end in _inner_s_edges(tree):
            edge_cuts.add(start)
            edge_cuts.add(end)
    interior = sorted(c for c in punct_cuts | edge_cuts if 0 < c < n)
    cuts = [0]
    for run in _adjacent_runs(interior):
        in_punct = [c for c in run if c in punct_cuts]
        cuts.append(in_punct[-1] if in_punct else run[0])
    cuts.append(n)
    return [range(a, b) for a, b in zip(cuts, cuts[1:])]


def _adjacent_runs(values):
    runs = []
    for v in values:
        if runs and v == runs[-1][-1] + 1:
            runs[-1].append(v)
        else:
            runs.append([v])
    return runs


def _inner_s_edges(tree: ParseTree):
    """Token spans of S nodes below the root with no non-root S ancestor."""
    root = tree
    # Unwrap single-child dummy roots (TOP, ROOT, empty label) so the same
    # parse yields the same edges whether or not the parser wraps it.
    while (
        root.token is None
        and len(root.children) == 1
        and root.label in ("", "TOP", "ROOT")
    ):
        root = root.children[0]
    edges = []

    def walk(node, start, blocked):
        if node.token is not None:
            return start + 1
        inner = node is not root and node.label == "S" and not blocked
        pos = start
        for child in node.children:
            pos = walk(child, pos, blocked or inner)
        if inner:
            edges.append((start, pos))
        return pos

    walk(root, 0, False)
    return edges


# --- quotes ---

def detect_quotes(text: str) -> list[QuoteSpan]:
    """Find double-quoted spans; curly and straight delimiters both count.

    An opener is closed by the matching delimiter of its own alphabet.
    A trailing unmatched opener closes at the end of the text and is
    flagged rather than rejected.
    """
    spans = []
    open_at = None
    closer = None
    for i, ch in enumerate(text):
        if open_at is None:
            if ch == '"':
                open_at, closer = i, '"'
            elif ch == "“":
                open_at, closer = i, "”"
        elif ch == closer:
            spans.append(QuoteSpan(start=open_at, end=i + 1))
            open_at = None
    if open_at is not None:
        spans.append(QuoteSpan(start=open_at, end=len(text), unterminated=True))
    return spans


def mark_quote_segments(segments, quote_spans):
    """Set is_quote on each segment that overlaps any quoted span."""
    for seg in segments:
        seg.is_quote = any(
            seg.start_char < q.end and q.start < seg.end_char
            for q in quote_spans
        )
    return segments


# --- sentence splitting ---

def split_sentences(text: str):
    """Split text into sentence character spans.

    A sentence ends at terminal punctuation (plus any closing quotes or
    brackets) followed by whitespace and an uppercase letter or opening
    quote.  A short title list (Mr., Mrs., Dr., St.) suppresses false
    breaks; other ambiguity is tolerated rather than modeled.
    """
    n = len(text)
    breaks = []
    i = 0
    while i < n:
        ch = text[i]
        if ch not in ".!?":
            i += 1
            continue
        if ch == "." and _word_before(text, i) in _ABBREVIATIONS:
            i += 1
            continue
        j = i + 1
        while j < n and text[j] in _TRAILING_CLOSERS:
            j += 1
        k = j
        while k < n and text[k].isspace():
            k += 1
        if k > j and k < n and (text[k].isupper() or text[k] in _OPENING_QUOTES):
            breaks.append(j)
            i = k
        else:
            i += 1
    spans = []
    prev = 0
    for bound in breaks + [n]:
        start, end = prev, bound
        while start < end and text[start].isspace():
            start += 1
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start:
            spans.append((start, end))
        prev = bound
    return spans


def _word_before(text, pos):
    start = pos
    while start > 0 and text[start - 1].isalpha():
        start -= 1
    return text[start:pos]


# --- chapter assembly ---

def segment_chapter(chapter, trees=None, on_tree_mismatch="fallback"):
    """Build the chapter's phrase segments from its text and aligned words.

    trees maps sentence index to a ParseTree.  A tree whose leaves do not
    match the sentence tokens is dropped in favor of the punctuation rule
    (on_tree_mismatch="fallback") or re-raised ("raise").  Segments that
    end up with no aligned words merge into a neighbor so every segment
    can carry prosody.
    """
    if on_tree_mismatch not in ("fallback", "raise"):
        raise ValueError("on_tree_mismatch must be 'fallback' or 'raise'")
    trees = trees or {}
    word_starts = [w.start_char for w in chapter.words]
    segments = []
    for sent_id, (s_start, s_end) in enumerate(split_sentences(chapter.text)):
        tokens = tokenize(chapter.text[s_start:s_end], base=s_start)
        texts = [t[0] for t in tokens]
        tree = trees.get(sent_id)
        try:
            spans = split_phrases(texts, tree)
        except TokenMismatch:
            if on_tree_mismatch == "raise":
                raise
            spans = split_phrases(texts, None)
        sentence_segs = []
        for span in spans:
            seg_start = tokens[span[0]][1]
            seg_end = tokens[span[-1]][2]
            lo = bisect_left(word_starts, seg_start)
            hi = bisect_left(word_starts, seg_end)
            sentence_segs.append(
                Segment(
                    segment_id=-1,
                    sentence_id=sent_id,
                    text="",
                    word_span=range(lo, hi),
                    start_char=seg_start,
                    end_char=seg_end,
                )
            )
        segments.extend(_merge_wordless(sentence_segs))
    for seg_id, seg in enumerate(segments):
        seg.segment_id = seg_id
        seg.text = chapter.text[seg.start_char:seg.end_char]
    mark_quote_segments(segments, detect_quotes(chapter.text))
    return segments


def _merge_wordless(sentence_segs):
    """Fold segments without words into a neighbor in the same sentence."""
    merged = []
    pending_start = None
    for seg in sentence_segs:
        if len(seg.word_span) == 0:
            if merged:
                prev = merged[-1]
                prev.end_char = seg.end_char
                prev.word_span = range(prev.word_span.start, seg.word_span.stop)
            elif pending_start is None:
                pending_start = (seg.start_char, seg.word_span.start)
            continue
        if pending_start is not None:
            seg.start_char = pending_start[0]
            seg.word_span = range(pending_start[1], seg.word_span.stop)
            pending_start = None
        merged.append(seg)
    # A sentence with no aligned words at all disappears: there is nothing
    # to measure prosody on.
    return merged

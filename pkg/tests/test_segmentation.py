"""Parse ingestion, phrase splitting, quote detection, sentence assembly."""

import pytest

from prosodykit.alignment import AlignedChapter, AlignedWord
from prosodykit.errors import ParseError, TokenMismatch
from prosodykit.segmentation import (
    QuoteSpan,
    Segment,
    detect_quotes,
    mark_quote_segments,
    parse_ptb,
    segment_chapter,
    split_phrases,
    split_sentences,
    tokenize,
)

TWO_CLAUSE = (
    "(S (S (NP (PRP He)) (VP (VBD left))) (, ,) (CC and)"
    " (S (NP (PRP she)) (VP (VBD stayed))))"
)


# --- parse_ptb ---

def test_parse_simple_tree():
    tree = parse_ptb("(S (NP (PRP I)) (VP (VBD ran)))")
    assert tree.label == "S"
    assert tree.leaves() == ["I", "ran"]
    assert tree.children[0].children[0].label == "PRP"


def test_parse_two_inner_clauses():
    tree = parse_ptb(TWO_CLAUSE)
    assert tree.leaves() == ["He", "left", ",", "and", "she", "stayed"]
    inner_s = [c for c in tree.children if c.label == "S"]
    assert len(inner_s) == 2


def test_parse_unclosed_opens():
    with pytest.raises(ParseError) as info:
        parse_ptb("((")
    assert info.value.position == 2


def test_parse_empty_input():
    with pytest.raises(ParseError):
        parse_ptb("")
    with pytest.raises(ParseError):
        parse_ptb("   ")


def test_parse_missing_close():
    text = "(S (NP x)"
    with pytest.raises(ParseError) as info:
        parse_ptb(text)
    assert info.value.position == len(text)


def test_parse_trailing_text():
    with pytest.raises(ParseError):
        parse_ptb("(S (NN x)) y")


def test_parse_restores_bracket_escapes():
    tree = parse_ptb("(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))")
    assert tree.leaves() == ["(", "x", ")"]


def test_parse_unlabeled_root():
    tree = parse_ptb("( (S (NP (PRP I)) (VP (VBP know))))")
    assert tree.label == ""
    assert tree.leaves() == ["I", "know"]


# --- split_phrases ---

def test_split_on_inner_clauses_and_comma():
    tokens = ["He", "left", ",", "and", "she", "stayed"]
    spans = split_phrases(tokens, parse_ptb(TWO_CLAUSE))
    assert spans == [range(0, 3), range(3, 6)]
    assert [" ".join(tokens[i] for i in s) for s in spans] == [
        "He left ,",
        "and she stayed",
    ]


def test_split_single_token():
    assert split_phrases(["Yes"]) == [range(0, 1)]


def test_split_word_plus_period():
    assert split_phrases(["Yes", "."]) == [range(0, 2)]


def test_split_punctuation_only():
    assert split_phrases(["Stop", "!", "Now", "!"]) == [range(0, 2), range(2, 4)]


def test_split_leaf_mismatch():
    tree = parse_ptb("(S (NN cat))")
    with pytest.raises(TokenMismatch):
        split_phrases(["dog"], tree)


def test_split_root_only_clause_matches_punctuation_rule():
    tree = parse_ptb("(S (NP (DT the) (NN dog)) (VP (VBD ran)))")
    tokens = ["the", "dog", "ran"]
    assert split_phrases(tokens, tree) == split_phrases(tokens, None)


def test_split_multiple_commas():
    spans = split_phrases(["a", ",", "b", ",", "c"])
    assert spans == [range(0, 2), range(2, 4), range(4, 5)]


def test_split_adjacent_punctuation_collapses():
    spans = split_phrases(["w", ",", ";", "w2"])
    assert spans == [range(0, 3), range(3, 4)]


def test_split_conjunction_joins_following_clause():
    tree = parse_ptb(
        "(S (S (NP (PRP I)) (VP (VBP go))) (CC and)"
        " (S (NP (PRP you)) (VP (VBP stay))))"
    )
    spans = split_phrases(["I", "go", "and", "you", "stay"], tree)
    assert spans == [range(0, 2), range(2, 5)]


def test_split_wrapped_root_same_as_bare():
    bare = parse_ptb(TWO_CLAUSE)
    wrapped = parse_ptb("(TOP %s)" % TWO_CLAUSE)
    tokens = ["He", "left", ",", "and", "she", "stayed"]
    assert split_phrases(tokens, wrapped) == split_phrases(tokens, bare)


def test_split_empty_sentence():
    assert split_phrases([]) == []


# --- detect_quotes ---

def test_detect_single_quote_span():
    text = 'She said, "Go home." Then left.'
    spans = detect_quotes(text)
    assert len(spans) == 1
    assert text[spans[0].start:spans[0].end] == '"Go home."'
    assert not spans[0].unterminated


def test_detect_no_quotes():
    assert detect_quotes("Nothing here.") == []


def test_detect_both_alphabets():
    text = "“Mixed” and \"straight\""
    spans = detect_quotes(text)
    assert len(spans) == 2
    assert text[spans[0].start:spans[0].end] == "“Mixed”"
    assert text[spans[1].start:spans[1].end] == '"straight"'


def test_detect_unterminated_opener():
    text = 'He said, "never'
    spans = detect_quotes(text)
    assert len(spans) == 1
    assert spans[0].unterminated
    assert spans[0].end == len(text)


def test_detect_balanced_parity():
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
    text = " ".join('"%s"' % w if i % 2 else w for i, w in enumerate(words))
    spans = detect_quotes(text)
    assert len(spans) == text.count('"') // 2


def test_curly_opener_ignores_straight_quote():
    spans = detect_quotes("“a \" b”")
    assert len(spans) == 1
    assert spans[0].end == 7


# --- mark_quote_segments ---

def _bare_segment(start, end):
    return Segment(
        segment_id=0,
        sentence_id=0,
        text="",
        word_span=range(0, 1),
        start_char=start,
        end_char=end,
    )


def test_mark_quote_overlap_cases():
    quote = [QuoteSpan(start=10, end=20)]
    inside = _bare_segment(12, 18)
    outside = _bare_segment(0, 9)
    straddle = _bare_segment(5, 12)
    mark_quote_segments([inside, outside, straddle], quote)
    assert inside.is_quote
    assert not outside.is_quote
    assert straddle.is_quote


# --- split_sentences ---

def _sentence_texts(text):
    return [text[a:b] for a, b in split_sentences(text)]


def test_sentences_basic():
    assert _sentence_texts("Hello there. How are you?") == [
        "Hello there.",
        "How are you?",
    ]


def test_sentences_abbreviations():
    assert _sentence_texts("Mr. Smith left. Dr. Jones stayed.") == [
        "Mr. Smith left.",
        "Dr. Jones stayed.",
    ]


def test_sentences_break_after_closing_quote():
    assert _sentence_texts('He said, "Go." Then he left.') == [
        'He said, "Go."',
        "Then he left.",
    ]


def test_sentences_no_break_before_lowercase():
    assert _sentence_texts("He ran. then stopped.") == ["He ran. then stopped."]


def test_sentences_break_before_opening_quote():
    assert _sentence_texts('She left. "Go home."') == ["She left.", '"Go home."']


def test_sentences_whitespace_only():
    assert split_sentences("   \n  ") == []


# --- segment_chapter ---

def _chapter(text, word_positions):
    words = []
    for token, start in word_positions:
        words.append(
            AlignedWord(
                token=token,
                status="aligned",
                start_s=0.0,
                end_s=0.1,
                start_char=start,
                end_char=start + len(token),
            )
        )
    return AlignedChapter(
        book_id="b", chapter_id="c", text=text, words=words, audio_path=""
    )


def test_segment_chapter_quotes_and_merging():
    text = 'He said, "Run home now." Then he left.'
    chapter = _chapter(
        text,
        [
            ("He", 0),
            ("said", 3),
            ("Run", 10),
            ("home", 14),
            ("now", 19),
            ("Then", 25),
            ("he", 30),
            ("left", 33),
        ],
    )
    segs = segment_chapter(chapter)
    assert [s.text for s in segs] == ['He said,', '"Run home now."', 'Then he left.']
    assert [s.is_quote for s in segs] == [False, True, False]
    assert [tuple(s.word_span) for s in segs] == [(0, 1), (2, 3, 4), (5, 6, 7)]
    assert [s.sentence_id for s in segs] == [0, 0, 1]
    assert [s.segment_id for s in segs] == [0, 1, 2]


def test_segment_chapter_leading_wordless_merges_forward():
    text = "— Go now."
    chapter = _chapter(text, [("Go", 2), ("now", 5)])
    segs = segment_chapter(chapter)
    assert len(segs) == 1
    assert segs[0].text == text
    assert tuple(segs[0].word_span) == (0, 1)


def test_segment_chapter_uses_trees():
    text = "He left, and she stayed."
    chapter = _chapter(
        text,
        [("He", 0), ("left", 3), ("and", 9), ("she", 13), ("stayed", 17)],
    )
    full = (
        "(S (S (NP (PRP He)) (VP (VBD left))) (, ,) (CC and)"
        " (S (NP (PRP she)) (VP (VBD stayed))) (. .))"
    )
    segs = segment_chapter(chapter, trees={0: parse_ptb(full)})
    assert [s.text for s in segs] == ["He left,", "and she stayed."]
    assert [tuple(s.word_span) for s in segs] == [(0, 1), (2, 3, 4)]


def test_segment_chapter_tree_mismatch_falls_back():
    text = "He left, and she stayed."
    chapter = _chapter(
        text,
        [("He", 0), ("left", 3), ("and", 9), ("she", 13), ("stayed", 17)],
    )
    bad_tree = parse_ptb("(S (NN unrelated))")
    segs = segment_chapter(chapter, trees={0: bad_tree})
    assert [s.text for s in segs] == ["He left,", "and she stayed."]
    with pytest.raises(TokenMismatch):
        segment_chapter(chapter, trees={0: bad_tree}, on_tree_mismatch="raise")


def test_segment_chapter_word_spans_partition_words():
    text = 'He said, "Run home now." Then he left.'
    chapter = _chapter(
        text,
        [
            ("He", 0),
            ("said", 3),
            ("Run", 10),
            ("home", 14),
            ("now", 19),
            ("Then", 25),
            ("he", 30),
            ("left", 33),
        ],
    )
    segs = segment_chapter(chapter)
    covered = [i for s in segs for i in s.word_span]
    assert covered == list(range(len(chapter.words)))


def test_tokenize_offsets():
    toks = tokenize("Don't stop, now!", base=5)
    assert [t[0] for t in toks] == ["Don't", "stop", ",", "now", "!"]
    assert toks[0][1] == 5
    assert toks[-1][2] == 5 + len("Don't stop, now!")

"""Per-segment prosody attributes and per-chapter z-scoring.

Frame tracks and phone durations are reduced to one (pitch, volume, rate)
triple per segment, then z-scored across the chapter so chapters with
different readers or recording gains become comparable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .alignment import segment_time_span
from .audio.tracks import DB_FLOOR
from .errors import NoData, NoTimingInfo

ATTRIBUTES = ("pitch", "volume", "rate")


@dataclass
class ChapterProsody:
    """Segments with prosody z-scores plus the raw stats behind them.

    stats maps attribute name to the (mean, population std) of the raw
    values that were z-scored.  flags records imputations as
    (segment_id, reason); chapter-level flags use segment_id -1.
    """

    segments: list
    stats: dict
    flags: list = field(default_factory=list)


def segment_pitch(track, span):
    """Mean F0 over voiced frames whose centers fall in the span.

    Returns None when the span contains no voiced frames.
    """
    start_s, end_s = span
    idx = track.frames_in_span(start_s, end_s)
    if track.voiced is not None:
        idx = idx[track.voiced[idx]]
    if len(idx) == 0:
        return None
    return float(np.mean(track.values[idx]))


def segment_volume(track, span):
    """Mean dB over the span, ignoring floor-clamped (silent) frames.

    Returns None when every frame in the span sits at the floor.
    """
    start_s, end_s = span
    idx = track.frames_in_span(start_s, end_s)
    values = track.values[idx]
    values = values[values > DB_FLOOR]
    if len(values) == 0:
        return None
    return float(np.mean(values))


def phoneme_duration_zscores(chapter):
    """Duration z-score of every phone occurrence, keyed by

    (word_index, phone_index).  Statistics are per phone label within the
    chapter, population std.  Labels with one occurrence or zero spread
    get z = 0.  Words whose phone durations failed the ingestion
    consistency check contribute nothing.
    """
    occurrences = {}
    for wi, word in enumerate(chapter.words):
        if not word.aligned or word.phone_mismatch:
            continue
        for pi, (label, duration) in enumerate(word.phones):
            occurrences.setdefault(label, []).append(((wi, pi), duration))
    zmap = {}
    for label, occs in occurrences.items():
        durations = np.array([d for _, d in occs], dtype=np.float64)
        std = float(durations.std())
        if len(occs) < 2 or std == 0.0:
            for key, _ in occs:
                zmap[key] = 0.0
            continue
        mean = float(durations.mean())
        for key, duration in occs:
            zmap[key] = (duration - mean) / std
    return zmap


def segment_rate(chapter, segments, phone_z):
    """Raw speaking-rate value per segment.

    The mean phone-duration z measures slowness, so the raw rate is its
    negation: faster speech gives larger values.  Segments with no scored
    phones return None.
    """
    raw = []
    for seg in segments:
        zs = [
            phone_z[(wi, pi)]
            for wi in seg.word_span
            for pi in range(len(chapter.words[wi].phones))
            if (wi, pi) in phone_z
        ]
        raw.append(-float(np.mean(zs)) if zs else None)
    return raw


def chapter_zscores(values):
    """Z-score a list of raw values that may contain None gaps.

    Returns (z, mean, std, imputed_indices, degenerate).  Gaps are imputed
    as z = 0 (the mean).  Zero spread yields all-zero z and degenerate =
    True.  Raises NoData when no value is present at all.
    """
    present = [(i, v) for i, v in enumerate(values) if v is not None]
    if not present:
        raise NoData("no present values to z-score")
    arr = np.array([v for _, v in present], dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std())
    z = [0.0] * len(values)
    degenerate = std == 0.0
    if not degenerate:
        for i, v in present:
            z[i] = (v - mean) / std
    imputed = [i for i, v in enumerate(values) if v is None]
    return z, mean, std, imputed, degenerate


def compute_chapter_prosody(chapter, segments, pitch_track, intensity_track):
    """Fill segment prosody triples and collect chapter stats and flags."""
    pitch_raw = []
    volume_raw = []
    for seg in segments:
        try:
            span = segment_time_span(chapter, seg.word_span)
        except NoTimingInfo:
            pitch_raw.append(None)
            volume_raw.append(None)
            continue
        pitch_raw.append(segment_pitch(pitch_track, span))
        volume_raw.append(segment_volume(intensity_track, span))
    rate_raw = segment_rate(chapter, segments, phoneme_duration_zscores(chapter))

    stats = {}
    flags = []
    columns = {}
    for name, raw in (
        ("pitch", pitch_raw),
        ("volume", volume_raw),
        ("rate", rate_raw),
    ):
        z, mean, std, imputed, degenerate = chapter_zscores(raw)
        stats[name] = (mean, std)
        columns[name] = z
        for i in imputed:
            flags.append((segments[i].segment_id, name + "_imputed"))
        if degenerate:
            flags.append((-1, name + "_degenerate"))
    for i, seg in enumerate(segments):
        seg.prosody = (
            columns["pitch"][i],
            columns["volume"][i],
            columns["rate"][i],
        )
    return ChapterProsody(segments=segments, stats=stats, flags=flags)


def prosody_csv(chapter_prosody) -> str:
    """Serialize per-segment z-scores as the training interchange CSV."""
    reasons = {}
    for seg_id, reason in chapter_prosody.flags:
        if seg_id >= 0:
            reasons.setdefault(seg_id, []).append(reason)
    out = io.StringIO()
    out.write("segment_id,sentence_id,is_quote,pitch_z,volume_z,rate_z,flags\n")
    for seg in chapter_prosody.segments:
        pitch_z, volume_z, rate_z = seg.prosody
        out.write(
            "%d,%d,%d,%.6f,%.6f,%.6f,%s\n"
            % (
                seg.segment_id,
                seg.sentence_id,
                int(seg.is_quote),
                pitch_z,
                volume_z,
                rate_z,
                ";".join(reasons.get(seg.segment_id, ())),
            )
        )
    return out.getvalue()

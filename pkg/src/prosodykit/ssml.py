"""Turn predicted prosody z-scores into SSML markup.

Pitch becomes a relative percentage against a reference mean, volume a
dB delta, and rate a percentage on a fixed 100/50 mean/std scale.  All
three are clamped to ranges common TTS engines accept.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import NoData, RefError

PITCH_PCT_RANGE = (-50.0, 50.0)
VOLUME_DB_RANGE = (-12.0, 12.0)
RATE_PCT_RANGE = (50.0, 200.0)

RATE_MEAN_PCT = 100.0
RATE_STD_PCT = 50.0

_ESCAPES = {'"': "&quot;", "'": "&apos;"}


@dataclass
class ReferenceStats:
    """Per-recording pitch/volume statistics used to de-normalize z."""

    pitch_mean_hz: float
    pitch_std_hz: float
    vol_mean_db: float
    vol_std_db: float


# Fallback when no human recording exists for the target text: a 200 Hz
# voice with a 30 Hz spread, volume deltas around a 0 dB baseline.
DEFAULT_REF = ReferenceStats(
    pitch_mean_hz=200.0, pitch_std_hz=30.0, vol_mean_db=0.0, vol_std_db=4.0
)


@dataclass
class SsmlPhrase:
    text: str
    pitch_pct: float
    volume_db: float
    rate_pct: float


def _check_ref(ref: ReferenceStats):
    if ref.pitch_mean_hz <= 0:
        raise RefError("pitch_mean_hz must be positive, got %r" % ref.pitch_mean_hz)
    if ref.pitch_std_hz <= 0:
        raise RefError("pitch_std_hz must be positive, got %r" % ref.pitch_std_hz)
    if ref.vol_std_db <= 0:
        raise RefError("vol_std_db must be positive, got %r" % ref.vol_std_db)


def _clamp(value, bounds):
    lo, hi = bounds
    return min(max(value, lo), hi)


def z_to_attributes(z, ref: ReferenceStats) -> tuple:
    """Map a (pitch_z, volume_z, rate_z) triple to clamped SSML values.

    A pitch z of +1 moves the absolute pitch one reference std above the
    mean, so the relative change is 100*std/mean percent.  Volume deltas
    are already relative dB.  Rate uses the fixed 100/50 percent scale.
    """
    _check_ref(ref)
    pitch_z, volume_z, rate_z = (float(v) for v in z)
    pitch_pct = 100.0 * pitch_z * ref.pitch_std_hz / ref.pitch_mean_hz
    volume_db = volume_z * ref.vol_std_db
    rate_pct = RATE_MEAN_PCT + RATE_STD_PCT * rate_z
    return (
        _clamp(pitch_pct, PITCH_PCT_RANGE),
        _clamp(volume_db, VOLUME_DB_RANGE),
        _clamp(rate_pct, RATE_PCT_RANGE),
    )


def phrase_from_z(text: str, z, ref: ReferenceStats) -> tuple:
    """Build an SsmlPhrase plus the names of any clamped attributes."""
    pitch_pct, volume_db, rate_pct = z_to_attributes(z, ref)
    raw_pitch = 100.0 * float(z[0]) * ref.pitch_std_hz / ref.pitch_mean_hz
    raw_volume = float(z[1]) * ref.vol_std_db
    raw_rate = RATE_MEAN_PCT + RATE_STD_PCT * float(z[2])
    clamped = []
    if raw_pitch != pitch_pct:
        clamped.append("pitch")
    if raw_volume != volume_db:
        clamped.append("volume")
    if raw_rate != rate_pct:
        clamped.append("rate")
    return SsmlPhrase(text, pitch_pct, volume_db, rate_pct), clamped


def _fmt_signed(value, decimals: int) -> str:
    # round() first so values like -1e-9 print as +0.00, not -0.00
    quantized = round(float(value), decimals) + 0.0
    return "%+.*f" % (decimals, quantized)


def _prosody_tag(phrase: SsmlPhrase) -> str:
    return '<prosody pitch="%s%%" volume="%sdB" rate="%d%%">%s</prosody>' % (
        _fmt_signed(phrase.pitch_pct, 2),
        _fmt_signed(phrase.volume_db, 1),
        int(round(phrase.rate_pct)),
        escape(phrase.text, _ESCAPES),
    )


def emit_ssml(phrases) -> str:
    """One <prosody>-wrapped element per phrase inside a <speak> root."""
    phrases = list(phrases)
    if not phrases:
        raise NoData("need at least one phrase")
    return "<speak>" + "\n".join(_prosody_tag(p) for p in phrases) + "</speak>"


def emit_plain(texts) -> str:
    """The same document with no prosody markup (control condition)."""
    texts = list(texts)
    if not texts:
        raise NoData("need at least one phrase")
    return "<speak>" + "\n".join(escape(t, _ESCAPES) for t in texts) + "</speak>"


def build_document(texts, zs, ref=None) -> dict:
    """Render enhanced and plain SSML plus a JSON-ready sidecar.

    texts and zs align one z triple per phrase.  A missing ref falls
    back to DEFAULT_REF and the sidecar flags the substitution.
    """
    texts = list(texts)
    zs = [tuple(float(v) for v in z) for z in zs]
    if len(texts) != len(zs):
        raise NoData("texts and z triples must align")
    default_reference = ref is None
    if default_reference:
        ref = DEFAULT_REF
    phrases = []
    meta = []
    for text, z in zip(texts, zs):
        phrase, clamped = phrase_from_z(text, z, ref)
        phrases.append(phrase)
        meta.append(
            {
                "text": text,
                "z": list(z),
                "pitch_pct": phrase.pitch_pct,
                "volume_db": phrase.volume_db,
                "rate_pct": phrase.rate_pct,
                "clamped": clamped,
            }
        )
    sidecar = {
        "reference": {
            "pitch_mean_hz": ref.pitch_mean_hz,
            "pitch_std_hz": ref.pitch_std_hz,
            "vol_mean_db": ref.vol_mean_db,
            "vol_std_db": ref.vol_std_db,
        },
        "default_reference": default_reference,
        "phrases": meta,
    }
    return {
        "ssml": emit_ssml(phrases),
        "plain": emit_plain(texts),
        "sidecar": sidecar,
    }

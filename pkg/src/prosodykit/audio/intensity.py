"""Frame-level intensity in dB, Praat-style.

30 ms Hanning window on a 10 ms hop.  Each frame's value is
10*log10(weighted mean square / p_ref^2) with p_ref = 2e-5, i.e. normalized
amplitude is read as Pascals; absolute level is a convention, only the gain
law matters downstream (z-scores).  Frames below -100 dB clamp to -100.
"""
from __future__ import annotations

import numpy as np

from .tracks import DB_FLOOR, HOP_S, AudioBuffer, FrameTrack

P_REF = 2e-5
WINDOW_S = 0.03


def intensity_track(audio: AudioBuffer, window_s: float = WINDOW_S) -> FrameTrack:
    """Intensity in dB per 10 ms frame; empty track if audio is shorter
    than one window."""
    sr = audio.sample_rate
    x = audio.samples
    win = int(round(window_s * sr))
    hop = int(round(HOP_S * sr))
    if len(x) < win:
        return FrameTrack(values=np.empty(0), start_s=win / (2.0 * sr))

    n_frames = 1 + (len(x) - win) // hop
    frames = np.lib.stride_tricks.sliding_window_view(x, win)[::hop][:n_frames]
    window = np.hanning(win)
    mean_square = (frames * frames) @ window / window.sum()

    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(mean_square / (P_REF * P_REF))
    db = np.maximum(db, DB_FLOOR)
    return FrameTrack(values=db, start_s=win / (2.0 * sr))

"""Fundamental-frequency tracking with the YIN difference-function method.

Cumulative-mean normalization, an absolute threshold of 0.15, and parabolic
interpolation of the selected minimum.  Frames are 40 ms long on a 10 ms hop;
candidates are searched between the configured floor and ceiling.  A frame is
voiced iff the normalized-difference minimum is at or below the threshold and
the frame RMS clears a -60 dBFS gate (silence would otherwise produce
octave noise).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputTooShort
from .tracks import HOP_S, AudioBuffer, FrameTrack

_BATCH = 4096  # frames per FFT batch, bounds memory on long chapters


@dataclass
class PitchParams:
    floor_hz: float = 75.0
    ceil_hz: float = 600.0
    threshold: float = 0.15
    window_s: float = 0.04
    rms_gate_db: float = -60.0

    def __post_init__(self):
        if not (0 < self.floor_hz < self.ceil_hz):
            raise ValueError("need 0 < floor_hz < ceil_hz")
        if not (0 < self.threshold < 1):
            raise ValueError("threshold must lie in (0, 1)")


def pitch_track(audio: AudioBuffer, params: PitchParams | None = None) -> FrameTrack:
    """Track F0 over `audio`, one frame per 10 ms hop.

    Returns a FrameTrack whose ``voiced`` mask marks frames with detected
    periodicity; unvoiced frames carry NaN.  Raises InputTooShort when the
    audio cannot fill one analysis window.
    """
    if params is None:
        params = PitchParams()
    sr = audio.sample_rate
    x = audio.samples
    win = int(round(params.window_s * sr))
    hop = int(round(HOP_S * sr))
    if len(x) < win:
        raise InputTooShort(f"need {win} samples ({params.window_s:g} s), got {len(x)}")

    period_lo = sr / params.ceil_hz
    period_hi = sr / params.floor_hz
    tau_min = max(2, int(np.ceil(period_lo)))
    tau_max = int(np.floor(period_hi))
    if tau_max <= tau_min + 1:
        raise ValueError("sample rate too low for the requested pitch range")

    n_frames = 1 + (len(x) - win) // hop
    frame_len = win + tau_max
    padded = np.zeros((n_frames - 1) * hop + frame_len, dtype=np.float64)
    padded[: len(x)] = x
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_len)[::hop]

    rms_gate = 10.0 ** (params.rms_gate_db / 20.0)
    f0 = np.full(n_frames, np.nan)
    voiced = np.zeros(n_frames, dtype=bool)

    for lo in range(0, n_frames, _BATCH):
        batch = frames[lo: lo + _BATCH]
        cmndf, rms = _cmndf_batch(batch, win, tau_max)
        for k in range(len(batch)):
            if rms[k] < rms_gate:
                continue
            row = cmndf[k]
            if row[tau_min: tau_max + 1].min() > params.threshold:
                continue
            tau = _select_dip(row, tau_min, tau_max, params.threshold)
            period = tau + _parabolic_offset(row, tau, tau_max)
            period = min(max(period, period_lo), period_hi)
            f0[lo + k] = min(max(sr / period, params.floor_hz), params.ceil_hz)
            voiced[lo + k] = True

    return FrameTrack(values=f0, start_s=win / (2.0 * sr), voiced=voiced)


def _cmndf_batch(frames: np.ndarray, win: int, tau_max: int):
    """Cumulative-mean-normalized difference function for a batch of frames.

    ``frames`` has shape (B, win + tau_max); returns (B, tau_max + 1) CMNDF
    rows and the per-frame RMS over the integration window.
    """
    nfft = 1 << int(frames.shape[1] + win - 1).bit_length()
    spec = np.fft.rfft(frames, nfft)
    spec_w = np.fft.rfft(frames[:, :win], nfft)
    corr = np.fft.irfft(spec * np.conj(spec_w), nfft)[:, : tau_max + 1]

    sq = np.concatenate(
        [np.zeros((len(frames), 1)), np.cumsum(frames * frames, axis=1)], axis=1
    )
    energy = sq[:, win: win + tau_max + 1] - sq[:, : tau_max + 1]
    diff = np.maximum(energy[:, :1] + energy - 2.0 * corr, 0.0)
    diff[:, 0] = 0.0

    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    denom = np.cumsum(diff[:, 1:], axis=1)
    cmndf = np.ones_like(diff)
    np.divide(diff[:, 1:] * taus, denom, out=cmndf[:, 1:], where=denom > 0)
    cmndf[:, 1:][denom <= 0] = 1.0

    rms = np.sqrt(energy[:, 0] / win)
    return cmndf, rms


def _select_dip(row: np.ndarray, tau_min: int, tau_max: int, threshold: float) -> int:
    """First lag at or below the threshold, descended to its local minimum.

    Taking the first qualifying dip (not the global minimum) is what protects
    against subharmonic/octave errors.
    """
    below = np.nonzero(row[tau_min: tau_max + 1] <= threshold)[0]
    tau = tau_min + int(below[0])
    while tau + 1 <= tau_max and row[tau + 1] < row[tau]:
        tau += 1
    return tau


def _parabolic_offset(row: np.ndarray, tau: int, tau_max: int) -> float:
    if tau <= 1 or tau >= tau_max:
        return 0.0
    left, mid, right = row[tau - 1], row[tau], row[tau + 1]
    denom = left - 2.0 * mid + right
    if abs(denom) < 1e-12:
        return 0.0
    offset = 0.5 * (left - right) / denom
    return float(np.clip(offset, -0.5, 0.5))

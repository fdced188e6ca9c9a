"""Core audio containers: sample buffers and fixed-hop frame tracks."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

HOP_S = 0.01

# dB floor for intensity frames; frames at the floor are treated as silence.
DB_FLOOR = -100.0


@dataclass
class AudioBuffer:
    """Mono audio, samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer is mono; downmix before construction")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FrameTrack:
    """Per-frame measurements on a fixed 10 ms hop.

    ``values[i]`` is measured at center time ``start_s + i * hop_s``.  Pitch
    tracks carry a ``voiced`` mask and NaN values on unvoiced frames;
    intensity tracks leave ``voiced`` as None.
    """

    values: np.ndarray
    start_s: float
    hop_s: float = HOP_S
    voiced: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.voiced is not None:
            self.voiced = np.asarray(self.voiced, dtype=bool)
            if len(self.voiced) != len(self.values):
                raise ValueError("voiced mask length must match values")

    def __len__(self) -> int:
        return len(self.values)

    def times(self) -> np.ndarray:
        """Center time of every frame, in seconds."""
        return self.start_s + self.hop_s * np.arange(len(self.values))

    def frames_in_span(self, start_s: float, end_s: float) -> np.ndarray:
        """Indices of frames whose centers lie in [start_s, end_s)."""
        t = self.times()
        return np.nonzero((t >= start_s) & (t < end_s))[0]

    def to_csv(self) -> str:
        """Serialize as ``frame_index,time_s,value,voiced`` rows.

        Unvoiced pitch frames leave the value cell empty; intensity tracks
        leave the voiced cell empty.
        """
        out = io.StringIO()
        out.write("frame_index,time_s,value,voiced\n")
        times = self.times()
        for i, v in enumerate(self.values):
            if self.voiced is None:
                val = f"{v:.6f}"
                flag = ""
            elif self.voiced[i]:
                val = f"{v:.6f}"
                flag = "1"
            else:
                val = ""
                flag = "0"
            out.write(f"{i},{times[i]:.6f},{val},{flag}\n")
        return out.getvalue()

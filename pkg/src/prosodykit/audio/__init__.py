from .intensity import intensity_track
from .pitch import PitchParams, pitch_track
from .tracks import DB_FLOOR, HOP_S, AudioBuffer, FrameTrack
from .wav import decode_wav, encode_wav_pcm16

__all__ = [
    "AudioBuffer",
    "FrameTrack",
    "PitchParams",
    "DB_FLOOR",
    "HOP_S",
    "decode_wav",
    "encode_wav_pcm16",
    "intensity_track",
    "pitch_track",
]

"""Minimal RIFF/WAVE decoder for PCM16 and float32 files.

The stdlib ``wave`` module rejects float WAVs, so we walk the chunk
structure ourselves; this also lets truncation and codec problems raise
distinct error types.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, UnsupportedFormat
from .tracks import AudioBuffer

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


def decode_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file into a mono, [-1, 1] float buffer.

    Multi-channel input is downmixed by arithmetic mean.  16-bit samples are
    scaled by 1/32768 (so -32768 maps to exactly -1.0).
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise CorruptFile(f"{path}: file too small for a RIFF header")
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnsupportedFormat(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise CorruptFile(f"{path}: chunk {cid!r} truncated "
                              f"({len(body)} of {size} bytes)")
        if cid == b"fmt ":
            fmt = _parse_fmt(body, path)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise CorruptFile(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, bits = fmt
    if channels < 1 or sample_rate < 1:
        raise CorruptFile(f"{path}: invalid fmt chunk")

    if audio_format == _PCM:
        if bits != 16:
            raise UnsupportedFormat(f"{path}: {bits}-bit PCM not supported")
        dtype, scale = np.dtype("<i2"), 32768.0
    elif audio_format == _IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedFormat(f"{path}: {bits}-bit float not supported")
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormat(f"{path}: audio format tag {audio_format}")

    frame_bytes = channels * dtype.itemsize
    if len(payload) % frame_bytes:
        raise CorruptFile(f"{path}: data chunk is not a whole number of frames")

    raw = np.frombuffer(payload, dtype=dtype).astype(np.float64) / scale
    samples = raw.reshape(-1, channels).mean(axis=1)
    if audio_format == _IEEE_FLOAT:
        samples = np.clip(samples, -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate=sample_rate)


def _parse_fmt(body: bytes, path):
    if len(body) < 16:
        raise CorruptFile(f"{path}: fmt chunk too small")
    audio_format, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
    if audio_format == _EXTENSIBLE:
        # sub-format GUID starts 8 bytes into the extension; its first two
        # bytes are the real format tag
        if len(body) < 26:
            raise CorruptFile(f"{path}: extensible fmt chunk too small")
        (audio_format,) = struct.unpack_from("<H", body, 24)
    return audio_format, channels, sample_rate, bits


def encode_wav_pcm16(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples in [-1, 1] as a PCM16 WAV (test/fixture helper)."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.clip(np.round(pcm * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    hdr = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, _PCM, 1, sample_rate,
        sample_rate * 2, 2, 16,
        b"data", len(payload),
    )
    Path(path).write_bytes(hdr + payload)

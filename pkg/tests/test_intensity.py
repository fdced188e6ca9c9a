import numpy as np
import pytest

from prosodykit.audio import DB_FLOOR, AudioBuffer, intensity_track

SR = 16000


def sine(amp, freq=220.0, seconds=1.0):
    t = np.arange(int(seconds * SR)) / SR
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), SR)


def interior_values(track, margin=4):
    return track.values[margin: len(track) - margin]


def test_full_scale_sine_closed_form():
    # 10*log10(0.5 / 4e-10) = 90.969 dB
    vals = interior_values(intensity_track(sine(1.0)))
    assert np.all(np.abs(vals - 90.97) < 0.1)


def test_zero_signal_clamps_to_floor():
    track = intensity_track(AudioBuffer(np.zeros(SR), SR))
    assert np.all(track.values == DB_FLOOR)


def test_half_amplitude_is_6db_down():
    full = interior_values(intensity_track(sine(1.0)))
    half = interior_values(intensity_track(sine(0.5)))
    np.testing.assert_allclose(full - half, 6.02, atol=0.05)
    assert np.all(np.abs(half - 84.95) < 0.1)


def test_gain_law():
    base = sine(0.8, freq=173.0)
    ref = intensity_track(base)
    for a in (0.25, 0.7, 2.0 ** -10):
        scaled = intensity_track(AudioBuffer(base.samples * a, SR))
        keep = (ref.values > DB_FLOOR) & (scaled.values > DB_FLOOR)
        np.testing.assert_allclose(
            scaled.values[keep] - ref.values[keep], 20 * np.log10(a), atol=0.01
        )


def test_short_audio_yields_empty_track():
    track = intensity_track(AudioBuffer(np.zeros(100), SR))
    assert len(track) == 0


def test_frame_timing_and_csv():
    track = intensity_track(sine(0.5, seconds=0.2))
    assert track.hop_s == 0.01
    assert track.start_s == pytest.approx(0.015)
    csv = track.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "frame_index,time_s,value,voiced"
    assert len(lines) == len(track) + 1
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[1]) == pytest.approx(0.015)
    assert first[3] == ""  # intensity tracks carry no voicing flag

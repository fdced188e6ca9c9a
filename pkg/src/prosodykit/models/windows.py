"""Fixed-length window construction and stride-1 windowed inference."""

from __future__ import annotations

import numpy as np


def make_windows(chapters, window_len: int):
    """Build every full-length window from each chapter.

    chapters yields (chapter_id, features (n, d), targets (n, k)) triples.
    Chapters shorter than window_len contribute no training windows; the
    padding rule exists only at inference time.  Returns (X, Y, origins)
    with origins holding one (chapter_id, start_index) per window.
    """
    xs, ys, origins = [], [], []
    for chapter_id, features, targets in chapters:
        features = np.asarray(features, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        for start in range(len(features) - window_len + 1):
            xs.append(features[start:start + window_len])
            ys.append(targets[start:start + window_len])
            origins.append((chapter_id, start))
    if not xs:
        return (
            np.zeros((0, window_len, 0)),
            np.zeros((0, window_len, 0)),
            [],
        )
    return np.stack(xs), np.stack(ys), origins


def window_coverage(n_segments: int, window_len: int) -> np.ndarray:
    """How many stride-1 windows cover each segment position."""
    counts = np.zeros(n_segments)
    if n_segments < window_len:
        counts[:] = 1.0
        return counts
    for start in range(n_segments - window_len + 1):
        counts[start:start + window_len] += 1.0
    return counts


def sliding_window_predict(predict_windows, features, window_len: int):
    """Mean per-segment prediction over all stride-1 windows.

    predict_windows maps a (N, L, d) batch to (N, L, k) outputs.  A
    chapter shorter than L runs as a single zero-padded window whose
    padded positions are discarded.
    """
    features = np.asarray(features, dtype=np.float64)
    n, dims = features.shape
    if n == 0:
        return np.zeros((0, 0))
    if n < window_len:
        padded = np.zeros((window_len, dims))
        padded[:n] = features
        out = np.asarray(predict_windows(padded[None]))[0]
        return out[:n].copy()
    starts = range(n - window_len + 1)
    stacked = np.stack([features[s:s + window_len] for s in starts])
    preds = np.asarray(predict_windows(stacked))
    sums = np.zeros((n, preds.shape[2]))
    counts = np.zeros(n)
    for wi, start in enumerate(starts):
        sums[start:start + window_len] += preds[wi]
        counts[start:start + window_len] += 1.0
    return sums / counts[:, None]

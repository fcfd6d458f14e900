"""Reconstruction-error scoring of windows and per-tow anomaly maps."""

import logging
from dataclasses import dataclass, field

import numpy as np

from sampling.windows import DEFAULT_STRIDE, DEFAULT_WINDOW, extract_windows
from utils.errors import ShapeMismatch


def window_mse(original, reconstruction):
    """Mean squared pixel error over the (2b)^2 window pixels."""
    original = np.asarray(getattr(original, "pixels", original), dtype=np.float64)
    reconstruction = np.asarray(getattr(reconstruction, "pixels", reconstruction), dtype=np.float64)
    original = original.reshape(original.shape[-2:]) if original.ndim > 2 else original
    reconstruction = reconstruction.reshape(reconstruction.shape[-2:]) if reconstruction.ndim > 2 else reconstruction
    if original.shape != reconstruction.shape:
        raise ShapeMismatch(f"window {original.shape} vs reconstruction {reconstruction.shape}")
    return float(np.mean((original - reconstruction) ** 2))


def score_windows(model, sample_set, batch_size=256):
    if len(sample_set) == 0:
        return np.zeros(0, dtype=np.float64)
    return model.reconstruction_errors(sample_set.stack(model.dtype), batch_size=batch_size)


@dataclass
class TowSignal:
    tow_index: int
    center_x: np.ndarray
    center_y: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.scores)


@dataclass
class AnomalyMap:
    signals: dict = field(default_factory=dict)
    image_shape: tuple = None
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE

    @property
    def tows(self):
        return sorted(self.signals)

    def signal(self, tow_index):
        return self.signals[tow_index]

    def all_scores(self):
        if not self.signals:
            return np.zeros(0)
        return np.concatenate([self.signals[t].scores for t in self.tows])

    def normalized_scores(self):
        """Scores stretched to [0, 1] by this map's own min/max; for rendering only."""
        scores = self.all_scores()
        lo, hi = (float(scores.min()), float(scores.max())) if len(scores) else (0.0, 0.0)
        scale = hi - lo
        return {
            t: (self.signals[t].scores - lo) / scale if scale > 0 else np.zeros(len(self.signals[t]))
            for t in self.tows
        }

    def rows(self):
        for t in self.tows:
            s = self.signals[t]
            for x, y, m in zip(s.center_x, s.center_y, s.scores):
                yield int(t), int(x), int(y), float(m)

    @classmethod
    def from_rows(cls, rows, image_shape=None, window=DEFAULT_WINDOW, stride=DEFAULT_STRIDE):
        grouped = {}
        for tow, x, y, m in rows:
            grouped.setdefault(int(tow), []).append((int(x), int(y), float(m)))
        signals = {}
        for tow, entries in grouped.items():
            entries.sort()
            xs, ys, ms = zip(*entries)
            signals[tow] = TowSignal(tow, np.array(xs), np.array(ys), np.array(ms, dtype=np.float64))
        return cls(signals, image_shape, window, stride)


def build_anomaly_map(model, depth_map, layout, window=DEFAULT_WINDOW, stride=DEFAULT_STRIDE, source_id=""):
    """Score every centerline window of a scan and group the scores per tow."""
    samples = extract_windows(depth_map, layout, window, stride, source_id)
    scores = score_windows(model, samples)

    grouped = {}
    for sample, score in zip(samples, scores):
        grouped.setdefault(sample.tow_index, []).append((sample.center_x, sample.center_y, score))

    signals = {}
    for tow, entries in grouped.items():
        entries.sort(key=lambda e: e[0])
        xs, ys, ms = zip(*entries)
        signals[tow] = TowSignal(tow, np.array(xs), np.array(ys), np.array(ms, dtype=np.float64))

    logging.info(
        "Anomaly map %s: %d tows, max score %.5g.",
        source_id or "scan", len(signals), max((s.scores.max() for s in signals.values()), default=0.0),
    )
    return AnomalyMap(signals, depth_map.shape, window, stride)

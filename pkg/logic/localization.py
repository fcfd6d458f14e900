"""Blob detection on per-tow anomaly signals and box evaluation.

Each tow's window scores form a 1D signal sampled every ``stride`` pixels.
Blobs are local maxima of a scale-normalized difference-of-Gaussians response
over (scale, position); each becomes a box spanning the tow's full width.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d, maximum_filter
from scipy.optimize import linear_sum_assignment

from utils.errors import SignalTooShort, UnknownTow
from utils.helpers import round_half_up

DEFAULT_SIGMAS = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
DEFAULT_RESPONSE_FLOOR = 0.3
COVERAGE_IOU = 0.3
MATCH_STRATEGIES = ("greedy", "optimal")
SINGLE_SCALE_RATIO = 1.6


@dataclass(frozen=True)
class Blob:
    tow_index: int
    index: int
    center_x: float
    sigma: float
    response: float
    scale_index: int = 0

    @property
    def radius(self):
        return math.sqrt(2.0) * self.sigma


@dataclass(frozen=True)
class DefectBox:
    """Half-open pixel box [x, x + w) x [y, y + h)."""

    x: int
    y: int
    w: int
    h: int
    tow_index: int = None
    sigma: float = None
    response: float = None
    label: str = None
    blob: Blob = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box must be at least 1x1, got {self.w}x{self.h}")

    @property
    def x1(self):
        return self.x + self.w

    @property
    def y1(self):
        return self.y + self.h

    @property
    def area(self):
        return self.w * self.h

    def to_dict(self):
        data = {
            "x": self.x,
            "y": self.y,
            "w": self.w,
            "h": self.h,
            "tow": self.tow_index,
            "sigma": self.sigma,
            "response": self.response,
        }
        if self.label is not None:
            data["label"] = self.label
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            x=int(data["x"]),
            y=int(data["y"]),
            w=int(data["w"]),
            h=int(data["h"]),
            tow_index=data.get("tow"),
            sigma=data.get("sigma"),
            response=data.get("response"),
            label=data.get("label"),
        )


@dataclass
class MatchResult:
    mean_iou: float
    pairs: list
    unmatched_predicted: list
    unmatched_truth: list
    strategy: str = "greedy"

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "mean_iou": self.mean_iou,
            "pairs": [{"predicted": p, "truth": t, "iou": v} for p, t, v in self.pairs],
            "unmatched_predicted": list(self.unmatched_predicted),
            "unmatched_truth": list(self.unmatched_truth),
        }


def _check_sigmas(sigmas):
    sigmas = np.asarray(sigmas, dtype=np.float64).ravel()
    if sigmas.size == 0:
        raise ValueError("at least one scale is required")
    if np.any(sigmas < 0.5):
        raise ValueError(f"scales must be >= 0.5, got {sigmas.tolist()}")
    if np.any(np.diff(sigmas) <= 0):
        raise ValueError(f"scales must be strictly ascending, got {sigmas.tolist()}")
    return sigmas


def scale_space_response(signal, sigmas=DEFAULT_SIGMAS):
    """Response array of shape (len(sigmas), len(signal)).

    Row i is (L(sigma_i) - L(sigma_i+1)) / (sigma_i+1 / sigma_i - 1), where L is
    the edge-replicated Gaussian smoothing of the signal. This approximates
    -sigma^2 d2/dx2 of the smoothed signal, so bumps give positive responses.
    The ladder is extended past its last scale with the same ratio as the
    final step.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 3:
        raise SignalTooShort(f"signal needs at least 3 samples, got shape {signal.shape}")
    sigmas = _check_sigmas(sigmas)

    ratio = sigmas[-1] / sigmas[-2] if sigmas.size > 1 else SINGLE_SCALE_RATIO
    ladder = np.append(sigmas, sigmas[-1] * ratio)
    smoothed = np.stack([gaussian_filter1d(signal, s, mode="nearest") for s in ladder])
    steps = ladder[1:] / ladder[:-1] - 1.0
    return (smoothed[:-1] - smoothed[1:]) / steps[:, None]


def detect_blobs(signal, sigmas=DEFAULT_SIGMAS, response_floor=DEFAULT_RESPONSE_FLOOR,
                 tow_index=0, first_center=0, stride=1):
    """Blobs sorted by position; overlaps keep the stronger response."""
    sigmas = _check_sigmas(sigmas)
    response = scale_space_response(signal, sigmas)

    # round-off from smoothing a flat signal is not a blob
    noise = 1e-9 * max(1.0, float(np.max(np.abs(signal))))
    floor = max(float(response_floor), noise)
    peaks = (response == maximum_filter(response, size=3, mode="nearest")) & (response > floor)

    candidates = sorted(zip(*np.nonzero(peaks)), key=lambda p: (-response[p], p[1], p[0]))
    kept = []
    for scale_index, index in candidates:
        sigma = float(sigmas[scale_index])
        if any(abs(int(index) - b.index) < max(sigma, b.sigma) for b in kept):
            continue
        kept.append(Blob(
            tow_index=int(tow_index),
            index=int(index),
            center_x=float(first_center + index * stride),
            sigma=sigma,
            response=float(response[scale_index, index]),
            scale_index=int(scale_index),
        ))
    return sorted(kept, key=lambda b: b.index)


def blobs_to_boxes(blobs, layout, tow_width, stride, window=32, image_shape=None):
    """Map blobs into image space; every box spans the tow width and is clipped."""
    shape = image_shape or layout.image_shape
    if shape is None:
        raise ValueError("image shape is required to clip boxes")
    height, width = shape

    boxes = []
    for blob in blobs:
        line = layout.centerline(blob.tow_index)
        if line is None:
            raise UnknownTow(f"tow {blob.tow_index} is not in the layout")

        center_x = blob.index * stride + line.x_start + window // 2
        box_width = max(1, round_half_up(2.0 * math.sqrt(2.0) * blob.sigma * stride))
        x0 = round_half_up(center_x - box_width / 2.0)
        y0 = line.row - tow_width // 2

        x1, y1 = min(width, x0 + box_width), min(height, y0 + tow_width)
        x0, y0 = max(0, x0), max(0, y0)
        if x1 <= x0 or y1 <= y0:
            logging.warning("Blob on tow %d at x=%d falls outside the image; dropped.", blob.tow_index, center_x)
            continue
        boxes.append(DefectBox(
            x=x0, y=y0, w=x1 - x0, h=y1 - y0,
            tow_index=blob.tow_index, sigma=blob.sigma, response=blob.response, blob=blob,
        ))
    return boxes


def iou(a, b):
    inter_w = max(0, min(a.x1, b.x1) - max(a.x, b.x))
    inter_h = max(0, min(a.y1, b.y1) - max(a.y, b.y))
    intersection = inter_w * inter_h
    union = a.area + b.area - intersection
    return intersection / union if union else 0.0


def _iou_matrix(predicted, truth):
    matrix = np.zeros((len(predicted), len(truth)))
    for i, p in enumerate(predicted):
        for j, t in enumerate(truth):
            matrix[i, j] = iou(p, t)
    return matrix


def match_and_score(predicted, ground_truth, strategy="greedy"):
    """One-to-one matching; unmatched ground truth counts as IoU 0.

    ``mean_iou`` is None when there is no ground truth to average over.
    """
    if strategy not in MATCH_STRATEGIES:
        raise ValueError(f"unknown match strategy {strategy!r}; expected one of {MATCH_STRATEGIES}")
    predicted, ground_truth = list(predicted), list(ground_truth)
    matrix = _iou_matrix(predicted, ground_truth)

    pairs = []
    if strategy == "greedy":
        candidates = sorted(
            ((matrix[i, j], i, j) for i in range(len(predicted)) for j in range(len(ground_truth)) if matrix[i, j] > 0),
            key=lambda c: (-c[0], c[1], c[2]),
        )
        used_p, used_t = set(), set()
        for value, i, j in candidates:
            if i in used_p or j in used_t:
                continue
            used_p.add(i)
            used_t.add(j)
            pairs.append((i, j, float(value)))
    elif matrix.size:
        rows, cols = linear_sum_assignment(matrix, maximize=True)
        pairs = [(int(i), int(j), float(matrix[i, j])) for i, j in zip(rows, cols) if matrix[i, j] > 0]

    pairs.sort(key=lambda p: p[1])
    matched_p = {i for i, _, _ in pairs}
    matched_t = {j for _, j, _ in pairs}
    mean = sum(v for _, _, v in pairs) / len(ground_truth) if ground_truth else None
    return MatchResult(
        mean_iou=mean,
        pairs=pairs,
        unmatched_predicted=[i for i in range(len(predicted)) if i not in matched_p],
        unmatched_truth=[j for j in range(len(ground_truth)) if j not in matched_t],
        strategy=strategy,
    )


def coverage(predicted, ground_truth, min_iou=COVERAGE_IOU):
    """Fraction of ground-truth boxes overlapped by some prediction with IoU >= min_iou."""
    ground_truth = list(ground_truth)
    if not ground_truth:
        return None
    covered = sum(1 for t in ground_truth if any(iou(p, t) >= min_iou for p in predicted))
    return covered / len(ground_truth)


def localize_map(anomaly_map, layout, sigmas=DEFAULT_SIGMAS, response_floor=DEFAULT_RESPONSE_FLOOR, tow_width=21):
    """Blobs and boxes for every tow signal of an anomaly map."""
    blobs = []
    for tow in anomaly_map.tows:
        signal = anomaly_map.signal(tow)
        if len(signal) < 3:
            logging.warning("Tow %d has only %d windows; skipped.", tow, len(signal))
            continue
        blobs += detect_blobs(
            signal.scores,
            sigmas,
            response_floor,
            tow_index=tow,
            first_center=int(signal.center_x[0]),
            stride=anomaly_map.stride,
        )
    boxes = blobs_to_boxes(
        blobs, layout, tow_width, anomaly_map.stride, anomaly_map.window,
        image_shape=anomaly_map.image_shape or layout.image_shape,
    )
    logging.info("Localized %d blobs on %d tows.", len(blobs), len(anomaly_map.tows))
    return blobs, boxes

"""ROC analysis, threshold selection and classification metrics.

Abnormal windows are the positive class and a window is predicted abnormal
when its score is strictly greater than the threshold.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.metrics import confusion_matrix

from utils.errors import EmptyClass


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def rows(self):
        for f, t, thr in self.points:
            yield thr, f, t


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    fpr: float
    tpr: float
    distance: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ClassificationReport:
    threshold: float
    precision: float = None
    recall: float = None
    f1: float = None
    accuracy: float = None
    auc: float = None
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self):
        return asdict(self)


def _as_scores(values, name):
    scores = np.asarray(values, dtype=np.float64).ravel()
    if scores.size == 0:
        raise EmptyClass(f"no {name} scores")
    return scores


def roc_curve(scores_normal, scores_abnormal):
    """Exact ROC over every observed score, with +inf and -inf sentinels."""
    normal = np.sort(_as_scores(scores_normal, "normal"))
    abnormal = np.sort(_as_scores(scores_abnormal, "abnormal"))

    observed = np.unique(np.concatenate([normal, abnormal]))[::-1]
    thresholds = np.concatenate([[np.inf], observed, [-np.inf]])

    # count of scores strictly above each threshold
    fp = len(normal) - np.searchsorted(normal, thresholds, side="right")
    tp = len(abnormal) - np.searchsorted(abnormal, thresholds, side="right")
    fpr = fp / len(normal)
    tpr = tp / len(abnormal)

    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def best_threshold(curve):
    """Point closest to (FPR=0, TPR=1); ties go to lower FPR, then higher threshold.

    The returned threshold sits halfway between the selected score and the
    next larger observed score, so it classifies exactly like the curve point
    while staying clear of both score values. A pick at the +inf sentinel maps to
    the largest observed score, which also flags nothing.
    """
    distance = np.hypot(curve.fpr, 1.0 - curve.tpr)
    best = int(np.lexsort((-curve.thresholds, curve.fpr, distance))[0])

    threshold = float(curve.thresholds[best])
    # the -inf point (1, 1) always ties the +inf point (0, 0) and loses on FPR
    if threshold == np.inf:
        threshold = float(curve.thresholds[1])
    elif math.isfinite(curve.thresholds[best - 1]):
        threshold = (threshold + float(curve.thresholds[best - 1])) / 2.0
    return OperatingPoint(
        threshold=threshold,
        fpr=float(curve.fpr[best]),
        tpr=float(curve.tpr[best]),
        distance=float(distance[best]),
    )


def _ratio(numerator, denominator):
    return numerator / denominator if denominator else None


def classification_report(scores_normal, scores_abnormal, threshold):
    threshold = float(threshold)
    if not math.isfinite(threshold):
        raise ValueError(f"threshold must be finite, got {threshold}")
    normal = _as_scores(scores_normal, "normal")
    abnormal = _as_scores(scores_abnormal, "abnormal")

    y_true = np.concatenate([np.zeros(len(normal), dtype=int), np.ones(len(abnormal), dtype=int)])
    y_pred = (np.concatenate([normal, abnormal]) > threshold).astype(int)
    tn, fp, fn, tp = (int(c) for c in confusion_matrix(y_true, y_pred, labels=[0, 1]).ravel())

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)

    return ClassificationReport(
        threshold=threshold,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=(tp + tn) / len(y_true),
        auc=roc_curve(normal, abnormal).auc,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def score_summary(scores):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        return {"count": 0}
    p25, median, p75, p99 = np.percentile(scores, [25, 50, 75, 99])
    return {
        "count": int(scores.size),
        "mean": float(scores.mean()),
        "std": float(scores.std()),
        "min": float(scores.min()),
        "p25": float(p25),
        "median": float(median),
        "p75": float(p75),
        "p99": float(p99),
        "max": float(scores.max()),
    }

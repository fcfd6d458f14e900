import math

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from logic.roc import best_threshold, classification_report, roc_curve, score_summary
from utils.errors import EmptyClass


def _mann_whitney_auc(normal, abnormal):
    wins = sum((a > n) + 0.5 * (a == n) for a in abnormal for n in normal)
    return wins / (len(normal) * len(abnormal))


class TestRocCurve:
    def test_perfect_separation(self):
        curve = roc_curve([0.1, 0.2], [0.8, 0.9])
        assert curve.auc == 1.0
        assert curve.thresholds[0] == math.inf and curve.thresholds[-1] == -math.inf
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    def test_inverted_scores(self):
        assert roc_curve([0.8, 0.9], [0.1, 0.2]).auc == 0.0

    def test_identical_distributions(self):
        assert roc_curve([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).auc == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_rank_statistic(self, seed):
        rng = np.random.default_rng(seed)
        # integer scores force plenty of ties
        normal = rng.integers(0, 20, size=40).astype(float)
        abnormal = rng.integers(5, 25, size=25).astype(float)
        curve = roc_curve(normal, abnormal)
        assert curve.auc == pytest.approx(_mann_whitney_auc(normal, abnormal), abs=1e-12)
        y_true = np.r_[np.zeros(len(normal)), np.ones(len(abnormal))]
        assert curve.auc == pytest.approx(roc_auc_score(y_true, np.r_[normal, abnormal]), abs=1e-12)

    def test_monotone(self, rng):
        curve = roc_curve(rng.normal(size=50), rng.normal(1.0, size=30))
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)

    def test_empty_class(self):
        with pytest.raises(EmptyClass):
            roc_curve([], [1.0])
        with pytest.raises(EmptyClass):
            roc_curve([1.0], [])


class TestBestThreshold:
    def test_perfect_separation_splits_the_gap(self):
        point = best_threshold(roc_curve([0.1, 0.2], [0.8, 0.9]))
        assert point.threshold == pytest.approx(0.5)
        assert (point.fpr, point.tpr, point.distance) == (0.0, 1.0, 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_is_the_nearest_point(self, seed):
        rng = np.random.default_rng(seed)
        normal = rng.normal(0.0, 1.0, size=60)
        abnormal = rng.normal(1.5, 1.0, size=30)
        curve = roc_curve(normal, abnormal)
        point = best_threshold(curve)
        distances = [math.hypot(f, 1 - t) for f, t, _ in curve.points]
        assert point.distance == pytest.approx(min(distances))

        # the stored threshold reproduces the chosen curve point
        assert np.mean(normal > point.threshold) == pytest.approx(point.fpr)
        assert np.mean(abnormal > point.threshold) == pytest.approx(point.tpr)

    def test_ties_prefer_lower_fpr(self):
        # (fpr 0, tpr 0.5) and (fpr 0.5, tpr 1) are equally far from the corner
        point = best_threshold(roc_curve([1.0, 3.0], [2.0, 4.0]))
        assert point.fpr == 0.0 and point.tpr == 0.5

    @pytest.mark.parametrize(
        "normal, abnormal",
        [([1.0], [1.0]), ([2.0], [1.0]), ([1.0, 1.0], [1.0])],
    )
    def test_unseparable_scores_give_a_usable_threshold(self, normal, abnormal):
        point = best_threshold(roc_curve(normal, abnormal))
        assert math.isfinite(point.threshold)
        assert point.threshold == max(normal + abnormal)
        assert (point.fpr, point.tpr) == (0.0, 0.0)
        report = classification_report(normal, abnormal, point.threshold)
        assert report.tp == 0 and report.fp == 0

    @pytest.mark.parametrize("transform", [np.exp, lambda s: 3.0 * s + 7.0, np.cbrt])
    def test_invariant_under_monotone_rescoring(self, rng, transform):
        normal = rng.normal(0.0, 1.0, size=40)
        abnormal = rng.normal(1.2, 1.0, size=25)
        before = roc_curve(normal, abnormal)
        after = roc_curve(transform(normal), transform(abnormal))
        assert after.auc == pytest.approx(before.auc, abs=1e-12)
        a, b = best_threshold(before), best_threshold(after)
        assert (b.fpr, b.tpr) == (a.fpr, a.tpr)


class TestClassificationReport:
    def test_counts_at_threshold(self):
        report = classification_report([0.1, 0.2, 0.6], [0.5, 0.7, 0.9, 0.3], 0.4)
        assert (report.tp, report.fp, report.tn, report.fn) == (3, 1, 2, 1)
        assert report.total == 7
        assert report.precision == pytest.approx(0.75)
        assert report.recall == pytest.approx(0.75)
        assert report.f1 == pytest.approx(0.75)
        assert report.accuracy == pytest.approx(5 / 7)

    def test_score_equal_to_threshold_is_normal(self):
        report = classification_report([0.5], [0.5], 0.5)
        assert report.tp == 0 and report.tn == 1

    def test_no_positive_predictions(self):
        report = classification_report([0.1], [0.2], 10.0)
        assert report.precision is None
        assert report.f1 is None
        assert report.recall == 0.0
        assert report.to_dict()["precision"] is None

    def test_auc_is_threshold_free(self):
        a = classification_report([0.1, 0.4], [0.3, 0.9], 0.2)
        b = classification_report([0.1, 0.4], [0.3, 0.9], 0.8)
        assert a.auc == b.auc == pytest.approx(0.75)

    def test_rejects_infinite_threshold(self):
        with pytest.raises(ValueError):
            classification_report([0.1], [0.2], math.inf)


def test_score_summary():
    summary = score_summary([1.0, 2.0, 3.0, 4.0, 5.0])
    assert summary["count"] == 5
    assert summary["median"] == 3.0
    assert summary["min"] == 1.0 and summary["max"] == 5.0
    assert score_summary([]) == {"count": 0}

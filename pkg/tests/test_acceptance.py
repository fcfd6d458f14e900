"""Desk-scale runs on the default synthetic corpus. Run with ``pytest --runslow``."""

import pytest

from config.settings import PipelineConfig
from db.artifacts import load_boxes, load_json
from db.corpus import WorkDir, entries_for_split, load_manifest
from logic import pipeline
from logic.localization import coverage

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    config = PipelineConfig()
    pipeline.run_all(config, root / "corpus", root / "work")
    return config, root


def _report(root):
    return load_json(root / "work" / "report.json")


def test_classification_quality(full_run):
    _, root = full_run
    classification = _report(root)["classification"]
    assert classification["auc"] >= 0.95
    assert classification["f1"] >= 0.90


def test_localization_quality(full_run):
    _, root = full_run
    localization = _report(root)["localization"]
    assert localization["ground_truth_boxes"] == 6
    assert localization["mean_iou"] >= 0.5
    assert all(count == 0 for count in localization["boxes_on_clean_scans"].values())


def test_every_defect_is_covered(full_run):
    _, root = full_run
    work = WorkDir(root / "work")
    for entry in entries_for_split(load_manifest(root / "corpus"), "test"):
        truth = load_boxes(root / "corpus" / entry.truth_path)
        if truth:
            assert coverage(load_boxes(work.boxes(entry.scan_id)), truth, min_iou=0.3) == 1.0


def test_latent_sweep_ordering(full_run):
    config, root = full_run
    rows = pipeline.sweep_latent(config, root / "work")
    losses = [row["final_train_mse"] for row in rows]
    assert losses[0] > losses[1] > losses[2]
    aucs = [row["test_auc"] for row in rows]
    assert aucs[1] >= max(aucs[0], aucs[2])


def test_rerun_is_bitwise_identical(full_run, tmp_path):
    config, root = full_run
    pipeline.run_all(config, tmp_path / "corpus", tmp_path / "work")
    for name in ("model/cae.weights", "roc.csv", "threshold.json", "report.json"):
        assert (tmp_path / "work" / name).read_bytes() == (root / "work" / name).read_bytes()

"""Stage functions behind the CLI.

Every stage reads a corpus directory (raw scans, ground truth, manifest) and/or
a work directory (everything the previous stages wrote) and writes its own
artifacts there. Stages log their progress and raise InspectionError
subclasses tagged with the stage name.
"""

import functools
import logging
from pathlib import Path

import numpy as np

from db.artifacts import (
    load_anomaly_map,
    load_boxes,
    load_json,
    load_layout,
    load_sample_set,
    save_anomaly_map,
    save_boxes,
    save_csv,
    save_json,
    save_layout,
    save_loss_history,
    save_roc,
    save_sample_set,
)
from db.corpus import MANIFEST_NAME, WorkDir, entries_for_split, load_manifest
from depth.depth_map import DepthState, preprocess
from depth.pgm import load_pgm, save_pgm
from geometry.edges import edge_map
from geometry.tow_layout import detect_layout
from logic.anomaly import build_anomaly_map, score_windows
from logic.localization import coverage, iou, localize_map, match_and_score
from logic.roc import best_threshold, classification_report, roc_curve, score_summary
from nnet.autoencoder import CAEModel
from nnet.training import train
from nnet.weights import load_weights, save_weights
from sampling.windows import SampleLabel, SampleSet, extract_windows, label_windows, split_train_holdout
from synth.generator import generate_corpus
from utils.errors import InspectionError, MissingArtifact
from utils.render import render_anomaly, render_boxes, render_layout, render_signal, render_windows, write_ppm

# Clean-scan scores above this multiple of the training 99.9th percentile get a warning.
SANITY_FACTOR = 2.0


def _stage(name):
    """Tag InspectionErrors escaping a stage with the stage name."""

    def wrap(func):
        @functools.wraps(func)
        def run(*args, **kwargs):
            logging.info("Stage %s started.", name)
            try:
                result = func(*args, **kwargs)
            except InspectionError as e:
                if e.stage is None:
                    e.stage = name
                raise
            logging.info("Stage %s finished.", name)
            return result

        return run

    return wrap


def _load_normalized(work, scan_id):
    path = work.normalized(scan_id)
    if not path.exists():
        raise MissingArtifact(f"{path} is missing; run preprocess first")
    return load_pgm(path, state=DepthState.NORMALIZED)


def _load_model(work, latent_dim=None):
    path = work.weights(latent_dim)
    if not path.exists():
        raise MissingArtifact(f"{path} is missing; run train first")
    return load_weights(path)


def _training_summary(work):
    return load_json(work.training_summary)


def _labelled_scores(model, sample_set):
    scores = score_windows(model, sample_set)
    labels = sample_set.labels()
    normal = scores[[i for i, lab in enumerate(labels) if lab is SampleLabel.NORMAL]]
    abnormal = scores[[i for i, lab in enumerate(labels) if lab is SampleLabel.ABNORMAL]]
    return normal, abnormal


@_stage("synth-gen")
def synth_gen(config, corpus_dir):
    return generate_corpus(
        corpus_dir,
        n_train=config.n_train,
        n_defect=config.n_defect,
        n_clean_test=config.n_clean_test,
        defects_per_scan=config.defects_per_scan,
        seed=config.seed,
        base_spec=config.synth_spec(),
    )


def preprocess_file(in_path, out_path):
    result = preprocess(load_pgm(in_path))
    if result.degenerate:
        logging.warning("%s is constant; wrote an all-zero normalized map.", in_path)
    save_pgm(result.depth_map, out_path)
    return result


@_stage("preprocess")
def preprocess_corpus(config, corpus_dir, work_dir):
    """Median-filter and normalize every scan; returns {scan_id: degenerate}."""
    work = WorkDir(work_dir)
    flags = {}
    for entry in load_manifest(corpus_dir):
        result = preprocess_file(Path(corpus_dir) / entry.depth_path, work.normalized(entry.scan_id))
        flags[entry.scan_id] = result.degenerate
    return flags


@_stage("detect-tows")
def detect_tows(config, corpus_dir, work_dir):
    """Detect and save the tow layout of every scan; logs deviation from ground truth."""
    work = WorkDir(work_dir)
    layouts = {}
    for entry in load_manifest(corpus_dir):
        layout = detect_layout(_load_normalized(work, entry.scan_id), config.tow_count)
        save_layout(work.layout(entry.scan_id), layout)
        truth_path = Path(corpus_dir) / entry.layout_path
        if truth_path.exists():
            truth = load_layout(truth_path)
            deviation = max(abs(a.row - b.row) for a, b in zip(layout.centerlines, truth.centerlines))
            logging.info("%s: centerline deviation from ground truth %d rows.", entry.scan_id, deviation)
        layouts[entry.scan_id] = layout
    return layouts


def _scan_windows(config, work, entry):
    return extract_windows(
        _load_normalized(work, entry.scan_id),
        load_layout(work.layout(entry.scan_id)),
        config.window,
        config.stride,
        entry.scan_id,
    )


@_stage("extract")
def extract(config, corpus_dir, work_dir):
    """Write the train/holdout sets (normal scans) and the labelled test set."""
    work = WorkDir(work_dir)
    entries = load_manifest(corpus_dir)

    normal = SampleSet.concat(
        [_scan_windows(config, work, e) for e in entries_for_split(entries, "train")], "train"
    )
    if len(normal) < 2:
        raise MissingArtifact("the corpus has no training scans to sample")
    train_set, holdout = split_train_holdout(normal, config.holdout_fraction, config.seed)
    save_sample_set(work.samples("train"), train_set)
    save_sample_set(work.samples("holdout"), holdout)

    test_sets = []
    for entry in entries_for_split(entries, "test"):
        truth = load_boxes(Path(corpus_dir) / entry.truth_path)
        test_sets.append(label_windows(_scan_windows(config, work, entry), truth))
    test = SampleSet.concat(test_sets, "test")
    save_sample_set(work.samples("test"), test)
    return {"train": len(train_set), "holdout": len(holdout), "test": len(test)}


def _fit(config, train_set, latent_dim):
    model = CAEModel(latent_dim, window=config.window, seed=config.seed)
    return train(model, train_set, config.train_config())


def _summarize(config, result, holdout):
    holdout_scores = score_windows(result.model, holdout)
    return {
        "latent_dim": result.model.latent_dim,
        "window": config.window,
        "epochs": len(result.history),
        "final_train_mse": result.history[-1],
        "holdout_mse": float(np.mean(holdout_scores)) if len(holdout_scores) else None,
        "score_percentiles": result.score_percentiles,
    }


@_stage("train")
def train_model(config, work_dir, latent_dim=None):
    work = WorkDir(work_dir)
    latent_dim = latent_dim or config.latent_dim
    result = _fit(config, load_sample_set(work.samples("train")), latent_dim)
    save_weights(result.model, work.weights())
    save_loss_history(work.loss_history, result.history)
    summary = _summarize(config, result, load_sample_set(work.samples("holdout")))
    save_json(work.training_summary, summary)
    return summary


SWEEP_GROUPS = ("train_normal", "test_normal", "test_abnormal")
SWEEP_STATS = ("mean", "std", "median", "p99")
SWEEP_METRICS = ("threshold", "fpr", "tpr", "precision", "recall", "f1", "accuracy")
SWEEP_HEADER = (
    ("latent_dim", "final_train_mse", "test_mse_normal", "test_mse_abnormal", "test_auc")
    + SWEEP_METRICS
    + tuple(f"{group}_{stat}" for group in SWEEP_GROUPS for stat in SWEEP_STATS)
)


def _sweep_row(latent_dim, result, train_scores, normal, abnormal):
    summaries = {
        "train_normal": score_summary(train_scores),
        "test_normal": score_summary(normal),
        "test_abnormal": score_summary(abnormal),
    }
    row = {
        "latent_dim": latent_dim,
        "final_train_mse": result.history[-1],
        "test_mse_normal": summaries["test_normal"].get("mean"),
        "test_mse_abnormal": summaries["test_abnormal"].get("mean"),
        "test_auc": None,
    }
    row.update(dict.fromkeys(SWEEP_METRICS))
    if len(normal) and len(abnormal):
        curve = roc_curve(normal, abnormal)
        point = best_threshold(curve)
        report = classification_report(normal, abnormal, point.threshold)
        row.update(
            test_auc=curve.auc,
            threshold=point.threshold,
            fpr=point.fpr,
            tpr=point.tpr,
            precision=report.precision,
            recall=report.recall,
            f1=report.f1,
            accuracy=report.accuracy,
        )
    for group in SWEEP_GROUPS:
        for stat in SWEEP_STATS:
            row[f"{group}_{stat}"] = summaries[group].get(stat)
    row["score_summaries"] = summaries
    return row


@_stage("sweep-latent")
def sweep_latent(config, work_dir):
    """Train one model per latent size; tabulate MSE distributions and the ROC operating point."""
    work = WorkDir(work_dir)
    train_set = load_sample_set(work.samples("train"))
    test = load_sample_set(work.samples("test"))
    rows = []
    for latent_dim in config.latent_sweep:
        result = _fit(config, train_set, latent_dim)
        save_weights(result.model, work.sweep(f"cae_latent{latent_dim}.weights"))
        save_loss_history(work.sweep(f"loss_latent{latent_dim}.csv"), result.history)
        normal, abnormal = _labelled_scores(result.model, test)
        row = _sweep_row(latent_dim, result, score_windows(result.model, train_set), normal, abnormal)
        rows.append(row)
        logging.info("Latent %d: train mse %.6g, test auc %s, f1 %s.", latent_dim, row["final_train_mse"], row["test_auc"], row["f1"])

    save_csv(
        work.sweep("latent_sweep.csv"),
        SWEEP_HEADER,
        [["" if r[k] is None else repr(r[k]) for k in SWEEP_HEADER] for r in rows],
    )
    return rows


@_stage("score")
def score(config, corpus_dir, work_dir):
    """Anomaly map for every test scan."""
    work = WorkDir(work_dir)
    model = _load_model(work)
    bound = SANITY_FACTOR * _training_summary(work)["score_percentiles"]["p99.9"]
    maps = {}
    for entry in entries_for_split(load_manifest(corpus_dir), "test"):
        anomaly_map = build_anomaly_map(
            model,
            _load_normalized(work, entry.scan_id),
            load_layout(work.layout(entry.scan_id)),
            config.window,
            config.stride,
            entry.scan_id,
        )
        save_anomaly_map(work.anomaly_map(entry.scan_id), anomaly_map)
        scores = anomaly_map.all_scores()
        peak = float(scores.max()) if len(scores) else 0.0
        if entry.defect_count == 0 and peak > bound:
            logging.warning("%s is defect-free but peaks at %.5g (bound %.5g).", entry.scan_id, peak, bound)
        maps[entry.scan_id] = anomaly_map
    return maps


@_stage("threshold")
def threshold(config, work_dir):
    """ROC over the labelled test windows and the corner-nearest operating point."""
    work = WorkDir(work_dir)
    model = _load_model(work)
    normal, abnormal = _labelled_scores(model, load_sample_set(work.samples("test")))
    curve = roc_curve(normal, abnormal)
    point = best_threshold(curve)
    save_roc(work.roc, curve)
    data = dict(point.to_dict(), auc=curve.auc, latent_dim=model.latent_dim)
    save_json(work.threshold, data)
    logging.info("Threshold %.6g (fpr %.3f, tpr %.3f, auc %.4f).", point.threshold, point.fpr, point.tpr, curve.auc)
    return data


@_stage("localize")
def localize(config, corpus_dir, work_dir):
    """Blob detection on every test anomaly map; the floor scales with training p99."""
    work = WorkDir(work_dir)
    floor = config.response_floor * _training_summary(work)["score_percentiles"]["p99"]
    logging.info("Blob response floor %.6g.", floor)
    results = {}
    for entry in entries_for_split(load_manifest(corpus_dir), "test"):
        anomaly_map = load_anomaly_map(work.anomaly_map(entry.scan_id))
        layout = load_layout(work.layout(entry.scan_id))
        blobs, boxes = localize_map(anomaly_map, layout, config.scales, floor, config.tow_width)
        save_boxes(work.boxes(entry.scan_id), boxes)
        save_json(work.blobs(entry.scan_id), {
            "response_floor": floor,
            "blobs": [
                {"tow": b.tow_index, "index": b.index, "center_x": b.center_x, "sigma": b.sigma, "response": b.response}
                for b in blobs
            ],
        })
        results[entry.scan_id] = boxes
    return results


@_stage("evaluate")
def evaluate(config, corpus_dir, work_dir):
    """Classification report at the stored threshold plus box metrics; writes report.json."""
    work = WorkDir(work_dir)
    model = _load_model(work)
    stored = load_json(work.threshold)
    normal, abnormal = _labelled_scores(model, load_sample_set(work.samples("test")))
    classification = classification_report(normal, abnormal, stored["threshold"])

    per_scan, clean_boxes = {}, {}
    totals = {"greedy": 0.0, "optimal": 0.0, "covered": 0.0, "truth": 0, "predicted": 0}
    for entry in entries_for_split(load_manifest(corpus_dir), "test"):
        predicted = load_boxes(work.boxes(entry.scan_id))
        truth = load_boxes(Path(corpus_dir) / entry.truth_path)
        if not truth:
            clean_boxes[entry.scan_id] = len(predicted)
            continue
        greedy = match_and_score(predicted, truth, "greedy")
        optimal = match_and_score(predicted, truth, "optimal")
        scan_coverage = coverage(predicted, truth)
        per_scan[entry.scan_id] = dict(greedy.to_dict(), optimal_mean_iou=optimal.mean_iou, coverage=scan_coverage)
        # per-scan means weighted back into an average over every ground-truth box
        totals["greedy"] += greedy.mean_iou * len(truth)
        totals["optimal"] += optimal.mean_iou * len(truth)
        totals["covered"] += scan_coverage * len(truth)
        totals["truth"] += len(truth)
        totals["predicted"] += len(predicted)

    n_truth = totals["truth"]
    report = {
        "classification": classification.to_dict(),
        "threshold": stored,
        "scores": {"normal": score_summary(normal), "abnormal": score_summary(abnormal)},
        "localization": {
            "mean_iou": totals["greedy"] / n_truth if n_truth else None,
            "mean_iou_optimal": totals["optimal"] / n_truth if n_truth else None,
            "coverage": totals["covered"] / n_truth if n_truth else None,
            "ground_truth_boxes": n_truth,
            "predicted_boxes": totals["predicted"],
            "per_scan": per_scan,
            "boxes_on_clean_scans": clean_boxes,
        },
    }
    save_json(work.report, report)
    return report


@_stage("render")
def render(config, corpus_dir, work_dir):
    """Figures for every test scan (and the first training scan's layout)."""
    work = WorkDir(work_dir)
    entries = load_manifest(corpus_dir)
    written = []
    for entry in entries_for_split(entries, "train")[:1] + entries_for_split(entries, "test"):
        depth_map = _load_normalized(work, entry.scan_id)
        layout = load_layout(work.layout(entry.scan_id))
        written.append(write_ppm(
            work.render(f"{entry.scan_id}_layout.ppm"),
            render_layout(depth_map, layout, edge_map(depth_map).mask),
        ))
        written.append(write_ppm(
            work.render(f"{entry.scan_id}_windows.ppm"),
            render_windows(depth_map, extract_windows(depth_map, layout, config.window, config.stride)),
        ))
        if entry.split != "test":
            continue

        anomaly_map = load_anomaly_map(work.anomaly_map(entry.scan_id))
        written.append(write_ppm(work.render(f"{entry.scan_id}_anomaly.ppm"), render_anomaly(depth_map, anomaly_map)))

        if anomaly_map.tows:
            blobs = load_json(work.blobs(entry.scan_id))["blobs"]
            peak_tow = max(anomaly_map.tows, key=lambda t: anomaly_map.signal(t).scores.max())
            written.append(write_ppm(
                work.render(f"{entry.scan_id}_signal_tow{peak_tow}.ppm"),
                render_signal(anomaly_map.signal(peak_tow).scores, [b["index"] for b in blobs if b["tow"] == peak_tow]),
            ))

        predicted = load_boxes(work.boxes(entry.scan_id))
        truth = load_boxes(Path(corpus_dir) / entry.truth_path)
        written.append(write_ppm(work.render(f"{entry.scan_id}_boxes.ppm"), render_boxes(depth_map, predicted, truth)))
        save_json(work.render(f"{entry.scan_id}_boxes_iou.json"), {
            "ious": [[iou(p, t) for t in truth] for p in predicted],
            "match": match_and_score(predicted, truth).to_dict(),
        })
    return written


def run_all(config, corpus_dir, work_dir):
    """Every stage in order; generates the corpus first when it has no manifest."""
    if not (Path(corpus_dir) / MANIFEST_NAME).exists():
        synth_gen(config, corpus_dir)
    preprocess_corpus(config, corpus_dir, work_dir)
    detect_tows(config, corpus_dir, work_dir)
    extract(config, corpus_dir, work_dir)
    train_model(config, work_dir)
    score(config, corpus_dir, work_dir)
    threshold(config, work_dir)
    localize(config, corpus_dir, work_dir)
    report = evaluate(config, corpus_dir, work_dir)
    render(config, corpus_dir, work_dir)
    return report

"""Read/write every on-disk artifact the stages exchange.

JSON is written with sorted keys and a trailing newline, CSV with ``\\n``
line endings, and binary blobs little-endian, so re-running a stage with the
same inputs reproduces byte-identical files.
"""

import csv
import json
import logging
from pathlib import Path

import numpy as np

from geometry.tow_layout import TowLayout
from logic.anomaly import AnomalyMap
from logic.localization import DefectBox
from sampling.windows import SampleLabel, SampleSet, WindowSample
from utils.errors import MissingArtifact

SAMPLE_SET_FORMAT = "sample-set/1"


def _require(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"{path} does not exist")
    return path


def save_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    logging.info("Wrote %s.", path)
    return path


def load_json(path):
    path = _require(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise MissingArtifact(f"{path} is not valid JSON: {e}") from None


def save_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logging.info("Wrote %s.", path)
    return path


def load_csv(path):
    """Rows as dicts keyed by the header."""
    with _require(path).open(newline="") as f:
        return list(csv.DictReader(f))


# -- layouts and boxes
def save_layout(path, layout):
    return save_json(path, layout.to_dict())


def load_layout(path):
    return TowLayout.from_dict(load_json(path))


def save_boxes(path, boxes):
    return save_json(path, {"boxes": [b.to_dict() for b in boxes]})


def load_boxes(path):
    return [DefectBox.from_dict(b) for b in load_json(path).get("boxes", [])]


# -- sample sets: JSON manifest next to a float32 blob
def save_sample_set(path, sample_set):
    """Write ``<path>.json`` (window positions and labels) and ``<path>.f32``."""
    path = Path(path)
    manifest = {
        "format": SAMPLE_SET_FORMAT,
        "source_id": sample_set.source_id,
        "window": sample_set.window,
        "stride": sample_set.stride,
        "samples": [
            {"x": s.center_x, "y": s.center_y, "tow": s.tow_index, "label": s.label.value}
            for s in sample_set
        ],
    }
    save_json(path.with_suffix(".json"), manifest)
    blob = sample_set.stack(np.float32).astype("<f4").tobytes()
    path.with_suffix(".f32").write_bytes(blob)
    logging.info("Saved %d windows to %s.", len(sample_set), path.with_suffix(".f32"))
    return path


def load_sample_set(path):
    path = Path(path)
    manifest = load_json(path.with_suffix(".json"))
    if manifest.get("format") != SAMPLE_SET_FORMAT:
        raise MissingArtifact(f"{path}: unexpected sample set format {manifest.get('format')!r}")
    window = int(manifest["window"])
    entries = manifest["samples"]
    blob = _require(path.with_suffix(".f32")).read_bytes()
    expected = len(entries) * window * window * 4
    if len(blob) != expected:
        raise MissingArtifact(f"{path}: blob holds {len(blob)} bytes, manifest needs {expected}")

    pixels = np.frombuffer(blob, dtype="<f4").reshape(len(entries), window, window)
    samples = tuple(
        WindowSample(pixels[i].astype(np.float32), e["x"], e["y"], e["tow"], SampleLabel(e["label"]))
        for i, e in enumerate(entries)
    )
    return SampleSet(samples, manifest["source_id"], window, int(manifest["stride"]))


# -- anomaly maps
ANOMALY_MAP_HEADER = ("tow_index", "center_x", "center_y", "mse")


def save_anomaly_map(path, anomaly_map):
    rows = [(t, x, y, repr(m)) for t, x, y, m in anomaly_map.rows()]
    save_csv(path, ANOMALY_MAP_HEADER, rows)
    meta = {
        "image_shape": list(anomaly_map.image_shape) if anomaly_map.image_shape else None,
        "window": anomaly_map.window,
        "stride": anomaly_map.stride,
    }
    save_json(Path(path).with_suffix(".json"), meta)
    return path


def load_anomaly_map(path):
    rows = load_csv(path)
    meta_path = Path(path).with_suffix(".json")
    meta = load_json(meta_path) if meta_path.exists() else {}
    return AnomalyMap.from_rows(
        ((r["tow_index"], r["center_x"], r["center_y"], r["mse"]) for r in rows),
        image_shape=tuple(meta["image_shape"]) if meta.get("image_shape") else None,
        window=meta.get("window", 32),
        stride=meta.get("stride", 8),
    )


# -- training curves and ROC
def save_loss_history(path, history):
    return save_csv(path, ("epoch", "mean_mse"), [(i + 1, repr(float(v))) for i, v in enumerate(history)])


def load_loss_history(path):
    return [float(r["mean_mse"]) for r in load_csv(path)]


def save_roc(path, curve):
    rows = [(repr(f), repr(t), repr(thr)) for f, t, thr in curve.points]
    return save_csv(path, ("fpr", "tpr", "threshold"), rows)

"""Corpus manifests and the work-directory layout shared by the CLI stages."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from db.artifacts import load_json, save_boxes, save_json, save_layout
from depth.pgm import save_pgm
from utils.errors import MissingArtifact

MANIFEST_NAME = "manifest.json"
SPLITS = ("train", "test")


@dataclass(frozen=True)
class CorpusEntry:
    scan_id: str
    split: str
    depth_path: str
    layout_path: str
    truth_path: str
    defect_count: int = 0

    def to_dict(self):
        return asdict(self)


def save_corpus_scan(root, scan_id, split, scan, spec=None):
    """Write one generated scan (PGM, layout, truth boxes, spec) under ``root``."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    root = Path(root)
    logging.info("Saving corpus scan %s (%s).", scan_id, split)
    entry = CorpusEntry(
        scan_id=scan_id,
        split=split,
        depth_path=f"scans/{scan_id}.pgm",
        layout_path=f"layouts/{scan_id}.json",
        truth_path=f"truth/{scan_id}.json",
        defect_count=len(scan.truth),
    )
    save_pgm(scan.depth_map, root / entry.depth_path)
    save_layout(root / entry.layout_path, scan.layout)
    save_boxes(root / entry.truth_path, scan.truth)
    if spec is not None:
        save_json(root / "specs" / f"{scan_id}.json", spec.to_dict())
    return entry


def write_manifest(root, entries, seed):
    data = {"seed": seed, "scans": [e.to_dict() for e in entries]}
    return save_json(Path(root) / MANIFEST_NAME, data)


def load_manifest(root):
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise MissingArtifact(f"no corpus manifest at {path}")
    entries = [CorpusEntry(**e) for e in load_json(path)["scans"]]
    logging.info("Loaded manifest %s: %d scans.", path, len(entries))
    return entries


def entries_for_split(entries, split):
    return [e for e in entries if e.split == split]


class WorkDir:
    """Paths of every artifact a pipeline run writes below one directory."""

    def __init__(self, root):
        self.root = Path(root)

    def normalized(self, scan_id):
        return self.root / "normalized" / f"{scan_id}.pgm"

    def layout(self, scan_id):
        return self.root / "layouts" / f"{scan_id}.json"

    def samples(self, name):
        return self.root / "samples" / name

    def weights(self, latent_dim=None):
        name = "cae.weights" if latent_dim is None else f"cae_latent{latent_dim}.weights"
        return self.root / "model" / name

    @property
    def loss_history(self):
        return self.root / "model" / "loss.csv"

    @property
    def training_summary(self):
        return self.root / "model" / "training.json"

    def sweep(self, name):
        return self.root / "sweep" / name

    def anomaly_map(self, scan_id):
        return self.root / "maps" / f"{scan_id}.csv"

    def boxes(self, scan_id):
        return self.root / "boxes" / f"{scan_id}.json"

    def blobs(self, scan_id):
        return self.root / "boxes" / f"{scan_id}.blobs.json"

    def render(self, name):
        return self.root / "renders" / name

    @property
    def roc(self):
        return self.root / "roc.csv"

    @property
    def threshold(self):
        return self.root / "threshold.json"

    @property
    def report(self):
        return self.root / "report.json"

"""Square windows sampled along tow centerlines.

Windows are centered on a centerline row and step along it by ``stride``;
for a window of size 2b the crop covers [center - b, center + b - 1] on both
axes.
"""

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.model_selection import train_test_split

from depth.depth_map import DepthState
from utils.errors import EmptyLayout, WindowTooLarge

DEFAULT_WINDOW = 32
DEFAULT_STRIDE = 8


class SampleLabel(enum.Enum):
    UNLABELED = "unlabeled"
    NORMAL = "normal"
    ABNORMAL = "abnormal"


@dataclass(frozen=True)
class WindowSample:
    pixels: np.ndarray
    center_x: int
    center_y: int
    tow_index: int
    label: SampleLabel = SampleLabel.UNLABELED

    def footprint(self):
        """(x0, y0, x1, y1), half-open."""
        b = self.pixels.shape[0] // 2
        return self.center_x - b, self.center_y - b, self.center_x + b, self.center_y + b


@dataclass(frozen=True)
class SampleSet:
    samples: tuple = field(default_factory=tuple)
    source_id: str = ""
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for sample in self.samples:
            if sample.pixels.shape != (self.window, self.window):
                raise ValueError(f"sample of shape {sample.pixels.shape} in a {self.window}px set")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def stack(self, dtype=np.float32):
        """All windows as an (N, 1, window, window) array."""
        if not self.samples:
            return np.zeros((0, 1, self.window, self.window), dtype=dtype)
        return np.stack([s.pixels for s in self.samples]).astype(dtype)[:, np.newaxis]

    def labels(self):
        return [s.label for s in self.samples]

    def subset(self, indices, source_id=None):
        return replace(
            self,
            samples=tuple(self.samples[i] for i in indices),
            source_id=self.source_id if source_id is None else source_id,
        )

    def where(self, label):
        return self.subset([i for i, s in enumerate(self.samples) if s.label is label])

    @classmethod
    def concat(cls, sets, source_id):
        sets = list(sets)
        window = sets[0].window if sets else DEFAULT_WINDOW
        stride = sets[0].stride if sets else DEFAULT_STRIDE
        if any(s.window != window or s.stride != stride for s in sets):
            raise ValueError("cannot concatenate sample sets with different window/stride")
        samples = tuple(sample for s in sets for sample in s.samples)
        return cls(samples, source_id, window, stride)


def extract_windows(depth_map, layout, window=DEFAULT_WINDOW, stride=DEFAULT_STRIDE, source_id=""):
    if depth_map.state is not DepthState.NORMALIZED:
        raise ValueError("extract_windows expects a normalized depth map")
    if window < 2 or window % 2:
        raise ValueError(f"window must be a positive even size, got {window}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    height, width = depth_map.shape
    if window > min(height, width):
        raise WindowTooLarge(f"window {window} exceeds image {width}x{height}")
    if not layout.centerlines:
        raise EmptyLayout("layout has no centerlines to sample along")

    b = window // 2
    pixels = depth_map.pixels
    samples = []
    for line in layout.centerlines:
        # Centerlines closer than b to the top/bottom border shift inward.
        center_y = min(max(line.row, b), height - b)
        center_x = line.x_start + b
        while center_x + b <= line.x_end:
            crop = pixels[center_y - b:center_y + b, center_x - b:center_x + b]
            samples.append(WindowSample(crop.astype(np.float32), center_x, center_y, line.tow_index))
            center_x += stride

    logging.info("Extracted %d windows from %s (%d tows).", len(samples), source_id or "scan", layout.tow_count)
    return SampleSet(tuple(samples), source_id, window, stride)


def split_train_holdout(sample_set, holdout_fraction, seed):
    """Seeded shuffle-and-split into disjoint (train, holdout) sets."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    indices = np.arange(len(sample_set))
    train_idx, holdout_idx = train_test_split(
        indices, test_size=holdout_fraction, random_state=seed, shuffle=True
    )
    return (
        sample_set.subset(train_idx.tolist(), f"{sample_set.source_id}:train"),
        sample_set.subset(holdout_idx.tolist(), f"{sample_set.source_id}:holdout"),
    )


def _overlaps(footprint, box):
    x0, y0, x1, y1 = footprint
    return x0 < box.x + box.w and box.x < x1 and y0 < box.y + box.h and box.y < y1


def label_windows(sample_set, truth_boxes):
    """Assign evaluation labels from ground-truth boxes.

    Abnormal: a box on the window's tow covers its center column.
    Normal: the window footprint touches no box at all.
    Unlabeled: anything in between (partial overlaps), kept out of metrics.
    """
    labelled = []
    for sample in sample_set.samples:
        footprint = sample.footprint()
        label = SampleLabel.NORMAL
        for box in truth_boxes:
            if box.tow_index == sample.tow_index and box.x <= sample.center_x < box.x + box.w:
                label = SampleLabel.ABNORMAL
                break
            if _overlaps(footprint, box):
                label = SampleLabel.UNLABELED
        labelled.append(replace(sample, label=label))

    counts = {lab.value: sum(1 for s in labelled if s.label is lab) for lab in SampleLabel}
    logging.info("Labelled %s: %s", sample_set.source_id or "samples", counts)
    return replace(sample_set, samples=tuple(labelled))

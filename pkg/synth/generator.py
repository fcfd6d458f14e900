"""Synthetic AFP depth maps with ground-truth geometry and injected defects.

A scan is a stack of horizontal tows laid across a flat tool surface:

* the layup is vertically centred; tow k occupies the rows between groove
  rows g_k and g_k+1, where g_k = top + k * (tow_width + 1);
* every tow boundary is a 1 px groove one groove depth below the nominal
  tow surface; the first and last row of each tow are chamfered half a
  groove depth down, so a groove survives a 3x3 median filter as a shallow
  3 px valley;
* the bare tool surface sits level with the chamfers;
* columns [margin, width - margin) carry material, the rest is tool.

On top of that come per-tow elevation offsets, a low-frequency bow, Gaussian
surface noise and sparse salt-and-pepper impulses. Defects are added last and
only inside their footprint, so a defect scan differs from the defect-free
render of the same seed only there.
"""

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from db.corpus import save_corpus_scan, write_manifest
from depth.depth_map import DepthMap, DepthState
from geometry.tow_layout import estimate_centerlines
from logic.localization import DefectBox
from utils.errors import SynthSpecError
from utils.helpers import make_rng, make_scan_id

DEFAULT_EXTENT_RANGE = (32, 64)
MIN_EXTENT = 4
MAX_PLACEMENT_ATTEMPTS = 100


class DefectKind(enum.Enum):
    GAP = "gap"
    OVERLAP = "overlap"
    TWIST = "twist"
    FOREIGN_OBJECT = "foreign_object"


@dataclass(frozen=True)
class DefectSpec:
    kind: DefectKind
    tow_index: int
    x_start: int
    x_extent: int
    # None means one groove depth
    magnitude: float = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DefectKind(self.kind))
        if self.x_extent < MIN_EXTENT:
            raise SynthSpecError(f"defect extent must be >= {MIN_EXTENT} px, got {self.x_extent}")
        if self.magnitude is not None and self.magnitude < 0:
            raise SynthSpecError(f"defect magnitude must be >= 0, got {self.magnitude}")

    @property
    def x_end(self):
        return self.x_start + self.x_extent

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "tow_index": self.tow_index,
            "x_start": self.x_start,
            "x_extent": self.x_extent,
            "magnitude": self.magnitude,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=DefectKind(data["kind"]),
            tow_index=int(data["tow_index"]),
            x_start=int(data["x_start"]),
            x_extent=int(data["x_extent"]),
            magnitude=data.get("magnitude"),
        )


@dataclass(frozen=True)
class SynthSpec:
    width: int = 256
    height: int = 256
    tow_count: int = 8
    tow_width: int = 21
    groove_depth: float = 1.0
    surface_noise_std: float = 0.02
    tow_offset_std: float = 0.05
    bow_amplitude: float = 0.5
    impulse_rate: float = 0.001
    margin: int = 16
    seed: int = 0
    defects: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "defects", tuple(self.defects))
        if self.tow_count < 1 or self.tow_width < 3:
            raise SynthSpecError(f"need tow_count >= 1 and tow_width >= 3, got {self.tow_count}, {self.tow_width}")
        # tow_count + 1 grooves: the closing one needs a row of its own
        if self.tow_count * self.pitch >= self.height:
            raise SynthSpecError(
                f"{self.tow_count} tows of {self.tow_width} px plus grooves do not fit in {self.height} rows"
            )
        if not 1 <= self.margin < self.width // 2:
            raise SynthSpecError(f"margin {self.margin} leaves no layup in {self.width} columns")
        for name in ("groove_depth", "surface_noise_std", "tow_offset_std", "bow_amplitude"):
            if getattr(self, name) < 0:
                raise SynthSpecError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.impulse_rate <= 1.0:
            raise SynthSpecError(f"impulse_rate must be in [0, 1], got {self.impulse_rate}")
        for defect in self.defects:
            self._check_defect(defect)

    def _check_defect(self, defect):
        if not 0 <= defect.tow_index < self.tow_count:
            raise SynthSpecError(f"defect on tow {defect.tow_index}, layup has {self.tow_count} tows")
        left, right = self.vertical_bounds
        if defect.x_start < left or defect.x_end > right:
            raise SynthSpecError(
                f"defect columns [{defect.x_start}, {defect.x_end}) leave the layup [{left}, {right})"
            )

    @property
    def pitch(self):
        return self.tow_width + 1

    @property
    def top(self):
        return (self.height - (self.tow_count * self.pitch + 1)) // 2

    @property
    def groove_rows(self):
        return tuple(self.top + k * self.pitch for k in range(self.tow_count + 1))

    @property
    def vertical_bounds(self):
        return self.margin, self.width - self.margin

    def tow_rows(self, tow_index):
        """Half-open row span [first, last + 1) of a tow's material."""
        first = self.groove_rows[tow_index] + 1
        return first, first + self.tow_width

    def footprint(self, defect):
        y0, y1 = self.tow_rows(defect.tow_index)
        return defect.x_start, y0, defect.x_end, y1

    def to_dict(self):
        data = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "defects"}
        data["defects"] = [d.to_dict() for d in self.defects]
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        defects = tuple(DefectSpec.from_dict(d) for d in data.pop("defects", []))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise SynthSpecError(f"unknown synth spec keys: {sorted(unknown)}")
        return cls(defects=defects, **data)


class SynthScan(NamedTuple):
    depth_map: DepthMap
    layout: object
    truth: list


def _defect_profile(spec, defect):
    """Additive elevation change over the defect footprint."""
    x0, y0, x1, y1 = spec.footprint(defect)
    magnitude = spec.groove_depth if defect.magnitude is None else defect.magnitude
    u = (np.arange(x1 - x0) + 0.5) / (x1 - x0)
    v = np.arange(y1 - y0) / (y1 - y0 - 1)
    uu, vv = np.meshgrid(u, v)

    if defect.kind is DefectKind.GAP:
        return np.full(uu.shape, -magnitude)
    if defect.kind is DefectKind.OVERLAP:
        return np.full(uu.shape, magnitude)
    if defect.kind is DefectKind.TWIST:
        return magnitude * np.sin(np.pi * uu) * (2.0 * vv - 1.0)
    # foreign object: a bump centred in the footprint, a quarter of it wide
    return magnitude * np.exp(-((uu - 0.5) ** 2 / (2 * 0.25 ** 2) + (vv - 0.5) ** 2 / (2 * 0.25 ** 2)))


def _surface(spec, rng):
    height, width = spec.height, spec.width
    depth = spec.groove_depth
    left, right = spec.vertical_bounds
    # grooves stay at 0, the tool surface and chamfers at half a groove depth
    surface = np.full((height, width), depth / 2)
    for row in spec.groove_rows:
        surface[row, left:right] = 0.0

    offsets = rng.normal(0.0, spec.tow_offset_std, spec.tow_count)
    for k in range(spec.tow_count):
        first, stop = spec.tow_rows(k)
        surface[first:stop, left:right] = depth + offsets[k]
        surface[first, left:right] -= depth / 2
        surface[stop - 1, left:right] -= depth / 2

    yy, xx = np.mgrid[0:height, 0:width]
    u = 2.0 * xx / max(width - 1, 1) - 1.0
    v = 2.0 * yy / max(height - 1, 1) - 1.0
    surface += spec.bow_amplitude * (u ** 2 + v ** 2) / 2.0
    surface += rng.normal(0.0, spec.surface_noise_std, surface.shape)

    hit = rng.random(surface.shape) < spec.impulse_rate
    salt = rng.random(surface.shape) < 0.5
    high, low = surface.max() + depth, surface.min() - depth
    surface[hit] = np.where(salt, high, low)[hit]
    return surface


def ground_truth_layout(spec):
    return estimate_centerlines(spec.groove_rows, spec.vertical_bounds, (spec.height, spec.width))


def generate(spec):
    """Render one raw scan; returns (depth_map, layout, truth boxes)."""
    surface = _surface(spec, make_rng(spec.seed))

    truth = []
    for defect in spec.defects:
        x0, y0, x1, y1 = spec.footprint(defect)
        surface[y0:y1, x0:x1] += _defect_profile(spec, defect)
        truth.append(DefectBox(
            x=x0, y=y0, w=x1 - x0, h=y1 - y0, tow_index=defect.tow_index, label=defect.kind.value,
        ))

    layout = ground_truth_layout(spec)
    logging.info("Generated %dx%d scan (seed %d) with %d defects.", spec.width, spec.height, spec.seed, len(truth))
    return SynthScan(DepthMap(surface, DepthState.RAW), layout, truth)


def random_defects(spec, count, rng, extent_range=DEFAULT_EXTENT_RANGE, magnitude=None, spacing=32):
    """Non-overlapping defects on shuffled tows, kinds taken in turn.

    Defects that share a tow keep at least ``spacing`` columns apart.
    """
    lo, hi = extent_range
    left, right = spec.vertical_bounds
    if lo < MIN_EXTENT or hi < lo or hi > right - left:
        raise SynthSpecError(f"extent range {extent_range} does not fit the layup width {right - left}")

    kinds = list(DefectKind)
    tows = rng.permutation(spec.tow_count)
    placed = []
    for i in range(count):
        tow = int(tows[i % spec.tow_count])
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            extent = int(rng.integers(lo, hi + 1))
            x_start = int(rng.integers(left, right - extent + 1))
            if all(
                d.tow_index != tow or x_start >= d.x_end + spacing or x_start + extent + spacing <= d.x_start
                for d in placed
            ):
                break
        else:
            raise SynthSpecError(f"could not place defect {i + 1} of {count} on tow {tow}")
        placed.append(DefectSpec(kinds[i % len(kinds)], tow, x_start, extent, magnitude))
    return placed


def with_random_defects(spec, count, seed):
    return replace(spec, defects=tuple(random_defects(spec, count, make_rng(seed, 7))))


def generate_corpus(out_dir, n_train=42, n_defect=2, n_clean_test=2, defects_per_scan=3, seed=0, base_spec=None):
    """Write a train/test corpus of raw scans plus its manifest.

    Training scans are defect-free. The test split holds ``n_defect`` scans
    with ``defects_per_scan`` random defects each and ``n_clean_test``
    defect-free scans for false-positive checks.
    """
    base_spec = base_spec or SynthSpec()
    plan = (
        [("train", "normal", i) for i in range(n_train)]
        + [("test", "defect", i) for i in range(n_defect)]
        + [("test", "clean", i) for i in range(n_clean_test)]
    )

    entries = []
    for position, (split, kind, index) in enumerate(plan):
        scan_seed = int(make_rng(seed, 3, position).integers(0, 2 ** 31 - 1))
        spec = replace(base_spec, seed=scan_seed, defects=())
        if kind == "defect":
            spec = with_random_defects(spec, defects_per_scan, scan_seed)
        scan_id = make_scan_id(split, index, kind)
        entries.append(save_corpus_scan(out_dir, scan_id, split, generate(spec), spec))

    write_manifest(out_dir, entries, seed)
    logging.info("Corpus written to %s: %d scans.", out_dir, len(entries))
    return entries

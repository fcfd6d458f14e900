"""Depth-map container plus the two preprocessing steps applied to every scan:
3x3 median filtering (salt-and-pepper removal) followed by min-max
normalization into [0, 1].
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class DepthState(enum.Enum):
    RAW = "raw"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class DepthMap:
    """2D elevation field, row-major ``pixels[row, col]``."""

    pixels: np.ndarray
    state: DepthState = DepthState.RAW

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError(f"depth map must be a non-empty 2D grid, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("depth map contains non-finite values")
        if self.state is DepthState.NORMALIZED:
            lo, hi = float(pixels.min()), float(pixels.max())
            if lo < 0.0 or hi > 1.0:
                raise ValueError(f"normalized depth map outside [0, 1]: [{lo}, {hi}]")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    def with_pixels(self, pixels, state=None):
        return DepthMap(pixels, self.state if state is None else state)


@dataclass(frozen=True)
class NormalizationResult:
    depth_map: DepthMap
    degenerate: bool
    z_min: float
    z_max: float


def median_filter_3x3(depth_map):
    """Median of each 3x3 neighbourhood, borders clamped to the nearest edge pixel."""
    filtered = ndimage.median_filter(depth_map.pixels, size=3, mode="nearest")
    return depth_map.with_pixels(filtered)


def min_max_normalize(depth_map):
    """Map elevations linearly onto [0, 1]: p = (z - min) / (max - min).

    A constant map has no relief to stretch; it comes back all zeros with
    ``degenerate`` set. Already-normalized maps pass through the same formula,
    which is the identity on them.
    """
    z = depth_map.pixels
    z_min, z_max = float(z.min()), float(z.max())
    if z_max == z_min:
        logging.warning("Constant depth map (%s); normalized output is all zeros.", z_min)
        flat = DepthMap(np.zeros_like(z), DepthState.NORMALIZED)
        return NormalizationResult(flat, True, z_min, z_max)

    normalized = (z - z_min) / (z_max - z_min)
    # Guard the endpoints against rounding so the [0, 1] invariant holds exactly.
    normalized = np.clip(normalized, 0.0, 1.0)
    normalized[z == z_min] = 0.0
    normalized[z == z_max] = 1.0
    return NormalizationResult(DepthMap(normalized, DepthState.NORMALIZED), False, z_min, z_max)


def preprocess(depth_map):
    """Median filter, then normalize."""
    return min_max_normalize(median_filter_3x3(depth_map))

"""Axis-aligned Hough line detector.

Tows are laid straight and horizontal, so the accumulator only needs the two
angles theta = 90 deg (horizontal lines, rho = row) and theta = 0 deg
(vertical lines, rho = column), with a 1 px rho resolution.
"""

import enum
import logging

import numpy as np

from utils.errors import FewerLinesThanExpected
from utils.helpers import round_half_up

NMS_RADIUS = 3
VOTE_FLOOR_FRACTION = 0.3
MAX_SHIFTS = 5


class Orientation(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"

    @property
    def theta(self):
        return np.pi / 2 if self is Orientation.HORIZONTAL else 0.0


def hough_accumulator(mask, orientation):
    """Votes per rho bin for the single theta of ``orientation``."""
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    theta = orientation.theta
    rhos = np.rint(xs * np.cos(theta) + ys * np.sin(theta)).astype(np.int64)
    n_bins = mask.shape[0] if orientation is Orientation.HORIZONTAL else mask.shape[1]
    return np.bincount(rhos, minlength=n_bins)[:n_bins]


def _refine(accumulator, peak):
    """Mean-shift ``peak`` to the vote centroid of its +-3 px neighbourhood.

    A 1 px groove lights up rows on both sides of it, so the raw peak sits
    off-centre; the centroid lands back on the groove.
    """
    center = peak
    for _ in range(MAX_SHIFTS):
        lo = max(0, center - NMS_RADIUS)
        hi = min(len(accumulator), center + NMS_RADIUS + 1)
        votes = accumulator[lo:hi].astype(np.float64)
        shifted = round_half_up(float(np.dot(np.arange(lo, hi), votes) / votes.sum()))
        if shifted == center:
            break
        center = shifted
    return center


def hough_lines(mask, orientation, expected_count, vote_floor_fraction=VOTE_FLOOR_FRACTION):
    """Return ``expected_count`` line positions (rows or columns), ascending.

    Peaks are taken by descending vote count and must reach the vote floor (a
    fraction of a full-length line). Each accepted peak is refined to its
    local centroid, and anything within +-3 px of a refined line is
    suppressed. Raises FewerLinesThanExpected when too few lines qualify.
    """
    if expected_count < 1:
        raise ValueError("expected_count must be >= 1")

    accumulator = hough_accumulator(mask, orientation)
    full_length = mask.shape[1] if orientation is Orientation.HORIZONTAL else mask.shape[0]
    vote_floor = vote_floor_fraction * full_length

    # Stable sort: equal votes resolve to the lower rho.
    order = np.argsort(-accumulator, kind="stable")
    lines = []
    for rho in order:
        if accumulator[rho] < vote_floor:
            break
        if any(abs(int(rho) - p) <= NMS_RADIUS for p in lines):
            continue
        center = _refine(accumulator, int(rho))
        if any(abs(center - p) <= NMS_RADIUS for p in lines):
            continue
        lines.append(center)
        if len(lines) == expected_count:
            break

    if len(lines) < expected_count:
        raise FewerLinesThanExpected(
            f"found {len(lines)} {orientation.value} lines above {vote_floor:.1f} votes, "
            f"expected {expected_count}",
            found=len(lines),
            expected=expected_count,
        )

    positions = sorted(lines)
    logging.info("Hough %s lines: %s", orientation.value, positions)
    return positions

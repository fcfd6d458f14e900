import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from depth.depth_map import DepthState

CAP_PERCENTILE = 95


@dataclass(frozen=True)
class EdgeMap:
    magnitude: np.ndarray
    mask: np.ndarray
    threshold: float


def edge_map(depth_map, sigma_factor=2.0, cap_percentile=CAP_PERCENTILE):
    """Sobel gradient magnitude and a binary mask of its strong responses.

    The mask threshold adapts to the scan: mean + ``sigma_factor`` * std of
    the magnitude, with the statistics taken over magnitudes capped at their
    ``cap_percentile``-th percentile so a few steep defect walls cannot lift
    the threshold above the groove response. A flat scan has zero spread and
    yields an empty mask.
    """
    if depth_map.state is not DepthState.NORMALIZED:
        raise ValueError("edge_map expects a normalized depth map")

    pixels = depth_map.pixels
    gy = ndimage.sobel(pixels, axis=0, mode="nearest")
    gx = ndimage.sobel(pixels, axis=1, mode="nearest")
    magnitude = np.hypot(gx, gy)

    capped = np.minimum(magnitude, np.percentile(magnitude, cap_percentile))
    threshold = float(capped.mean() + sigma_factor * capped.std())
    mask = magnitude > threshold
    logging.info("Edge map: threshold %.4f, %d edge pixels.", threshold, int(mask.sum()))
    return EdgeMap(magnitude, mask, threshold)

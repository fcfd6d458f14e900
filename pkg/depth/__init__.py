from depth.depth_map import (
    DepthMap,
    DepthState,
    NormalizationResult,
    median_filter_3x3,
    min_max_normalize,
    preprocess,
)
from depth.pgm import load_pgm, save_pgm

__all__ = [
    "DepthMap",
    "DepthState",
    "NormalizationResult",
    "median_filter_3x3",
    "min_max_normalize",
    "preprocess",
    "load_pgm",
    "save_pgm",
]

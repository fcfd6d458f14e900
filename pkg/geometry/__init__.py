from geometry.edges import EdgeMap, edge_map
from geometry.hough import Orientation, hough_accumulator, hough_lines
from geometry.tow_layout import Centerline, TowLayout, detect_layout, estimate_centerlines

__all__ = [
    "EdgeMap",
    "edge_map",
    "Orientation",
    "hough_accumulator",
    "hough_lines",
    "Centerline",
    "TowLayout",
    "detect_layout",
    "estimate_centerlines",
]

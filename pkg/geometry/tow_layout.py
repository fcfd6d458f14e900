import logging
from dataclasses import dataclass, field

from geometry.edges import edge_map
from geometry.hough import Orientation, hough_lines
from utils.errors import DegenerateLayout, TooFewEdges


@dataclass(frozen=True)
class Centerline:
    row: int
    x_start: int
    x_end: int
    tow_index: int

    def __post_init__(self):
        if self.x_start >= self.x_end:
            raise ValueError(f"centerline {self.tow_index}: x_start {self.x_start} >= x_end {self.x_end}")

    def to_dict(self):
        return {"row": self.row, "x_start": self.x_start, "x_end": self.x_end, "tow_index": self.tow_index}


@dataclass(frozen=True)
class TowLayout:
    """Tow boundaries (rows), layup extent (columns) and one centerline per tow.

    ``image_shape`` is optional; when present the row/column invariants are
    checked against it and box clipping can use it.
    """

    horizontal_edges: tuple
    vertical_bounds: tuple
    centerlines: tuple = field(default_factory=tuple)
    image_shape: tuple = None

    def __post_init__(self):
        edges = tuple(int(e) for e in self.horizontal_edges)
        left, right = (int(b) for b in self.vertical_bounds)
        object.__setattr__(self, "horizontal_edges", edges)
        object.__setattr__(self, "vertical_bounds", (left, right))
        object.__setattr__(self, "centerlines", tuple(self.centerlines))
        if self.image_shape is not None:
            object.__setattr__(self, "image_shape", tuple(int(s) for s in self.image_shape))

        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"horizontal edges must be strictly increasing: {edges}")
        if left >= right:
            raise ValueError(f"vertical bounds must satisfy left < right: {(left, right)}")
        if self.centerlines and len(self.centerlines) != len(edges) - 1:
            raise ValueError(f"{len(self.centerlines)} centerlines for {len(edges)} edges")
        for line, top, bottom in zip(self.centerlines, edges, edges[1:]):
            if not top < line.row < bottom:
                raise ValueError(f"centerline row {line.row} not strictly between edges {top} and {bottom}")
        if self.image_shape is not None:
            height, width = self.image_shape
            if edges and (edges[0] < 0 or edges[-1] >= height):
                raise ValueError(f"horizontal edges {edges} outside [0, {height})")
            if left < 0 or right >= width:
                raise ValueError(f"vertical bounds {(left, right)} outside [0, {width})")

    @property
    def tow_count(self):
        return len(self.centerlines)

    def centerline(self, tow_index):
        for line in self.centerlines:
            if line.tow_index == tow_index:
                return line
        return None

    def to_dict(self):
        data = {
            "horizontal_edges": list(self.horizontal_edges),
            "vertical_bounds": list(self.vertical_bounds),
            "centerlines": [c.to_dict() for c in self.centerlines],
        }
        if self.image_shape is not None:
            data["image_shape"] = list(self.image_shape)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            horizontal_edges=tuple(data["horizontal_edges"]),
            vertical_bounds=tuple(data["vertical_bounds"]),
            centerlines=tuple(Centerline(**c) for c in data.get("centerlines", [])),
            image_shape=tuple(data["image_shape"]) if data.get("image_shape") else None,
        )


def estimate_centerlines(horizontal_edges, vertical_bounds, image_shape=None):
    """One centerline per pair of consecutive edges, at their mean row (ties round up)."""
    edges = sorted(int(e) for e in horizontal_edges)
    if len(edges) < 2:
        raise TooFewEdges(f"need at least 2 horizontal edges, got {len(edges)}")

    left, right = (int(b) for b in vertical_bounds)
    narrow = [(a, b) for a, b in zip(edges, edges[1:]) if b - a < 2]
    if narrow:
        raise DegenerateLayout(f"no row strictly between edges {narrow[0]}; cannot place a centerline")
    if left >= right:
        raise DegenerateLayout(f"vertical bounds must satisfy left < right: {(left, right)}")
    centerlines = tuple(
        # (a + b + 1) // 2 is round-half-up of (a + b) / 2 for integers
        Centerline(row=(top + bottom + 1) // 2, x_start=left, x_end=right, tow_index=k)
        for k, (top, bottom) in enumerate(zip(edges, edges[1:]))
    )
    return TowLayout(tuple(edges), (left, right), centerlines, image_shape)


def detect_layout(depth_map, tow_count):
    """Full tow-geometry stage: Sobel edges, Hough lines, centerlines."""
    edges = edge_map(depth_map)
    rows = hough_lines(edges.mask, Orientation.HORIZONTAL, tow_count + 1)
    columns = hough_lines(edges.mask, Orientation.VERTICAL, 2)
    layout = estimate_centerlines(rows, (columns[0], columns[-1]), depth_map.shape)
    logging.info("Detected %d tows, bounds %s.", layout.tow_count, layout.vertical_bounds)
    return layout

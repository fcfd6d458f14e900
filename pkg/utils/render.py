"""PPM (P6) figures for inspecting each stage.

Colour conventions:
  * depth maps are drawn in grayscale, 0 -> black, 1 -> white;
  * anomaly scores, normalized by the map's own min/max to s in [0, 1], are
    drawn as (red, green, blue) = (255 s, 0, 255 (1 - s));
  * predicted boxes are red, ground truth green, centerlines red, Hough edges blue.
"""

import logging
from pathlib import Path

import numpy as np

RED = (255, 0, 0)
GREEN = (0, 255, 0)
BLUE = (0, 0, 255)
YELLOW = (255, 255, 0)
BLACK = (0, 0, 0)
WHITE = (255, 255, 255)


def write_ppm(path, rgb):
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {rgb.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = rgb.shape[:2]
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    path.write_bytes(header + np.clip(rgb, 0, 255).astype(np.uint8).tobytes())
    logging.info("Wrote %s (%dx%d).", path, width, height)
    return path


def read_ppm(path):
    data = Path(path).read_bytes()
    magic, dims, maxval, payload = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit P6 file")
    width, height = (int(v) for v in dims.split())
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)


def gray_canvas(depth_map):
    pixels = depth_map.pixels
    lo, hi = float(pixels.min()), float(pixels.max())
    scaled = (pixels - lo) / (hi - lo) if hi > lo else np.zeros_like(pixels)
    gray = np.floor(scaled * 255 + 0.5).astype(np.uint8)
    return np.repeat(gray[:, :, np.newaxis], 3, axis=2)


def score_color(score):
    s = float(np.clip(score, 0.0, 1.0))
    return int(round(255 * s)), 0, int(round(255 * (1 - s)))


def draw_rect(canvas, x, y, w, h, color):
    """Outline of the half-open box [x, x + w) x [y, y + h), clipped."""
    height, width = canvas.shape[:2]
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(width, x + w) - 1, min(height, y + h) - 1
    if x1 < x0 or y1 < y0:
        return canvas
    canvas[y0, x0:x1 + 1] = color
    canvas[y1, x0:x1 + 1] = color
    canvas[y0:y1 + 1, x0] = color
    canvas[y0:y1 + 1, x1] = color
    return canvas


def draw_dot(canvas, x, y, color, radius=1):
    height, width = canvas.shape[:2]
    canvas[max(0, y - radius):min(height, y + radius + 1), max(0, x - radius):min(width, x + radius + 1)] = color
    return canvas


def draw_polyline(canvas, xs, ys, color):
    height, width = canvas.shape[:2]
    for (xa, ya), (xb, yb) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        steps = int(max(abs(xb - xa), abs(yb - ya))) + 1
        px = np.rint(np.linspace(xa, xb, steps)).astype(int)
        py = np.rint(np.linspace(ya, yb, steps)).astype(int)
        keep = (px >= 0) & (px < width) & (py >= 0) & (py < height)
        canvas[py[keep], px[keep]] = color
    return canvas


def render_layout(depth_map, layout, edge_mask=None):
    logging.info("Rendering layout overlay, %d tows.", layout.tow_count)
    canvas = gray_canvas(depth_map)
    if edge_mask is not None:
        canvas[np.asarray(edge_mask, dtype=bool)] = YELLOW
    left, right = layout.vertical_bounds
    for row in layout.horizontal_edges:
        canvas[row, left:right] = BLUE
    canvas[:, left] = BLUE
    canvas[:, min(right, canvas.shape[1] - 1)] = BLUE
    for line in layout.centerlines:
        canvas[line.row, line.x_start:line.x_end] = RED
    logging.info("Layout overlay rendered.")
    return canvas


def render_windows(depth_map, sample_set):
    """Window centres as dots plus a non-overlapping tiling of footprints."""
    logging.info("Rendering window grid, total windows: %d", len(sample_set))
    canvas = gray_canvas(depth_map)
    tile_every = max(1, sample_set.window // sample_set.stride)
    per_tow = {}
    for sample in sample_set:
        position = per_tow.get(sample.tow_index, 0)
        per_tow[sample.tow_index] = position + 1
        if position % tile_every == 0:
            x0, y0, x1, y1 = sample.footprint()
            draw_rect(canvas, x0, y0, x1 - x0, y1 - y0, GREEN)
        draw_dot(canvas, sample.center_x, sample.center_y, RED, radius=0)
    logging.info("Window grid rendered.")
    return canvas


def render_anomaly(depth_map, anomaly_map):
    logging.info("Rendering anomaly overlay, total tows: %d", len(anomaly_map.tows))
    canvas = gray_canvas(depth_map)
    normalized = anomaly_map.normalized_scores()
    for tow in anomaly_map.tows:
        signal = anomaly_map.signal(tow)
        for x, y, s in zip(signal.center_x, signal.center_y, normalized[tow]):
            draw_dot(canvas, int(x), int(y), score_color(s))
    logging.info("Anomaly overlay rendered.")
    return canvas


def render_signal(scores, blob_indices=(), x_scale=4, height=128, margin=8):
    """Line plot of one tow's score signal with blob centres (sample indices) marked in red."""
    scores = np.asarray(scores, dtype=np.float64)
    logging.info("Rendering signal plot, %d samples, %d blobs.", len(scores), len(blob_indices))
    width = max(1, (len(scores) - 1) * x_scale) + 2 * margin
    canvas = np.full((height, width, 3), 255, dtype=np.uint8)
    if len(scores) == 0:
        return canvas
    lo, hi = float(scores.min()), float(scores.max())
    unit = (scores - lo) / (hi - lo) if hi > lo else np.zeros_like(scores)
    xs = margin + np.arange(len(scores)) * x_scale
    ys = (height - 1 - margin) - unit * (height - 1 - 2 * margin)
    for index in blob_indices:
        if 0 <= index < len(scores):
            canvas[:, margin + int(index) * x_scale] = RED
    draw_polyline(canvas, xs, ys, BLACK)
    logging.info("Signal plot rendered.")
    return canvas


def render_boxes(depth_map, predicted, truth=()):
    logging.info("Rendering boxes: %d predicted, %d ground truth.", len(predicted), len(truth))
    canvas = gray_canvas(depth_map)
    for box in truth:
        draw_rect(canvas, box.x, box.y, box.w, box.h, GREEN)
    for box in predicted:
        draw_rect(canvas, box.x, box.y, box.w, box.h, RED)
    logging.info("Boxes rendered.")
    return canvas

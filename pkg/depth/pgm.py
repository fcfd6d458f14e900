"""Binary PGM (P5) reader/writer.

Writes 16-bit big-endian samples (maxval 65535) and never emits comments.
Reads maxval 255 or 65535 and tolerates ``#`` comments anywhere in the header.
"""

import logging
from pathlib import Path

import numpy as np

from depth.depth_map import DepthMap, DepthState
from utils.errors import PgmDimensionError, PgmFormatError, PgmMagicError, PgmTruncatedError

MAXVAL_16 = 65535
_WHITESPACE = b" \t\r\n\v\f"


def _read_header(data, path):
    """Return (width, height, maxval, payload_offset)."""
    if data[:2] != b"P5":
        raise PgmMagicError(f"{path}: expected magic 'P5', found {data[:2]!r}")
    if len(data) < 3 or (data[2] not in _WHITESPACE and data[2:3] != b"#"):
        raise PgmMagicError(f"{path}: magic number not followed by whitespace")

    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos] in _WHITESPACE:
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PgmTruncatedError(f"{path}: header ends after {len(tokens)} of 3 fields")
        tokens.append(data[start:pos])

    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmDimensionError(f"{path}: non-numeric header fields {tokens!r}") from None
    if width < 1 or height < 1:
        raise PgmDimensionError(f"{path}: invalid dimensions {width}x{height}")
    if maxval not in (255, MAXVAL_16):
        raise PgmFormatError(f"{path}: unsupported maxval {maxval} (expected 255 or 65535)")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PgmTruncatedError(f"{path}: missing separator before payload")
    return width, height, maxval, pos + 1


def load_pgm(path, state=DepthState.RAW):
    """Load a P5 file; pixels come back as samples / maxval in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    width, height, maxval, offset = _read_header(data, path)

    sample_bytes = 1 if maxval == 255 else 2
    expected = width * height * sample_bytes
    payload = data[offset:]
    if len(payload) < expected:
        raise PgmTruncatedError(
            f"{path}: header claims {width}x{height} but payload holds "
            f"{len(payload) // sample_bytes} samples"
        )
    if len(payload) > expected:
        raise PgmDimensionError(
            f"{path}: payload holds {len(payload) // sample_bytes} samples, "
            f"header claims {width}x{height}"
        )

    dtype = np.uint8 if sample_bytes == 1 else np.dtype(">u2")
    samples = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    logging.info("Loaded %s (%dx%d, maxval %d).", path, width, height, maxval)
    return DepthMap(samples.astype(np.float64) / maxval, state)


def save_pgm(depth_map, path):
    """Write a 16-bit P5 file.

    Normalized maps are scaled by 65535. Raw maps go through the same min-max
    stretch first, so their absolute units are not preserved; everything
    downstream re-normalizes anyway.
    """
    path = Path(path)
    pixels = depth_map.pixels
    if depth_map.state is DepthState.RAW:
        lo, hi = float(pixels.min()), float(pixels.max())
        pixels = (pixels - lo) / (hi - lo) if hi > lo else np.zeros_like(pixels)

    samples = np.floor(np.clip(pixels, 0.0, 1.0) * MAXVAL_16 + 0.5).astype(">u2")
    header = f"P5\n{depth_map.width} {depth_map.height}\n{MAXVAL_16}\n".encode("ascii")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + samples.tobytes())
    logging.info("Saved %s (%dx%d, %s).", path, depth_map.width, depth_map.height, depth_map.state.value)
    return path

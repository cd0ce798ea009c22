"""Minimal binary PGM (P5, maxval 255) reader/writer.

Heatmaps are stored as ``round(255 * value)`` of maps normalized to [0, 1];
label masks store the class index directly in the pixel value.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {pixels.shape}")
    if pixels.dtype != np.uint8:
        if pixels.min() < 0 or pixels.max() > 255:
            raise ValueError("pixel values must fit in [0, 255]")
        pixels = pixels.astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":  # comment line
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (P5) file: magic {tokens[0]!r}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"only maxval 255 is supported, got {maxval}")
    expected = w * h
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ValueError(f"PGM raster truncated: {len(raster)} of {expected} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def heatmap_to_pixels(m: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] map into 8-bit grayscale."""
    m = np.asarray(m, dtype=np.float64)
    if m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("heatmap values must lie in [0, 1]")
    return np.rint(m * 255.0).astype(np.uint8)


def pixels_to_map(pixels: np.ndarray) -> np.ndarray:
    return (pixels.astype(np.float32) / 255.0).astype(np.float32)

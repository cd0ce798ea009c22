"""Synthetic single-shape images with exact ground-truth masks.

Each 32x32 sample holds one bright shape (square, disk or cross) on a dim
noise background. Labels are image-level class indices; the pixel-exact
mask (foreground value = label + 1, background 0) exists only to *evaluate*
segmentation, never to train.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IMAGE_SIZE = 32
CLASS_NAMES = ("square", "disk", "cross")
NUM_CLASSES = len(CLASS_NAMES)

_BACKGROUND_AMPLITUDE = 0.1
_FOREGROUND_RANGE = (0.8, 1.0)


@dataclass
class ShapesSample:
    image: np.ndarray  # (1, 32, 32) float32 in [0, 1]
    label: int  # 0 square, 1 disk, 2 cross
    gt_mask: np.ndarray  # (32, 32) int, foreground = label + 1


def _square_mask(rng: np.random.Generator) -> np.ndarray:
    side = int(rng.integers(6, 15))
    y0 = int(rng.integers(0, IMAGE_SIZE - side + 1))
    x0 = int(rng.integers(0, IMAGE_SIZE - side + 1))
    mask = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=bool)
    mask[y0 : y0 + side, x0 : x0 + side] = True
    return mask


def _disk_mask(rng: np.random.Generator) -> np.ndarray:
    radius = int(rng.integers(3, 9))
    cy = int(rng.integers(radius, IMAGE_SIZE - radius))
    cx = int(rng.integers(radius, IMAGE_SIZE - radius))
    yy, xx = np.ogrid[:IMAGE_SIZE, :IMAGE_SIZE]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def _cross_mask(rng: np.random.Generator) -> np.ndarray:
    arm = int(rng.integers(4, 10))
    thickness = int(rng.integers(2, 4))
    cy = int(rng.integers(arm, IMAGE_SIZE - arm))
    cx = int(rng.integers(arm, IMAGE_SIZE - arm))
    half = thickness // 2
    mask = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=bool)
    mask[cy - half : cy - half + thickness, cx - arm : cx + arm + 1] = True
    mask[cy - arm : cy + arm + 1, cx - half : cx - half + thickness] = True
    return mask


_SHAPE_MAKERS = (_square_mask, _disk_mask, _cross_mask)


def generate_shapes(n: int, seed: int = 0) -> list[ShapesSample]:
    """Generate ``n`` reproducible samples; identical seeds give identical data."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        label = int(rng.integers(0, NUM_CLASSES))
        image = rng.uniform(0.0, _BACKGROUND_AMPLITUDE, size=(IMAGE_SIZE, IMAGE_SIZE))
        mask = _SHAPE_MAKERS[label](rng)
        lo, hi = _FOREGROUND_RANGE
        image[mask] = rng.uniform(lo, hi, size=int(mask.sum()))
        samples.append(
            ShapesSample(
                image=image[None].astype(np.float32),
                label=label,
                gt_mask=mask.astype(np.int64) * (label + 1),
            )
        )
    return samples

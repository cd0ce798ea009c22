"""Synthetic RGB scenes for the bundled smoke model and sample images.

Each 64x64 scene holds one colored object (disk, square or triangle) on a
dim noise background. These exist so the adapter ships with a model that
was actually trained before capture, without any network downloads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIZE = 64
CLASS_NAMES = ("disk", "square", "triangle")
# dominant color per class, modulated per sample
_BASE_COLORS = ((1.0, 0.35, 0.3), (0.3, 1.0, 0.35), (0.35, 0.4, 1.0))


@dataclass
class Scene:
    image: np.ndarray  # (3, 64, 64) float32 in [0, 1]
    label: int
    box: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive), object bounds + pad


def _object_mask(rng: np.random.Generator, label: int) -> np.ndarray:
    yy, xx = np.mgrid[:SIZE, :SIZE]
    if label == 0:  # disk
        r = int(rng.integers(8, 15))
        cy = int(rng.integers(r + 2, SIZE - r - 2))
        cx = int(rng.integers(r + 2, SIZE - r - 2))
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
    if label == 1:  # square
        side = int(rng.integers(14, 26))
        y0 = int(rng.integers(2, SIZE - side - 2))
        x0 = int(rng.integers(2, SIZE - side - 2))
        mask = np.zeros((SIZE, SIZE), dtype=bool)
        mask[y0 : y0 + side, x0 : x0 + side] = True
        return mask
    # triangle: filled, apex up
    half = int(rng.integers(9, 15))
    height = int(rng.integers(14, 24))
    cx = int(rng.integers(half + 2, SIZE - half - 2))
    y0 = int(rng.integers(2, SIZE - height - 2))
    rel_y = (yy - y0) / height
    width_at = half * np.clip(rel_y, 0.0, 1.0)
    return (rel_y >= 0) & (rel_y <= 1) & (np.abs(xx - cx) <= width_at)


def make_scene(rng: np.random.Generator, label: int | None = None) -> Scene:
    if label is None:
        label = int(rng.integers(0, len(CLASS_NAMES)))
    image = rng.uniform(0.0, 0.3, size=(3, SIZE, SIZE)).astype(np.float32)
    mask = _object_mask(rng, label)
    color = np.array(_BASE_COLORS[label], dtype=np.float32)
    color = np.clip(color * rng.uniform(0.75, 1.0), 0.0, 1.0)
    texture = rng.uniform(0.85, 1.0, size=int(mask.sum())).astype(np.float32)
    for ch in range(3):
        image[ch][mask] = color[ch] * texture
    ys, xs = np.nonzero(mask)
    pad = 2
    box = (
        max(int(xs.min()) - pad, 0),
        max(int(ys.min()) - pad, 0),
        min(int(xs.max()) + 1 + pad, SIZE),
        min(int(ys.max()) + 1 + pad, SIZE),
    )
    return Scene(image=image, label=label, box=box)


def make_dataset(n: int, seed: int) -> list[Scene]:
    rng = np.random.default_rng(seed)
    return [make_scene(rng) for _ in range(n)]

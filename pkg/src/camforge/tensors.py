"""Dense map and tensor arithmetic shared by the saliency methods.

Conventions used everywhere in this package:

* a *tensor* is a ``float32`` ndarray of shape ``(C, H, W)`` (channel-major),
* a *map* is a ``float32`` ndarray of shape ``(H, W)``,
* reductions (sums, means) accumulate in float64 and results are stored
  back as float32, so outputs do not depend on vectorization order.
"""

from __future__ import annotations

import numpy as np

from .validation import check_finite, check_map, check_tensor3


def bilinear_resize(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample a 2-D map to ``(out_h, out_w)`` with bilinear interpolation.

    Sampling uses half-pixel centers: the source coordinate for output
    index ``d`` is ``(d + 0.5) * (in_size / out_size) - 0.5``, clamped to
    the valid range, so constant maps are preserved exactly and output
    values stay inside the input's [min, max].
    """
    m = check_map(m, "map")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got ({out_h}, {out_w})")
    in_h, in_w = m.shape
    if (out_h, out_w) == (in_h, in_w):
        return m.copy()

    src = m.astype(np.float64)
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bot * fy
    return out.astype(np.float32)


def minmax_normalize(m: np.ndarray) -> np.ndarray:
    """Affinely rescale a map to [0, 1]; a constant map becomes all zeros."""
    m = check_map(m, "map")
    check_finite(m, "map")
    lo = float(m.min())
    hi = float(m.max())
    if hi == lo:
        return np.zeros_like(m)
    out = (m.astype(np.float64) - lo) / (hi - lo)
    return out.astype(np.float32)


def percentile_positive(values: np.ndarray, delta: float) -> float | None:
    """Linear-interpolated ``delta``-th percentile of the strictly positive entries.

    Returns None when no entry is positive. ``delta=0`` yields the smallest
    positive value, ``delta=100`` the largest.
    """
    if not 0.0 <= delta <= 100.0:
        raise ValueError(f"delta must be in [0, 100], got {delta}")
    values = np.asarray(values)
    positives = values[values > 0]
    if positives.size == 0:
        return None
    return float(np.percentile(positives.astype(np.float64), delta))


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of two equal-shaped arrays."""
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def channel_sum(t: np.ndarray) -> np.ndarray:
    """Sum a (C, H, W) tensor over its channel axis into an (H, W) map."""
    t = check_tensor3(t, "tensor")
    return t.sum(axis=0, dtype=np.float64).astype(np.float32)

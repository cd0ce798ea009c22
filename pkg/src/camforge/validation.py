"""Input validation helpers for array arguments."""

from __future__ import annotations

import numpy as np


def check_map(m, name: str = "map") -> np.ndarray:
    """Coerce to a nonempty float32 (H, W) array."""
    m = np.asarray(m, dtype=np.float32)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} must be nonempty")
    return m


def check_tensor3(t, name: str = "tensor") -> np.ndarray:
    """Coerce to a nonempty float32 (C, H, W) array."""
    t = np.asarray(t, dtype=np.float32)
    if t.ndim != 3:
        raise ValueError(f"{name} must be 3-D (C, H, W), got shape {t.shape}")
    if t.size == 0:
        raise ValueError(f"{name} must be nonempty")
    return t


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return a


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} must share a shape: {a.shape} vs {b.shape}")


def check_label_mask(labels, num_classes: int, name: str = "mask") -> np.ndarray:
    """Coerce to an integer (H, W) label image with values in [0, num_classes]."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D label image")
    labels = labels.astype(np.int64)
    if labels.min() < 0 or labels.max() > num_classes:
        raise ValueError(
            f"{name} labels must lie in [0, {num_classes}], "
            f"got range [{labels.min()}, {labels.max()}]"
        )
    return labels

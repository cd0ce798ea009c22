"""Saliency methods over captured activations and gradients.

Six methods share three building blocks:

* channel-mean gradient weighting (``grad_cam_layer``),
* per-location positive-gradient weighting (``layer_cam_layer``),
* bias-times-bias-gradient aggregation (``fullgrad``).

The ``lt_`` variants add two orthogonal tricks: per-channel *truncation* of
gradients below the delta-th percentile of their positive entries, and
*fusion* of per-layer maps by bilinear upscaling and summation, which buys
spatial resolution from shallow layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capture import CaptureFile, LayerRecord
from .errors import UnsupportedMethodError
from .tensors import (
    bilinear_resize,
    channel_sum,
    hadamard,
    minmax_normalize,
    percentile_positive,
)
from .validation import check_same_shape, check_tensor3

METHODS = (
    "grad_cam",
    "layer_cam",
    "fullgrad",
    "lt_grad_cam",
    "lt_layer_cam",
    "lt_fullgrad",
)

FULLGRAD_METHODS = ("fullgrad", "lt_fullgrad")


@dataclass(frozen=True)
class SaliencyRequest:
    """What to compute: method, layer subset, truncation percentile, output size."""

    method: str
    layer_names: tuple[str, ...]
    delta: float = 0.0
    output_size: tuple[int, int] | None = None  # None: native input size

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not self.layer_names:
            raise ValueError("layer_names must be nonempty")
        if not 0.0 <= self.delta <= 100.0:
            raise ValueError(f"delta must be in [0, 100], got {self.delta}")


def grad_cam_layer(A: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Weight each channel by its spatial mean gradient, combine, clip negatives.

    The weight denominator is the full spatial extent H*W, also when G has
    been truncated: zeroed entries still count toward the mean.
    """
    A = check_tensor3(A, "A")
    G = check_tensor3(G, "G")
    check_same_shape(A, G, "activation and gradient")
    weights = G.mean(axis=(1, 2), dtype=np.float64)  # (C,)
    combined = np.tensordot(weights, A.astype(np.float64), axes=(0, 0))
    return np.maximum(combined, 0.0).astype(np.float32)


def layer_cam_layer(A: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Weight each activation element by its own positive gradient, then
    sum over channels and clip negatives."""
    A = check_tensor3(A, "A")
    G = check_tensor3(G, "G")
    check_same_shape(A, G, "activation and gradient")
    weighted = np.maximum(G, 0.0).astype(np.float64) * A.astype(np.float64)
    combined = weighted.sum(axis=0)
    return np.maximum(combined, 0.0).astype(np.float32)


def truncation_mask(G: np.ndarray, delta: float) -> np.ndarray:
    """Binary keep-mask per channel: 1 where the gradient reaches the
    delta-th percentile of that channel's positive values.

    At ``delta=0`` the mask keeps exactly the strictly positive entries;
    channels without positive entries are zeroed entirely.
    """
    G = check_tensor3(G, "G")
    if not 0.0 <= delta <= 100.0:
        raise ValueError(f"delta must be in [0, 100], got {delta}")
    mask = np.zeros_like(G, dtype=np.float32)
    for k in range(G.shape[0]):
        t = percentile_positive(G[k].ravel(), delta)
        if t is not None:
            mask[k] = (G[k] >= np.float32(t)).astype(np.float32)
    return mask


def fuse_layers(maps: list[np.ndarray], output_size: tuple[int, int]) -> np.ndarray:
    """Bilinearly resize each map to ``output_size`` and sum them."""
    if not maps:
        raise ValueError("maps must be nonempty")
    out_h, out_w = output_size
    total = np.zeros((out_h, out_w), dtype=np.float64)
    for m in maps:
        total += bilinear_resize(m, out_h, out_w).astype(np.float64)
    return total.astype(np.float32)


def _select_layers(capture: CaptureFile, layer_names) -> list[LayerRecord]:
    return [capture.layer(name) for name in layer_names]


def _native_size(capture: CaptureFile) -> tuple[int, int]:
    return capture.input.shape[1], capture.input.shape[2]


def _psi(z: np.ndarray, output_size: tuple[int, int]) -> np.ndarray:
    """Post-process a raw saliency term: |z|, rescale to [0,1], upscale."""
    return bilinear_resize(minmax_normalize(np.abs(z)), output_size[0], output_size[1])


def _fullgrad_core(
    capture: CaptureFile,
    records: list[LayerRecord],
    output_size: tuple[int, int],
    delta: float | None,
) -> np.ndarray:
    if capture.input_gradient is None:
        raise UnsupportedMethodError(
            f"capture {capture.image_id!r} has no input gradient"
        )
    for rec in records:
        if rec.bias is None:
            raise UnsupportedMethodError(
                f"layer {rec.name!r} carries no bias/bias_gradient"
            )

    input_grad = capture.input_gradient
    if delta is not None:
        input_grad = hadamard(input_grad, truncation_mask(input_grad, delta))
    total = _psi(channel_sum(hadamard(input_grad, capture.input)), output_size).astype(
        np.float64
    )
    for rec in records:
        bias_grad = rec.bias_gradient
        if delta is not None:
            bias_grad = hadamard(bias_grad, truncation_mask(bias_grad, delta))
        for k in range(bias_grad.shape[0]):
            term = bias_grad[k] * rec.bias[k]
            total += _psi(term, output_size).astype(np.float64)
    return total.astype(np.float32)


def fullgrad(
    capture: CaptureFile,
    output_size: tuple[int, int] | None = None,
    layer_names=None,
) -> np.ndarray:
    """Sum of the input-times-input-gradient term and one post-processed
    bias-times-bias-gradient term per channel per layer."""
    size = output_size or _native_size(capture)
    records = capture.layers if layer_names is None else _select_layers(capture, layer_names)
    return _fullgrad_core(capture, records, size, delta=None)


def lt_fullgrad(
    capture: CaptureFile,
    delta: float,
    output_size: tuple[int, int] | None = None,
    layer_names=None,
) -> np.ndarray:
    """``fullgrad`` with every gradient tensor truncation-masked first."""
    size = output_size or _native_size(capture)
    records = capture.layers if layer_names is None else _select_layers(capture, layer_names)
    return _fullgrad_core(capture, records, size, delta=delta)


def lt_grad_cam(
    capture: CaptureFile,
    layer_names,
    delta: float,
    output_size: tuple[int, int] | None = None,
) -> np.ndarray:
    """Channel-mean weighting on truncated gradients, fused across layers."""
    size = output_size or _native_size(capture)
    maps = []
    for rec in _select_layers(capture, layer_names):
        masked = hadamard(rec.gradient, truncation_mask(rec.gradient, delta))
        maps.append(grad_cam_layer(rec.activation, masked))
    return fuse_layers(maps, size)


def lt_layer_cam(
    capture: CaptureFile,
    layer_names,
    delta: float,
    output_size: tuple[int, int] | None = None,
) -> np.ndarray:
    """Per-location weighting on truncated gradients, fused across layers.

    At ``delta=0`` this coincides bit-for-bit with the untruncated fused
    variant: the mask keeps exactly the positive entries, which is what the
    per-location ReLU weighting keeps anyway.
    """
    size = output_size or _native_size(capture)
    maps = []
    for rec in _select_layers(capture, layer_names):
        masked = hadamard(rec.gradient, truncation_mask(rec.gradient, delta))
        maps.append(layer_cam_layer(rec.activation, masked))
    return fuse_layers(maps, size)


def compute_saliency(capture: CaptureFile, req: SaliencyRequest) -> np.ndarray:
    """Dispatch a request and min-max normalize the result to [0, 1]."""
    size = req.output_size or _native_size(capture)
    missing = [n for n in req.layer_names if n not in capture.layer_names]
    if missing:
        raise ValueError(
            f"capture {capture.image_id!r} lacks layers {missing} "
            f"(has {capture.layer_names})"
        )
    if req.method == "grad_cam":
        maps = [
            grad_cam_layer(rec.activation, rec.gradient)
            for rec in _select_layers(capture, req.layer_names)
        ]
        raw = fuse_layers(maps, size)
    elif req.method == "layer_cam":
        maps = [
            layer_cam_layer(rec.activation, rec.gradient)
            for rec in _select_layers(capture, req.layer_names)
        ]
        raw = fuse_layers(maps, size)
    elif req.method == "fullgrad":
        raw = fullgrad(capture, size, req.layer_names)
    elif req.method == "lt_grad_cam":
        raw = lt_grad_cam(capture, req.layer_names, req.delta, size)
    elif req.method == "lt_layer_cam":
        raw = lt_layer_cam(capture, req.layer_names, req.delta, size)
    elif req.method == "lt_fullgrad":
        raw = lt_fullgrad(capture, req.delta, size, req.layer_names)
    else:  # pragma: no cover - blocked by SaliencyRequest validation
        raise UnsupportedMethodError(f"unknown method {req.method!r}")
    return minmax_normalize(raw)


def survival_fraction(capture: CaptureFile, req: SaliencyRequest) -> float:
    """Fraction of gradient entries the truncation mask keeps, pooled over
    every gradient tensor the method consumes."""
    if req.method in FULLGRAD_METHODS:
        tensors = [rec.bias_gradient for rec in _select_layers(capture, req.layer_names)]
        if any(t is None for t in tensors):
            raise UnsupportedMethodError("capture lacks bias gradients")
        if capture.input_gradient is None:
            raise UnsupportedMethodError("capture lacks an input gradient")
        tensors.append(capture.input_gradient)
    else:
        tensors = [rec.gradient for rec in _select_layers(capture, req.layer_names)]
    kept = 0
    total = 0
    for t in tensors:
        mask = truncation_mask(t, req.delta)
        kept += int(np.count_nonzero(mask))
        total += mask.size
    return kept / total

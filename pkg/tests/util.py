"""Shared test fixtures: synthetic capture construction."""

from __future__ import annotations

import numpy as np

from camforge.capture import CaptureFile, LayerRecord


def make_random_capture(
    rng: np.random.Generator,
    n_layers: int = 3,
    max_channels: int = 4,
    max_hw: int = 6,
    with_bias: bool = True,
    positive_gradients: bool = False,
) -> CaptureFile:
    """A capture with random activations/gradients, shallow layers larger."""
    layers = []
    base = int(rng.integers(3, max_hw + 1))
    for li in range(n_layers):
        c = int(rng.integers(1, max_channels + 1))
        hw = max(2, base - li)
        act = rng.normal(0.0, 1.0, (c, hw, hw))
        grad = rng.normal(0.0, 1.0, (c, hw, hw))
        if positive_gradients:
            grad = np.abs(grad) + 0.01
        bias = rng.normal(0.0, 1.0, c) if with_bias else None
        bias_grad = None
        if with_bias:
            bias_grad = rng.normal(0.0, 1.0, (c, hw, hw))
            if positive_gradients:
                bias_grad = np.abs(bias_grad) + 0.01
        layers.append(
            LayerRecord(
                name=f"s{li + 1}",
                depth_index=li,
                activation=act.astype(np.float32),
                gradient=grad.astype(np.float32),
                bias=None if bias is None else bias.astype(np.float32),
                bias_gradient=None if bias_grad is None else bias_grad.astype(np.float32),
            )
        )
    c_in = int(rng.integers(1, 3))
    hw = int(rng.integers(4, max_hw + 2))
    x = rng.uniform(0.0, 1.0, (c_in, hw, hw))
    x_grad = rng.normal(0.0, 1.0, (c_in, hw, hw))
    if positive_gradients:
        x_grad = np.abs(x_grad) + 0.01
    return CaptureFile(
        image_id=f"rand{int(rng.integers(0, 10_000))}",
        class_index=int(rng.integers(0, 5)),
        score=float(rng.normal()),
        input=x.astype(np.float32),
        layers=layers,
        input_gradient=x_grad.astype(np.float32),
    )


def scale_capture_gradients(cf: CaptureFile, lam: float) -> CaptureFile:
    """Copy of a capture with every gradient tensor scaled by ``lam``."""
    layers = [
        LayerRecord(
            name=rec.name,
            depth_index=rec.depth_index,
            activation=rec.activation.copy(),
            gradient=(rec.gradient * np.float32(lam)),
            bias=None if rec.bias is None else rec.bias.copy(),
            bias_gradient=None
            if rec.bias_gradient is None
            else (rec.bias_gradient * np.float32(lam)),
        )
        for rec in cf.layers
    ]
    return CaptureFile(
        image_id=cf.image_id,
        class_index=cf.class_index,
        score=cf.score,
        input=cf.input.copy(),
        layers=layers,
        input_gradient=None
        if cf.input_gradient is None
        else (cf.input_gradient * np.float32(lam)),
    )

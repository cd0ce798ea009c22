"""CAMCAP files: everything a saliency method needs, captured once.

A capture records, for one (image, target class) pair, the network input,
the class score, and per-layer activations, gradients, biases and spatial
bias-gradient maps. Bias gradients are stored as full (C, H, W) maps (the
gradient with respect to the pre-activation at every location); a
per-channel scalar would lose the spatial detail the bias-based saliency
method needs.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from . import container
from .errors import CaptureValidationError
from .validation import check_finite, check_tensor3

MAGIC = b"CAMCAP01"
VERSION = 1


@dataclass
class LayerRecord:
    """Activations and gradients captured at one named layer."""

    name: str
    depth_index: int
    activation: np.ndarray  # (C, H, W)
    gradient: np.ndarray  # (C, H, W), d(score)/d(activation)
    bias: np.ndarray | None = None  # (C,)
    bias_gradient: np.ndarray | None = None  # (C, H, W), d(score)/d(pre-activation)

    def __post_init__(self):
        self.activation = check_tensor3(self.activation, f"{self.name}.activation")
        self.gradient = check_tensor3(self.gradient, f"{self.name}.gradient")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float32).reshape(-1)
        if self.bias_gradient is not None:
            self.bias_gradient = check_tensor3(
                self.bias_gradient, f"{self.name}.bias_gradient"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.activation.shape

    def validate(self) -> None:
        if self.activation.shape != self.gradient.shape:
            raise CaptureValidationError(
                f"layer {self.name}: activation shape {self.activation.shape} "
                f"!= gradient shape {self.gradient.shape}"
            )
        if (self.bias is None) != (self.bias_gradient is None):
            raise CaptureValidationError(
                f"layer {self.name}: bias and bias_gradient must be present together"
            )
        if self.bias is not None:
            if self.bias.shape != (self.activation.shape[0],):
                raise CaptureValidationError(
                    f"layer {self.name}: bias length {self.bias.shape[0]} "
                    f"!= channel count {self.activation.shape[0]}"
                )
            if self.bias_gradient.shape != self.activation.shape:
                raise CaptureValidationError(
                    f"layer {self.name}: bias_gradient shape "
                    f"{self.bias_gradient.shape} != activation shape "
                    f"{self.activation.shape}"
                )
        for arr, what in (
            (self.activation, "activation"),
            (self.gradient, "gradient"),
            (self.bias, "bias"),
            (self.bias_gradient, "bias_gradient"),
        ):
            if arr is not None and not np.isfinite(arr).all():
                raise CaptureValidationError(
                    f"layer {self.name}: {what} contains NaN or Inf"
                )


@dataclass
class CaptureFile:
    """One serialized (image, target class) record."""

    image_id: str
    class_index: int
    score: float
    input: np.ndarray  # (C, H, W)
    layers: list[LayerRecord] = field(default_factory=list)
    input_gradient: np.ndarray | None = None  # (C, H, W)

    def __post_init__(self):
        self.input = check_tensor3(self.input, "input")
        if self.input_gradient is not None:
            self.input_gradient = check_tensor3(self.input_gradient, "input_gradient")

    def validate(self) -> None:
        if not self.layers:
            raise CaptureValidationError("capture must hold at least one layer")
        if self.class_index < 0:
            raise CaptureValidationError(f"class_index must be >= 0, got {self.class_index}")
        if not math.isfinite(self.score):
            raise CaptureValidationError("score must be finite")
        check_finite(self.input, "input")
        if self.input_gradient is not None:
            if self.input_gradient.shape != self.input.shape:
                raise CaptureValidationError(
                    f"input_gradient shape {self.input_gradient.shape} "
                    f"!= input shape {self.input.shape}"
                )
            check_finite(self.input_gradient, "input_gradient")
        depths = [rec.depth_index for rec in self.layers]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise CaptureValidationError(
                f"layer depth indices must strictly increase, got {depths}"
            )
        names = [rec.name for rec in self.layers]
        if len(set(names)) != len(names):
            raise CaptureValidationError(f"duplicate layer names in {names}")
        for rec in self.layers:
            rec.validate()

    @property
    def layer_names(self) -> list[str]:
        return [rec.name for rec in self.layers]

    def layer(self, name: str) -> LayerRecord:
        for rec in self.layers:
            if rec.name == name:
                return rec
        raise ValueError(f"no layer {name!r} in capture (have {self.layer_names})")


def _tensor_entry(a: np.ndarray, offset: int) -> tuple[dict, int]:
    return {"offset": offset, "shape": [int(s) for s in a.shape]}, offset + 4 * a.size


def write_capture(cf: CaptureFile, sink: BinaryIO) -> int:
    """Serialize a capture; returns the number of bytes written."""
    cf.validate()
    blobs: list[bytes] = []
    offset = 0

    def add(a: np.ndarray) -> dict:
        nonlocal offset
        entry, offset = _tensor_entry(a, offset)
        blobs.append(container.float_blob(a))
        return entry

    header: dict = {
        "version": VERSION,
        "image_id": cf.image_id,
        "class_index": int(cf.class_index),
        "score": float(cf.score),
        "input": add(cf.input),
        "input_gradient": None,
        "layers": [],
    }
    if cf.input_gradient is not None:
        header["input_gradient"] = add(cf.input_gradient)
    for rec in cf.layers:
        entry = {
            "name": rec.name,
            "depth_index": int(rec.depth_index),
            "activation": add(rec.activation),
            "gradient": add(rec.gradient),
            "bias": None,
            "bias_gradient": None,
        }
        if rec.bias is not None:
            bias_offset = offset
            blobs.append(container.float_blob(rec.bias))
            offset += 4 * rec.bias.size
            entry["bias"] = {"offset": bias_offset, "length": int(rec.bias.size)}
            entry["bias_gradient"] = add(rec.bias_gradient)
        header["layers"].append(entry)

    return container.write_container(sink, MAGIC, header, b"".join(blobs))


def _read_tensor(payload: bytes, entry, what: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        offset = int(entry["offset"])
    except (TypeError, KeyError, ValueError) as exc:
        raise CaptureValidationError(f"{what}: malformed descriptor {entry!r}") from exc
    if len(shape) != 3 or any(s < 1 for s in shape):
        raise CaptureValidationError(f"{what}: bad tensor shape {shape}")
    count = shape[0] * shape[1] * shape[2]
    return container.read_floats(payload, offset, count, what).reshape(shape)


def read_capture(source: BinaryIO) -> CaptureFile:
    """Parse and validate a capture written by :func:`write_capture`."""
    header, payload = container.read_container(source, MAGIC)
    try:
        image_id = str(header["image_id"])
        class_index = int(header["class_index"])
        score = float(header["score"])
        layer_entries = header["layers"]
        input_entry = header["input"]
        grad_entry = header.get("input_gradient")
    except (KeyError, TypeError, ValueError) as exc:
        raise CaptureValidationError(f"header missing or malformed field: {exc}") from exc
    if not isinstance(layer_entries, list) or not layer_entries:
        raise CaptureValidationError("header must declare at least one layer")

    x = _read_tensor(payload, input_entry, "input")
    x_grad = None
    if grad_entry is not None:
        x_grad = _read_tensor(payload, grad_entry, "input_gradient")

    layers = []
    for entry in layer_entries:
        try:
            name = str(entry["name"])
            depth = int(entry["depth_index"])
            act_entry = entry["activation"]
            grd_entry = entry["gradient"]
            bias_entry = entry.get("bias")
            bgrad_entry = entry.get("bias_gradient")
        except (KeyError, TypeError, ValueError) as exc:
            raise CaptureValidationError(f"malformed layer entry: {exc}") from exc
        activation = _read_tensor(payload, act_entry, f"{name}.activation")
        gradient = _read_tensor(payload, grd_entry, f"{name}.gradient")
        bias = None
        bias_gradient = None
        if (bias_entry is None) != (bgrad_entry is None):
            raise CaptureValidationError(
                f"layer {name}: bias and bias_gradient must be declared together"
            )
        if bias_entry is not None:
            try:
                length = int(bias_entry["length"])
                bias_offset = int(bias_entry["offset"])
            except (KeyError, TypeError, ValueError) as exc:
                raise CaptureValidationError(
                    f"{name}.bias: malformed descriptor {bias_entry!r}"
                ) from exc
            if length < 1:
                raise CaptureValidationError(f"{name}.bias: bad length {length}")
            bias = container.read_floats(payload, bias_offset, length, f"{name}.bias")
            bias_gradient = _read_tensor(payload, bgrad_entry, f"{name}.bias_gradient")
        layers.append(
            LayerRecord(
                name=name,
                depth_index=depth,
                activation=activation,
                gradient=gradient,
                bias=bias,
                bias_gradient=bias_gradient,
            )
        )

    cf = CaptureFile(
        image_id=image_id,
        class_index=class_index,
        score=score,
        input=x,
        layers=layers,
        input_gradient=x_grad,
    )
    cf.validate()
    return cf


def save_capture(cf: CaptureFile, path: str | Path) -> int:
    with open(path, "wb") as fh:
        return write_capture(cf, fh)


def load_capture(path: str | Path) -> CaptureFile:
    with open(path, "rb") as fh:
        return read_capture(fh)


def capture_to_bytes(cf: CaptureFile) -> bytes:
    buf = io.BytesIO()
    write_capture(cf, buf)
    return buf.getvalue()

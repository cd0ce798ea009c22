"""CAMCAP v1 byte writer.

Layout: 8-byte magic ``CAMCAP01``, little-endian u32 header length, UTF-8
JSON header carrying shapes and byte offsets, then little-endian float32
blobs at offsets relative to the end of the header (all 4-byte aligned).
This mirrors the consumer's format definition; the adapter deliberately
carries its own writer so the byte format stays the only coupling point.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CAMCAP01"
VERSION = 1


@dataclass
class StageTensors:
    """One captured stage, already detached to numpy."""

    name: str
    depth_index: int
    activation: np.ndarray  # (C, H, W)
    gradient: np.ndarray  # (C, H, W)
    bias: np.ndarray | None = None  # (C,)
    bias_gradient: np.ndarray | None = None  # (C, H, W)


@dataclass
class CaptureRecord:
    image_id: str
    class_index: int
    score: float
    input: np.ndarray  # (C, H, W)
    input_gradient: np.ndarray | None
    stages: list[StageTensors] = field(default_factory=list)


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def encode(record: CaptureRecord) -> bytes:
    blobs: list[bytes] = []
    offset = 0

    def add(a: np.ndarray) -> dict:
        nonlocal offset
        entry = {"offset": offset, "shape": [int(s) for s in a.shape]}
        blobs.append(_f32(a))
        offset += 4 * int(np.prod(a.shape))
        return entry

    header: dict = {
        "version": VERSION,
        "image_id": record.image_id,
        "class_index": int(record.class_index),
        "score": float(record.score),
        "input": add(record.input),
        "input_gradient": None,
        "layers": [],
    }
    if record.input_gradient is not None:
        header["input_gradient"] = add(record.input_gradient)
    for stage in record.stages:
        entry = {
            "name": stage.name,
            "depth_index": int(stage.depth_index),
            "activation": add(stage.activation),
            "gradient": add(stage.gradient),
            "bias": None,
            "bias_gradient": None,
        }
        if stage.bias is not None:
            entry["bias"] = {"length": int(stage.bias.size), "offset": offset}
            blobs.append(_f32(stage.bias))
            offset += 4 * int(stage.bias.size)
            entry["bias_gradient"] = add(stage.bias_gradient)
        header["layers"].append(entry)

    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(head)) + head + b"".join(blobs)


def write(record: CaptureRecord, path) -> int:
    data = encode(record)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)

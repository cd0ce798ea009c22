"""Binary container layout shared by capture and checkpoint files.

Layout: an 8-byte ASCII magic, a little-endian u32 header length, a UTF-8
JSON header, then a payload of raw little-endian float32 blobs addressed by
byte offsets (relative to the end of the header) recorded in the header.
The JSON is serialized with sorted keys and no whitespace so that writing
is canonical: identical values produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from .errors import CaptureCorruptionError, CaptureFormatError

MAGIC_LEN = 8
_U32 = struct.Struct("<I")


def pack_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(sink: BinaryIO, magic: bytes, header: dict, payload: bytes) -> int:
    """Write magic + header length + JSON header + payload; return byte count."""
    if len(magic) != MAGIC_LEN:
        raise ValueError(f"magic must be {MAGIC_LEN} bytes, got {len(magic)}")
    head = pack_header(header)
    sink.write(magic)
    sink.write(_U32.pack(len(head)))
    sink.write(head)
    sink.write(payload)
    return MAGIC_LEN + _U32.size + len(head) + len(payload)


def read_container(source: BinaryIO, magic: bytes) -> tuple[dict, bytes]:
    """Read and validate a container, returning (header, payload bytes)."""
    data = source.read()
    if len(data) < MAGIC_LEN + _U32.size:
        raise CaptureFormatError("file too short to hold a container header")
    if data[:MAGIC_LEN] != magic:
        raise CaptureFormatError(
            f"bad magic {data[:MAGIC_LEN]!r}, expected {magic!r}"
        )
    (head_len,) = _U32.unpack_from(data, MAGIC_LEN)
    head_start = MAGIC_LEN + _U32.size
    if head_start + head_len > len(data):
        raise CaptureCorruptionError("declared header length exceeds file size")
    try:
        header = json.loads(data[head_start : head_start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CaptureFormatError(f"malformed JSON header: {exc}") from exc
    if not isinstance(header, dict):
        raise CaptureFormatError("container header must be a JSON object")
    return header, data[head_start + head_len :]


def float_blob(a: np.ndarray) -> bytes:
    """Serialize an array as little-endian float32, C order."""
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def read_floats(payload: bytes, offset: int, count: int, what: str) -> np.ndarray:
    """Slice ``count`` little-endian float32 values out of the payload."""
    if offset < 0 or offset % 4 != 0:
        raise CaptureCorruptionError(f"{what}: bad blob offset {offset}")
    end = offset + 4 * count
    if end > len(payload):
        raise CaptureCorruptionError(
            f"{what}: blob [{offset}, {end}) exceeds payload of {len(payload)} bytes"
        )
    return np.frombuffer(payload, dtype="<f4", count=count, offset=offset).copy()

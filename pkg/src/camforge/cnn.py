"""A small convolutional classifier with explicit, hand-written backprop.

Fixed architecture for 1x32x32 inputs:

    conv3x3(1->8, pad 1) - ReLU - maxpool2      stage s1, 8x32x32
    conv3x3(8->16, pad 1) - ReLU - maxpool2     stage s2, 16x16x16
    conv3x3(16->32, pad 1) - ReLU               stage s3, 32x8x8
    global average pool - linear(32->K)

The stage activations are the post-ReLU maps before pooling. Everything is
plain numpy in float64; checkpoints and captures are stored as float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from . import container
from .capture import CaptureFile, LayerRecord
from .errors import CaptureValidationError, DivergenceError

CHECKPOINT_MAGIC = b"CAMNET01"
CHECKPOINT_VERSION = 1

INPUT_SHAPE = (1, 32, 32)
STAGE_CHANNELS = (8, 16, 32)
STAGE_NAMES = ("s1", "s2", "s3")
GAP_SIZE = 64  # stage-3 spatial extent 8*8


@dataclass
class ModelParams:
    conv_w: list[np.ndarray]  # [(8,1,3,3), (16,8,3,3), (32,16,3,3)]
    conv_b: list[np.ndarray]  # [(8,), (16,), (32,)]
    fc_w: np.ndarray  # (K, 32)
    fc_b: np.ndarray  # (K,)
    rng_seed: int = 0

    @property
    def num_classes(self) -> int:
        return self.fc_w.shape[0]


@dataclass
class ForwardTape:
    """Everything the exact backward pass needs."""

    x: np.ndarray
    preacts: list[np.ndarray]  # z1..z3, conv outputs before ReLU
    activations: list[np.ndarray]  # a1..a3, after ReLU, before pooling
    pool_idx: list[np.ndarray]  # argmax index in each 2x2 window, stages 1-2
    gap: np.ndarray  # (32,)
    logits: np.ndarray  # (K,)


@dataclass
class ClassGradients:
    """Gradients of one pre-softmax logit w.r.t. stored quantities."""

    input: np.ndarray  # (1, 32, 32)
    activations: list[np.ndarray]  # d y_c / d a_i, same shapes as activations
    bias_maps: list[np.ndarray]  # d y_c / d z_i (per-location bias gradient)
    fc_w: np.ndarray  # (K, 32)
    fc_b: np.ndarray  # (K,)


def init_params(seed: int = 0, num_classes: int = 3) -> ModelParams:
    """He-initialized kernels, zero biases."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    c_in = INPUT_SHAPE[0]
    for c_out in STAGE_CHANNELS:
        scale = np.sqrt(2.0 / (c_in * 9))
        conv_w.append(rng.normal(0.0, scale, size=(c_out, c_in, 3, 3)))
        conv_b.append(np.zeros(c_out))
        c_in = c_out
    fc_scale = np.sqrt(2.0 / STAGE_CHANNELS[-1])
    fc_w = rng.normal(0.0, fc_scale, size=(num_classes, STAGE_CHANNELS[-1]))
    fc_b = np.zeros(num_classes)
    return ModelParams(conv_w=conv_w, conv_b=conv_b, fc_w=fc_w, fc_b=fc_b, rng_seed=seed)


# ---------------------------------------------------------------------------
# primitives (batched, stride 1, 3x3 kernels, zero padding 1)

def _im2col3(x: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (N, C*9, H*W) patch matrix for 3x3/pad-1 convolution."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((n, c, 9, h, w), dtype=x.dtype)
    for i, (dy, dx) in enumerate((dy, dx) for dy in range(3) for dx in range(3)):
        cols[:, :, i] = xp[:, :, dy : dy + h, dx : dx + w]
    return cols.reshape(n, c * 9, h * w)


def _conv3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, _, h, width = x.shape
    cols = _im2col3(x)
    wmat = w.reshape(w.shape[0], -1)
    out = np.matmul(wmat, cols) + b[:, None]
    return out.reshape(n, w.shape[0], h, width)


def _conv3_input_grad(dz: np.ndarray, w: np.ndarray) -> np.ndarray:
    # transposed convolution == convolution with swapped in/out axes and
    # spatially flipped kernels (valid because stride 1 / pad 1 keeps sizes)
    w_t = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return _conv3(dz, w_t, np.zeros(w_t.shape[0], dtype=dz.dtype))


def _conv3_param_grads(x: np.ndarray, dz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, c_out, h, w = dz.shape
    cols = _im2col3(x)  # (N, C_in*9, H*W)
    dzf = dz.reshape(n, c_out, h * w)
    dw = np.matmul(dzf, cols.transpose(0, 2, 1)).sum(axis=0)
    db = dzf.sum(axis=(0, 2))
    return dw.reshape(c_out, -1, 3, 3), db


def _maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, w = x.shape
    windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, h // 2, w // 2, 4)
    idx = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _maxpool2_grad(dout: np.ndarray, idx: np.ndarray) -> np.ndarray:
    n, c, oh, ow = dout.shape
    dwin = np.zeros((n, c, oh, ow, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dwin.reshape(n, c, oh * 2, ow * 2)


# ---------------------------------------------------------------------------
# forward / backward

def _forward_batch(p: ModelParams, x: np.ndarray):
    """Returns (preacts, activations, pool_idx, pooled, gap, logits)."""
    preacts, activations, pool_idx = [], [], []
    cur = x
    for stage in range(3):
        z = _conv3(cur, p.conv_w[stage], p.conv_b[stage])
        a = np.maximum(z, 0.0)
        preacts.append(z)
        activations.append(a)
        if stage < 2:
            cur, idx = _maxpool2(a)
            pool_idx.append(idx)
        else:
            cur = a
    gap = cur.mean(axis=(2, 3))
    logits = gap @ p.fc_w.T + p.fc_b
    return preacts, activations, pool_idx, gap, logits


def forward(p: ModelParams, x: np.ndarray) -> ForwardTape:
    """Run one image through the network, recording the full tape."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != INPUT_SHAPE:
        raise ValueError(f"input must have shape {INPUT_SHAPE}, got {x.shape}")
    preacts, activations, pool_idx, gap, logits = _forward_batch(p, x[None])
    return ForwardTape(
        x=x,
        preacts=[z[0] for z in preacts],
        activations=[a[0] for a in activations],
        pool_idx=[i[0] for i in pool_idx],
        gap=gap[0],
        logits=logits[0],
    )


def forward_from_activation(p: ModelParams, stage: int, a: np.ndarray) -> np.ndarray:
    """Logits from a (possibly perturbed) post-ReLU stage activation."""
    cur = np.asarray(a, dtype=np.float64)[None]
    for s in range(stage, 3):
        if s > stage:
            z = _conv3(cur, p.conv_w[s], p.conv_b[s])
            cur = np.maximum(z, 0.0)
        if s < 2:
            cur, _ = _maxpool2(cur)
    gap = cur.mean(axis=(2, 3))
    return (gap @ p.fc_w.T + p.fc_b)[0]


def forward_from_preact(p: ModelParams, stage: int, z: np.ndarray) -> np.ndarray:
    """Logits from a (possibly perturbed) pre-activation at one stage."""
    return forward_from_activation(p, stage, np.maximum(np.asarray(z, dtype=np.float64), 0.0))


def _backward_batch(p: ModelParams, preacts, activations, pool_idx, dlogits, gap):
    """Shared backward walk; returns per-stage dz, da, plus dx and fc grads."""
    n = dlogits.shape[0]
    dfc_w = dlogits.T @ gap
    dfc_b = dlogits.sum(axis=0)
    dgap = dlogits @ p.fc_w  # (N, 32)
    h3, w3 = activations[2].shape[2:]
    da = dgap[:, :, None, None] * np.ones((n, 1, h3, w3)) / (h3 * w3)

    dzs, das = [None] * 3, [None] * 3
    for stage in (2, 1, 0):
        das[stage] = da
        dz = da * (preacts[stage] > 0)
        dzs[stage] = dz
        dx = _conv3_input_grad(dz, p.conv_w[stage])
        if stage > 0:
            da = _maxpool2_grad(dx, pool_idx[stage - 1])
    return dzs, das, dx, dfc_w, dfc_b


def backward_to_class(p: ModelParams, tape: ForwardTape, c: int) -> ClassGradients:
    """Exact gradients of the pre-softmax logit ``c``."""
    if not 0 <= c < p.num_classes:
        raise ValueError(f"class index {c} out of range [0, {p.num_classes})")
    dlogits = np.zeros((1, p.num_classes))
    dlogits[0, c] = 1.0
    dzs, das, dx, dfc_w, dfc_b = _backward_batch(
        p,
        [z[None] for z in tape.preacts],
        [a[None] for a in tape.activations],
        [i[None] for i in tape.pool_idx],
        dlogits,
        tape.gap[None],
    )
    return ClassGradients(
        input=dx[0],
        activations=[d[0] for d in das],
        bias_maps=[d[0] for d in dzs],
        fc_w=dfc_w,
        fc_b=dfc_b,
    )


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    params: ModelParams
    train_accuracy: float
    epoch_losses: list[float] = field(default_factory=list)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train(
    dataset: Sequence,
    epochs: int = 30,
    lr: float = 0.05,
    seed: int = 7,
    batch_size: int = 16,
    num_classes: int = 3,
) -> TrainResult:
    """SGD on softmax cross-entropy over image-level labels only."""
    if not dataset:
        raise ValueError("dataset must be nonempty")
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    images = np.stack([np.asarray(s.image, dtype=np.float64) for s in dataset])
    labels = np.array([s.label for s in dataset], dtype=np.intp)

    p = init_params(seed=seed, num_classes=num_classes)
    rng = np.random.default_rng(seed)
    n = len(dataset)
    epoch_losses = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            xb, yb = images[batch], labels[batch]
            preacts, activations, pool_idx, gap, logits = _forward_batch(p, xb)
            probs = _softmax(logits)
            batch_loss = -np.log(probs[np.arange(len(batch)), yb] + 1e-12).sum()
            total_loss += batch_loss

            dlogits = probs.copy()
            dlogits[np.arange(len(batch)), yb] -= 1.0
            dlogits /= len(batch)
            dzs, _, _, dfc_w, dfc_b = _backward_batch(
                p, preacts, activations, pool_idx, dlogits, gap
            )
            p.fc_w -= lr * dfc_w
            p.fc_b -= lr * dfc_b
            cur_inputs = [xb, _maxpool2(activations[0])[0], _maxpool2(activations[1])[0]]
            for stage in range(3):
                dw, db = _conv3_param_grads(cur_inputs[stage], dzs[stage])
                p.conv_w[stage] -= lr * dw
                p.conv_b[stage] -= lr * db
        mean_loss = total_loss / n
        if not np.isfinite(mean_loss):
            raise DivergenceError(epoch)
        epoch_losses.append(float(mean_loss))

    _, _, _, _, logits = _forward_batch(p, images)
    accuracy = float((logits.argmax(axis=1) == labels).mean())
    return TrainResult(params=p, train_accuracy=accuracy, epoch_losses=epoch_losses)


def predict(p: ModelParams, images: np.ndarray) -> np.ndarray:
    """Class predictions for a (N, 1, 32, 32) batch."""
    images = np.asarray(images, dtype=np.float64)
    _, _, _, _, logits = _forward_batch(p, images)
    return logits.argmax(axis=1)


# ---------------------------------------------------------------------------
# capture export

def export_capture(
    p: ModelParams, x: np.ndarray, c: int, image_id: str
) -> CaptureFile:
    """Capture activations, gradients and biases of all three stages."""
    tape = forward(p, x)
    grads = backward_to_class(p, tape, c)
    layers = [
        LayerRecord(
            name=STAGE_NAMES[stage],
            depth_index=stage,
            activation=tape.activations[stage],
            gradient=grads.activations[stage],
            bias=p.conv_b[stage],
            bias_gradient=grads.bias_maps[stage],
        )
        for stage in range(3)
    ]
    return CaptureFile(
        image_id=image_id,
        class_index=c,
        score=float(tape.logits[c]),
        input=tape.x,
        input_gradient=grads.input,
        layers=layers,
    )


# ---------------------------------------------------------------------------
# checkpoints

def save_params(p: ModelParams, sink: BinaryIO) -> int:
    """Write a checkpoint: JSON shapes header plus float32 blobs."""
    blobs: list[tuple[str, np.ndarray]] = []
    for stage in range(3):
        blobs.append((f"conv{stage + 1}_w", p.conv_w[stage]))
        blobs.append((f"conv{stage + 1}_b", p.conv_b[stage]))
    blobs.append(("fc_w", p.fc_w))
    blobs.append(("fc_b", p.fc_b))

    entries = []
    payload = []
    offset = 0
    for name, arr in blobs:
        entries.append({"name": name, "shape": [int(s) for s in arr.shape], "offset": offset})
        payload.append(container.float_blob(arr))
        offset += 4 * arr.size
    header = {
        "version": CHECKPOINT_VERSION,
        "num_classes": int(p.num_classes),
        "rng_seed": int(p.rng_seed),
        "blobs": entries,
    }
    return container.write_container(sink, CHECKPOINT_MAGIC, header, b"".join(payload))


def load_params(source: BinaryIO) -> ModelParams:
    header, payload = container.read_container(source, CHECKPOINT_MAGIC)
    try:
        num_classes = int(header["num_classes"])
        seed = int(header["rng_seed"])
        entries = {e["name"]: e for e in header["blobs"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise CaptureValidationError(f"checkpoint header malformed: {exc}") from exc

    def blob(name: str, expected_shape: tuple[int, ...]) -> np.ndarray:
        if name not in entries:
            raise CaptureValidationError(f"checkpoint missing blob {name!r}")
        entry = entries[name]
        shape = tuple(int(s) for s in entry["shape"])
        if shape != expected_shape:
            raise CaptureValidationError(
                f"checkpoint blob {name!r} has shape {shape}, expected {expected_shape}"
            )
        count = int(np.prod(shape))
        return (
            container.read_floats(payload, int(entry["offset"]), count, name)
            .reshape(shape)
            .astype(np.float64)
        )

    conv_w, conv_b = [], []
    c_in = INPUT_SHAPE[0]
    for stage, c_out in enumerate(STAGE_CHANNELS):
        conv_w.append(blob(f"conv{stage + 1}_w", (c_out, c_in, 3, 3)))
        conv_b.append(blob(f"conv{stage + 1}_b", (c_out,)))
        c_in = c_out
    fc_w = blob("fc_w", (num_classes, STAGE_CHANNELS[-1]))
    fc_b = blob("fc_b", (num_classes,))
    return ModelParams(conv_w=conv_w, conv_b=conv_b, fc_w=fc_w, fc_b=fc_b, rng_seed=seed)


def save_params_file(p: ModelParams, path: str | Path) -> int:
    with open(path, "wb") as fh:
        return save_params(p, fh)


def load_params_file(path: str | Path) -> ModelParams:
    with open(path, "rb") as fh:
        return load_params(fh)

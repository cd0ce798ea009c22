"""Hook-based capture: run one image, record stage tensors, write CAMCAP.

The stage convolution's backward hook yields the gradient with respect to
the pre-activation, which is exactly the per-location bias gradient; the
following ReLU's hooks yield the stage activation and its gradient.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import AdapterError
from .models import following_relu, get_config, resolve_module
from .stages import STAGE_NAMES, validate_stage_names
from .writer import CaptureRecord, StageTensors, write


def load_image(path: str | Path, config) -> torch.Tensor:
    """Decode, resize and normalize to the model's expected input."""
    try:
        with Image.open(path) as img:
            img = img.convert("RGB").resize(
                (config.input_size, config.input_size), Image.BILINEAR
            )
    except (OSError, ValueError) as exc:
        raise AdapterError(f"cannot decode image {path}: {exc}") from exc
    array = np.asarray(img, dtype=np.float32) / 255.0
    tensor = torch.from_numpy(array).permute(2, 0, 1)
    mean = torch.tensor(config.mean).view(3, 1, 1)
    std = torch.tensor(config.std).view(3, 1, 1)
    return (tensor - mean) / std


class _StageHooks:
    """Forward/backward hooks around one stage (conv + following ReLU)."""

    def __init__(self, name: str, conv, relu):
        self.name = name
        self.conv = conv
        self.activation = None
        self.act_gradient = None
        self.preact_gradient = None
        self.handles = [
            relu.register_forward_hook(self._save_activation),
            relu.register_full_backward_hook(self._save_act_gradient),
            conv.register_full_backward_hook(self._save_preact_gradient),
        ]

    def _save_activation(self, module, args, output):
        self.activation = output.detach().clone()

    def _save_act_gradient(self, module, grad_input, grad_output):
        self.act_gradient = grad_output[0].detach().clone()

    def _save_preact_gradient(self, module, grad_input, grad_output):
        self.preact_gradient = grad_output[0].detach().clone()

    def remove(self):
        for h in self.handles:
            h.remove()

    def tensors(self, depth_index: int) -> StageTensors:
        if self.activation is None or self.act_gradient is None or self.preact_gradient is None:
            raise AdapterError(f"stage {self.name}: hooks captured nothing")
        return StageTensors(
            name=self.name,
            depth_index=depth_index,
            activation=self.activation[0].numpy(),
            gradient=self.act_gradient[0].numpy(),
            bias=self.conv.bias.detach().numpy(),
            bias_gradient=self.preact_gradient[0].numpy(),
        )


def capture_tensor(
    model_id: str,
    input_tensor: torch.Tensor,
    class_index: int,
    stages=STAGE_NAMES,
    image_id: str = "image",
    weights=None,
    model=None,
) -> CaptureRecord:
    """Forward + backward one preprocessed (3, H, W) tensor into a record."""
    config = get_config(model_id)
    names = validate_stage_names(stages)
    if not 0 <= class_index < config.num_classes:
        raise AdapterError(
            f"class index {class_index} out of range [0, {config.num_classes})"
        )
    if model is None:
        model = config.build(weights)

    hooks = []
    try:
        for name in names:
            path = config.stage_conv_paths[STAGE_NAMES.index(name)]
            conv = resolve_module(model, path)
            _, relu = following_relu(model, path)
            hooks.append(_StageHooks(name, conv, relu))

        x = input_tensor[None].clone().requires_grad_(True)
        logits = model(x)
        score = logits[0, class_index]
        model.zero_grad(set_to_none=True)
        score.backward()
        if x.grad is None:
            raise AdapterError("input gradient was not populated")

        record = CaptureRecord(
            image_id=image_id,
            class_index=class_index,
            score=float(score.detach()),
            input=input_tensor.numpy(),
            input_gradient=x.grad[0].numpy(),
            stages=[
                hook.tensors(depth_index=STAGE_NAMES.index(hook.name))
                for hook in sorted(hooks, key=lambda h: STAGE_NAMES.index(h.name))
            ],
        )
    finally:
        for hook in hooks:
            hook.remove()
    return record


def capture_image(
    model_id: str,
    image_path: str | Path,
    class_index: int,
    stages=STAGE_NAMES,
    out_path: str | Path | None = None,
    weights=None,
) -> CaptureRecord:
    """Capture one image file; writes a CAMCAP v1 file when given a path."""
    config = get_config(model_id)
    tensor = load_image(image_path, config)
    record = capture_tensor(
        model_id,
        tensor,
        class_index,
        stages=stages,
        image_id=Path(image_path).stem,
        weights=weights,
    )
    if out_path is not None:
        write(record, out_path)
    return record

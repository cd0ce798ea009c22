"""Stage discovery: what can be captured from a supported model."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import StageValidationError
from .models import ModelConfig, following_relu, get_config, resolve_module

STAGE_NAMES = ("s1", "s2", "s3", "s4", "s5")


@dataclass(frozen=True)
class StageSpec:
    name: str
    module_path: str  # the block's last conv layer
    shape: tuple[int, int, int]  # (C, H, W) at the default input size
    flags: frozenset[str] = field(
        default_factory=lambda: frozenset(
            {"activation", "gradient", "bias", "bias_gradient"}
        )
    )


def validate_stage_names(names) -> tuple[str, ...]:
    names = tuple(names)
    if not names:
        raise StageValidationError("at least one stage name is required")
    if len(set(names)) != len(names):
        raise StageValidationError(f"duplicate stage names in {names}")
    unknown = [n for n in names if n not in STAGE_NAMES]
    if unknown:
        raise StageValidationError(
            f"unknown stage names {unknown}; expected a subset of {STAGE_NAMES}"
        )
    return names


def discover_shapes(model: nn.Module, config: ModelConfig) -> list[tuple[int, int, int]]:
    """Dry-run forward recording each stage activation shape."""
    shapes: dict[str, tuple[int, int, int]] = {}
    handles = []
    for path in config.stage_conv_paths:
        relu_path, relu = following_relu(model, path)

        def hook(module, args, output, path=path):
            shapes[path] = tuple(output.shape[1:])

        handles.append(relu.register_forward_hook(hook))
    try:
        with torch.no_grad():
            model(torch.zeros(1, 3, config.input_size, config.input_size))
    finally:
        for h in handles:
            h.remove()
    return [shapes[path] for path in config.stage_conv_paths]


def list_stages(model_id: str, weights=None) -> list[StageSpec]:
    """The default five-stage mapping plus discovered activation shapes."""
    config = get_config(model_id)
    model = config.build(weights)
    for path in config.stage_conv_paths:
        conv = resolve_module(model, path)
        if not isinstance(conv, nn.Conv2d) or conv.bias is None:
            raise StageValidationError(f"{path!r} is not a biased Conv2d")
    shapes = discover_shapes(model, config)
    return [
        StageSpec(name=name, module_path=path, shape=shape)
        for name, path, shape in zip(STAGE_NAMES, config.stage_conv_paths, shapes)
    ]

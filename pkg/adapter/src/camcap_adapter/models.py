"""Model registry: constructors, preprocessing, and stage conv locations.

Each supported model exposes five named stages s1..s5. A stage points at
the last convolution of its block; the ReLU following that convolution
yields the stage activation, so activations are post-ReLU feature maps at
full pre-pooling resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import ConfigurationError

SMOKE_CLASSES = ("disk", "square", "triangle")


class SmokeVGG(nn.Module):
    """A small five-stage VGG-style network for 3x64x64 inputs.

    Exists so the adapter can be exercised end-to-end without downloading
    ImageNet weights; the bundled checkpoint is trained on synthetic scenes.
    """

    def __init__(self, num_classes: int = len(SMOKE_CLASSES)):
        super().__init__()
        widths = (8, 16, 24, 32, 40)
        layers: list[nn.Module] = []
        c_in = 3
        for c_out in widths:
            layers += [nn.Conv2d(c_in, c_out, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2)]
            c_in = c_out
        self.features = nn.Sequential(*layers)
        self.classifier = nn.Linear(widths[-1], num_classes)

    def forward(self, x):
        feats = self.features(x)
        pooled = feats.mean(dim=(2, 3))
        return self.classifier(pooled)


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    input_size: int
    mean: tuple[float, ...]
    std: tuple[float, ...]
    stage_conv_paths: tuple[str, ...]  # s1..s5, each the block's last conv
    num_classes: int

    def build(self, weights: str | Path | None = None) -> nn.Module:
        if self.model_id == "vgg16":
            from torchvision.models import vgg16

            model = vgg16(weights=None)
        elif self.model_id == "smokevgg":
            model = SmokeVGG()
            if weights is None:
                bundled = Path(__file__).parent / "samples" / "smoke_model.pt"
                if bundled.exists():
                    weights = bundled
        else:  # pragma: no cover - registry guards this
            raise ConfigurationError(f"no constructor for {self.model_id!r}")
        if weights is not None:
            state = torch.load(weights, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        model.eval()
        disable_inplace(model)
        return model


REGISTRY: dict[str, ModelConfig] = {
    "vgg16": ModelConfig(
        model_id="vgg16",
        input_size=224,
        mean=(0.485, 0.456, 0.406),
        std=(0.229, 0.224, 0.225),
        stage_conv_paths=(
            "features.2",
            "features.7",
            "features.14",
            "features.21",
            "features.28",
        ),
        num_classes=1000,
    ),
    "smokevgg": ModelConfig(
        model_id="smokevgg",
        input_size=64,
        mean=(0.0, 0.0, 0.0),
        std=(1.0, 1.0, 1.0),
        stage_conv_paths=(
            "features.0",
            "features.3",
            "features.6",
            "features.9",
            "features.12",
        ),
        num_classes=len(SMOKE_CLASSES),
    ),
}


def get_config(model_id: str) -> ModelConfig:
    if not model_id or model_id not in REGISTRY:
        raise ConfigurationError(
            f"unknown model id {model_id!r}; supported: {sorted(REGISTRY)}"
        )
    return REGISTRY[model_id]


def disable_inplace(model: nn.Module) -> None:
    """In-place ReLUs would clobber captured conv outputs and break
    full backward hooks, so switch them off."""
    for module in model.modules():
        if isinstance(module, nn.ReLU):
            module.inplace = False


def resolve_module(model: nn.Module, path: str) -> nn.Module:
    cur: nn.Module = model
    for part in path.split("."):
        children = dict(cur.named_children())
        if part not in children:
            raise ConfigurationError(f"module path {path!r} not found at {part!r}")
        cur = children[part]
    return cur


def following_relu(model: nn.Module, conv_path: str) -> tuple[str, nn.Module]:
    """The activation module right after a conv inside its Sequential parent."""
    parts = conv_path.split(".")
    parent = resolve_module(model, ".".join(parts[:-1])) if len(parts) > 1 else model
    if not isinstance(parent, nn.Sequential):
        raise ConfigurationError(f"{conv_path!r} is not inside a Sequential container")
    idx = int(parts[-1])
    if idx + 1 >= len(parent) or not isinstance(parent[idx + 1], nn.ReLU):
        raise ConfigurationError(f"no ReLU follows {conv_path!r}")
    return ".".join(parts[:-1] + [str(idx + 1)]), parent[idx + 1]

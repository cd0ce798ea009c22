"""Capture activations, gradients and biases from torchvision-style CNNs
into CAMCAP v1 files."""

from .capture import capture_image, capture_tensor, load_image
from .errors import AdapterError, ConfigurationError, StageValidationError
from .models import REGISTRY, SmokeVGG, get_config
from .stages import STAGE_NAMES, StageSpec, list_stages
from .writer import CaptureRecord, StageTensors, encode, write

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "CaptureRecord",
    "ConfigurationError",
    "REGISTRY",
    "STAGE_NAMES",
    "SmokeVGG",
    "StageSpec",
    "StageTensors",
    "StageValidationError",
    "capture_image",
    "capture_tensor",
    "encode",
    "get_config",
    "list_stages",
    "load_image",
    "write",
]

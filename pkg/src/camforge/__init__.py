"""Gradient-based class activation maps with layer fusion and gradient
truncation, plus a weakly-supervised segmentation harness around them."""

from .capture import CaptureFile, LayerRecord, load_capture, read_capture, save_capture, write_capture
from .errors import (
    CamforgeError,
    CaptureCorruptionError,
    CaptureFormatError,
    CaptureValidationError,
    DivergenceError,
    UndefinedMetricError,
    UnsupportedMethodError,
)
from .estimators import CamSaliency, OtsuSegmenter, ShapeNetClassifier
from .methods import (
    METHODS,
    SaliencyRequest,
    compute_saliency,
    fullgrad,
    fuse_layers,
    grad_cam_layer,
    layer_cam_layer,
    lt_fullgrad,
    lt_grad_cam,
    lt_layer_cam,
    survival_fraction,
    truncation_mask,
)
from .segmentation import (
    EvalCase,
    SweepResult,
    SweepRow,
    accumulate_confusion,
    assemble_segmentation,
    compute_miou,
    compute_prf,
    delta_sweep,
    evaluate_cases,
    otsu_threshold,
    sweep_csv,
)
from .shapes import ShapesSample, generate_shapes
from .tensors import bilinear_resize, channel_sum, hadamard, minmax_normalize, percentile_positive

__version__ = "0.1.0"

__all__ = [
    "CamforgeError",
    "CamSaliency",
    "CaptureCorruptionError",
    "CaptureFile",
    "CaptureFormatError",
    "CaptureValidationError",
    "DivergenceError",
    "EvalCase",
    "LayerRecord",
    "METHODS",
    "OtsuSegmenter",
    "SaliencyRequest",
    "ShapeNetClassifier",
    "ShapesSample",
    "SweepResult",
    "SweepRow",
    "UndefinedMetricError",
    "UnsupportedMethodError",
    "accumulate_confusion",
    "assemble_segmentation",
    "bilinear_resize",
    "channel_sum",
    "compute_miou",
    "compute_prf",
    "compute_saliency",
    "delta_sweep",
    "evaluate_cases",
    "fullgrad",
    "fuse_layers",
    "generate_shapes",
    "grad_cam_layer",
    "hadamard",
    "layer_cam_layer",
    "load_capture",
    "lt_fullgrad",
    "lt_grad_cam",
    "lt_layer_cam",
    "minmax_normalize",
    "otsu_threshold",
    "percentile_positive",
    "read_capture",
    "save_capture",
    "survival_fraction",
    "sweep_csv",
    "truncation_mask",
    "write_capture",
]

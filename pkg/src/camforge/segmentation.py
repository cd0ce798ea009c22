"""From saliency maps to label masks and scores.

Maps are binarized with Otsu's histogram threshold, assembled into a
multi-class label mask, and scored against ground truth through one
dataset-level confusion matrix (rows: ground truth, columns: prediction,
index 0 is background).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .capture import CaptureFile
from .errors import UndefinedMetricError
from .methods import SaliencyRequest, compute_saliency, survival_fraction
from .validation import check_label_mask, check_map

OTSU_BINS = 256


def otsu_threshold(m: np.ndarray) -> float:
    """Threshold in [0, 1] maximizing between-class variance over 256 bins.

    Ties pick the lowest threshold. Degenerate maps (all mass in one bin)
    return 1.0 so that a >= comparison leaves everything background.
    """
    m = check_map(m, "map")
    if not np.isfinite(m).all() or m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("map values must lie in [0, 1]")
    bins = np.minimum((m.astype(np.float64) * OTSU_BINS).astype(np.int64), OTSU_BINS - 1)
    counts = np.bincount(bins.ravel(), minlength=OTSU_BINS).astype(np.int64)
    if np.count_nonzero(counts) < 2:
        return 1.0

    total = counts.sum()
    levels = np.arange(OTSU_BINS, dtype=np.float64)
    cum_n = np.cumsum(counts).astype(np.float64)
    cum_s = np.cumsum(counts * levels)
    # candidate k splits bins into [0, k) background and [k, 256) foreground
    n0 = np.concatenate(([0.0], cum_n[:-1]))
    s0 = np.concatenate(([0.0], cum_s[:-1]))
    n1 = total - n0
    s1 = cum_s[-1] - s0
    scores = np.zeros(OTSU_BINS)
    valid = (n0 > 0) & (n1 > 0)
    mu0 = np.divide(s0, n0, out=np.zeros(OTSU_BINS), where=valid)
    mu1 = np.divide(s1, n1, out=np.zeros(OTSU_BINS), where=valid)
    w0 = n0 / total
    w1 = n1 / total
    scores[valid] = (w0 * w1 * (mu0 - mu1) ** 2)[valid]
    if scores.max() == 0.0:
        return 1.0
    return float(np.argmax(scores)) / OTSU_BINS


def assemble_segmentation(
    class_maps: dict[int, np.ndarray], image_labels: set[int] | frozenset[int]
) -> np.ndarray:
    """Threshold each class map with Otsu and label each pixel with the
    passing class of maximal response (ties to the smallest label,
    background 0 when no class passes)."""
    if not image_labels:
        raise ValueError("image_labels must be nonempty")
    missing = sorted(set(image_labels) - set(class_maps))
    if missing:
        raise ValueError(f"no map for image labels {missing}")
    if any(label < 1 for label in image_labels):
        raise ValueError("foreground labels must be >= 1")

    labels = sorted(image_labels)
    maps = [check_map(class_maps[label], f"map[{label}]") for label in labels]
    shape = maps[0].shape
    for label, m in zip(labels, maps):
        if m.shape != shape:
            raise ValueError(f"map[{label}] has shape {m.shape}, expected {shape}")

    best_value = np.full(shape, -np.inf, dtype=np.float64)
    out = np.zeros(shape, dtype=np.int64)
    for label, m in zip(labels, maps):
        t = otsu_threshold(m)
        passing = m >= t
        better = passing & (m > best_value)
        out[better] = label
        best_value[better] = m[better]
    return out


def accumulate_confusion(
    pred: np.ndarray,
    gt: np.ndarray,
    num_classes: int,
    into: np.ndarray | None = None,
) -> np.ndarray:
    """Add per-pixel (gt, pred) counts into a (K+1, K+1) matrix."""
    pred = check_label_mask(pred, num_classes, "pred")
    gt = check_label_mask(gt, num_classes, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    k = num_classes + 1
    cm = np.bincount(gt.ravel() * k + pred.ravel(), minlength=k * k).reshape(k, k)
    if into is None:
        return cm
    if into.shape != (k, k):
        raise ValueError(f"accumulator must have shape {(k, k)}, got {into.shape}")
    into += cm
    return into


def compute_miou(cm: np.ndarray) -> float:
    """Mean IoU over classes with any support (background included)."""
    cm = np.asarray(cm, dtype=np.float64)
    diag = np.diag(cm)
    support = cm.sum(axis=1) + cm.sum(axis=0)
    present = support > 0
    if not present.any():
        raise UndefinedMetricError("confusion matrix is empty")
    union = support - diag
    return float((diag[present] / union[present]).mean())


def compute_prf(cm: np.ndarray) -> tuple[float, float, float]:
    """Foreground-only (precision, recall, micro-F1).

    Precision and recall are macro averages over the foreground classes
    whose denominator is nonzero; micro-F1 pools true/false counts over
    all foreground classes. Background (class 0) never contributes.
    """
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)[1:]
    predicted = cm.sum(axis=0)[1:]
    actual = cm.sum(axis=1)[1:]
    if predicted.sum() == 0 and actual.sum() == 0:
        raise UndefinedMetricError("no foreground class in ground truth or prediction")
    fp = predicted - tp
    fn = actual - tp

    has_pred = predicted > 0
    has_actual = actual > 0
    precision = float((tp[has_pred] / predicted[has_pred]).mean()) if has_pred.any() else 0.0
    recall = float((tp[has_actual] / actual[has_actual]).mean()) if has_actual.any() else 0.0
    micro_f1 = float(2.0 * tp.sum() / (2.0 * tp.sum() + fp.sum() + fn.sum()))
    return precision, recall, micro_f1


# ---------------------------------------------------------------------------
# dataset evaluation and delta sweeps

@dataclass
class EvalCase:
    """All captures of one image (one per candidate class) plus ground truth."""

    captures: list[CaptureFile]
    gt_mask: np.ndarray


@dataclass
class SweepRow:
    delta: float
    miou: float
    precision: float
    recall: float
    micro_f1: float
    sparsity: float


@dataclass
class SweepResult:
    method: str
    layer_names: tuple[str, ...]
    rows: list[SweepRow] = field(default_factory=list)


def evaluate_cases(
    cases: list[EvalCase],
    method: str,
    layer_names,
    delta: float,
    num_classes: int,
) -> tuple[np.ndarray, float]:
    """Segment every case and return (confusion matrix, mean survival)."""
    if not cases:
        raise ValueError("cases must be nonempty")
    cm = np.zeros((num_classes + 1, num_classes + 1), dtype=np.int64)
    survival_sum = 0.0
    n_captures = 0
    for case in cases:
        gt = check_label_mask(case.gt_mask, num_classes, "gt_mask")
        req = SaliencyRequest(
            method=method,
            layer_names=tuple(layer_names),
            delta=delta,
            output_size=gt.shape,
        )
        class_maps = {}
        for cf in case.captures:
            class_maps[cf.class_index + 1] = compute_saliency(cf, req)
            survival_sum += survival_fraction(cf, req)
            n_captures += 1
        pred = assemble_segmentation(class_maps, set(class_maps))
        accumulate_confusion(pred, gt, num_classes, into=cm)
    return cm, survival_sum / n_captures


def delta_sweep(
    cases: list[EvalCase],
    method: str,
    layer_names,
    deltas,
    num_classes: int,
) -> SweepResult:
    """Evaluate the full pipeline at each truncation percentile."""
    deltas = [float(d) for d in deltas]
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError(f"deltas must strictly increase, got {deltas}")
    if deltas and not (0.0 <= deltas[0] and deltas[-1] < 100.0):
        raise ValueError(f"deltas must lie in [0, 100), got {deltas}")

    result = SweepResult(method=method, layer_names=tuple(layer_names))
    for delta in deltas:
        cm, survival = evaluate_cases(cases, method, layer_names, delta, num_classes)
        precision, recall, micro_f1 = compute_prf(cm)
        result.rows.append(
            SweepRow(
                delta=delta,
                miou=compute_miou(cm),
                precision=precision,
                recall=recall,
                micro_f1=micro_f1,
                sparsity=survival,
            )
        )
    return result


CSV_HEADER = ("method", "layers", "delta", "miou", "precision", "recall", "micro_f1", "sparsity")


def metrics_csv(rows: list[tuple]) -> str:
    """Render metric rows (tuples matching CSV_HEADER) as CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    return buf.getvalue()


def sweep_csv(result: SweepResult) -> str:
    layers = "+".join(result.layer_names)
    rows = [
        (
            result.method,
            layers,
            f"{row.delta:g}",
            f"{row.miou:.6f}",
            f"{row.precision:.6f}",
            f"{row.recall:.6f}",
            f"{row.micro_f1:.6f}",
            f"{row.sparsity:.6f}",
        )
        for row in result.rows
    ]
    return metrics_csv(rows)

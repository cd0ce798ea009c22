"""Command-line front end.

Dataset layout conventions:

* a *shapes* directory (from ``synth``) holds ``images/<id>_c<label>.pgm``
  plus ``masks/<id>.pgm``;
* a *capture* directory (from ``capture --dataset``) holds
  ``<id>_c<class>.camcap`` plus ``masks/<id>.pgm`` copied from the source,
  so segmentation and sweeps run from a single directory.

Exit codes: 0 success, 1 usage error, 2 data or validation error. All
diagnostics go to stderr; machine-readable output goes to files only.
"""

from __future__ import annotations

import argparse
import re
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import cnn, pgm
from .capture import load_capture, save_capture
from .errors import CamforgeError
from .methods import METHODS, SaliencyRequest, compute_saliency
from .segmentation import (
    EvalCase,
    accumulate_confusion,
    assemble_segmentation,
    compute_miou,
    compute_prf,
    delta_sweep,
    evaluate_cases,
    metrics_csv,
    sweep_csv,
)
from .shapes import NUM_CLASSES, generate_shapes

_IMAGE_RE = re.compile(r"^(?P<id>.+)_c(?P<label>\d+)$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(f"{self.format_usage()}error: {message}")


def _parse_size(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise ValueError(f"size must look like 32x32, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _parse_deltas(text: str) -> list[float]:
    m = re.fullmatch(r"([\d.]+):([\d.]+):([\d.]+)", text)
    if not m:
        raise ValueError(f"deltas must look like start:stop:step, got {text!r}")
    start, stop, step = (float(g) for g in m.groups())
    if step <= 0:
        raise ValueError("deltas step must be positive")
    out = []
    d = start
    while d <= stop + 1e-9:
        out.append(round(d, 9))
        d += step
    return out


def _layer_list(text: str) -> tuple[str, ...]:
    layers = tuple(name for name in text.split(",") if name)
    if not layers:
        raise ValueError("at least one layer name is required")
    return layers


def _load_shape_images(dataset: Path) -> list[tuple[str, int, np.ndarray]]:
    """Yields (image_id, label, (1,32,32) float image) sorted by id."""
    image_dir = dataset / "images"
    if not image_dir.is_dir():
        raise FileNotFoundError(f"no images/ directory under {dataset}")
    out = []
    for path in sorted(image_dir.glob("*.pgm")):
        m = _IMAGE_RE.fullmatch(path.stem)
        if not m:
            raise ValueError(f"image file {path.name} does not match <id>_c<label>.pgm")
        pixels = pgm.read_pgm(path)
        out.append((m.group("id"), int(m.group("label")), pgm.pixels_to_map(pixels)[None]))
    if not out:
        raise FileNotFoundError(f"no .pgm images under {image_dir}")
    return out


def _load_capture_dir(dataset: Path):
    paths = sorted(dataset.glob("*.camcap"))
    if not paths:
        raise FileNotFoundError(f"no .camcap files under {dataset}")
    grouped = defaultdict(list)
    for path in paths:
        cf = load_capture(path)
        grouped[cf.image_id].append(cf)
    return grouped


def _gt_mask_dir(path: Path) -> Path:
    return path / "masks" if (path / "masks").is_dir() else path


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    samples = generate_shapes(args.count, seed=args.seed)
    for i, s in enumerate(samples):
        stem = f"{i:05d}"
        pgm.write_pgm(out / "images" / f"{stem}_c{s.label}.pgm",
                      pgm.heatmap_to_pixels(s.image[0]))
        pgm.write_pgm(out / "masks" / f"{stem}.pgm", s.gt_mask.astype(np.uint8))
    print(f"wrote {len(samples)} samples to {out}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    images = _load_shape_images(Path(args.dataset))
    from .shapes import ShapesSample

    samples = [
        ShapesSample(image=img, label=label, gt_mask=np.zeros((32, 32), dtype=np.int64))
        for _, label, img in images
    ]
    num_classes = max(label for _, label, _ in images) + 1
    result = cnn.train(
        samples,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        batch_size=args.batch_size,
        num_classes=max(num_classes, NUM_CLASSES),
    )
    cnn.save_params_file(result.params, args.out)
    print(f"train accuracy {result.train_accuracy:.4f}; "
          f"model saved to {args.out}", file=sys.stderr)
    return 0


def _cmd_capture(args) -> int:
    params = cnn.load_params_file(args.model)
    if args.image is not None:
        if args.class_index is None:
            raise ValueError("--class-index is required with --image")
        pixels = pgm.read_pgm(args.image)
        image = pgm.pixels_to_map(pixels)[None]
        image_id = args.image_id or Path(args.image).stem
        cf = cnn.export_capture(params, image, args.class_index, image_id)
        save_capture(cf, args.out)
        print(f"wrote {args.out}", file=sys.stderr)
        return 0

    dataset = Path(args.dataset)
    out = Path(args.out)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    mask_dir = _gt_mask_dir(dataset)
    count = 0
    for image_id, label, image in _load_shape_images(dataset):
        cf = cnn.export_capture(params, image, label, image_id)
        save_capture(cf, out / f"{image_id}_c{label}.camcap")
        gt = mask_dir / f"{image_id}.pgm"
        if gt.exists():
            pgm.write_pgm(out / "masks" / f"{image_id}.pgm", pgm.read_pgm(gt))
        count += 1
    print(f"wrote {count} captures to {out}", file=sys.stderr)
    return 0


def _request(args, output_size) -> SaliencyRequest:
    return SaliencyRequest(
        method=args.method,
        layer_names=_layer_list(args.layers),
        delta=args.delta,
        output_size=output_size,
    )


def _cmd_cam(args) -> int:
    cf = load_capture(args.capture)
    size = _parse_size(args.size) if args.size else None
    heat = compute_saliency(cf, _request(args, size))
    pgm.write_pgm(args.out, pgm.heatmap_to_pixels(heat))
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _segment_case(captures, req_args) -> np.ndarray:
    size = captures[0].input.shape[1:]
    class_maps = {}
    for cf in captures:
        req = _request(req_args, size)
        class_maps[cf.class_index + 1] = compute_saliency(cf, req)
    return assemble_segmentation(class_maps, set(class_maps))


def _cmd_segment(args) -> int:
    if args.capture is not None:
        cf = load_capture(args.capture)
        mask = _segment_case([cf], args)
        pgm.write_pgm(args.out, mask.astype(np.uint8))
        print(f"wrote {args.out}", file=sys.stderr)
        return 0
    grouped = _load_capture_dir(Path(args.dataset))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for image_id in sorted(grouped):
        mask = _segment_case(grouped[image_id], args)
        pgm.write_pgm(out / f"{image_id}.pgm", mask.astype(np.uint8))
    print(f"wrote {len(grouped)} masks to {out}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    pred_dir = Path(args.pred)
    gt_dir = _gt_mask_dir(Path(args.gt))
    pred_paths = sorted(pred_dir.glob("*.pgm"))
    if not pred_paths:
        raise FileNotFoundError(f"no predicted masks under {pred_dir}")
    cm = np.zeros((args.classes + 1, args.classes + 1), dtype=np.int64)
    for pred_path in pred_paths:
        gt_path = gt_dir / pred_path.name
        if not gt_path.exists():
            raise FileNotFoundError(f"no ground-truth mask {gt_path}")
        accumulate_confusion(
            pgm.read_pgm(pred_path), pgm.read_pgm(gt_path), args.classes, into=cm
        )
    precision, recall, micro_f1 = compute_prf(cm)
    row = (
        args.method_label,
        args.layers_label,
        args.delta_label,
        f"{compute_miou(cm):.6f}",
        f"{precision:.6f}",
        f"{recall:.6f}",
        f"{micro_f1:.6f}",
        "",
    )
    Path(args.out).write_text(metrics_csv([row]), encoding="utf-8")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _build_cases(dataset: Path, num_classes: int) -> list[EvalCase]:
    grouped = _load_capture_dir(dataset)
    mask_dir = _gt_mask_dir(dataset)
    cases = []
    for image_id in sorted(grouped):
        gt_path = mask_dir / f"{image_id}.pgm"
        if not gt_path.exists():
            raise FileNotFoundError(f"no ground-truth mask {gt_path}")
        cases.append(EvalCase(captures=grouped[image_id], gt_mask=pgm.read_pgm(gt_path)))
    return cases


def _cmd_sweep(args) -> int:
    cases = _build_cases(Path(args.dataset), args.classes)
    result = delta_sweep(
        cases, args.method, _layer_list(args.layers), _parse_deltas(args.deltas),
        num_classes=args.classes,
    )
    Path(args.out).write_text(sweep_csv(result), encoding="utf-8")
    print(f"wrote {len(result.rows)} sweep rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_eval_captures(args) -> int:
    cases = _build_cases(Path(args.dataset), args.classes)
    cm, survival = evaluate_cases(
        cases, args.method, _layer_list(args.layers), args.delta, args.classes
    )
    precision, recall, micro_f1 = compute_prf(cm)
    row = (
        args.method,
        "+".join(_layer_list(args.layers)),
        f"{args.delta:g}",
        f"{compute_miou(cm):.6f}",
        f"{precision:.6f}",
        f"{recall:.6f}",
        f"{micro_f1:.6f}",
        f"{survival:.6f}",
    )
    Path(args.out).write_text(metrics_csv([row]), encoding="utf-8")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="camforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic shapes dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=600)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the built-in classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("capture", help="export activation/gradient captures")
    p.add_argument("--model", required=True)
    p.add_argument("--image")
    p.add_argument("--class-index", type=int)
    p.add_argument("--image-id")
    p.add_argument("--dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_capture)

    def add_method_flags(p, with_delta=True):
        p.add_argument("--method", required=True, choices=METHODS)
        p.add_argument("--layers", required=True, help="comma-separated layer names")
        if with_delta:
            p.add_argument("--delta", type=float, default=0.0)

    p = sub.add_parser("cam", help="compute one saliency heatmap")
    p.add_argument("--capture", required=True)
    add_method_flags(p)
    p.add_argument("--size", help="output size HxW (default: input size)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cam)

    p = sub.add_parser("segment", help="turn captures into label masks")
    p.add_argument("--capture")
    p.add_argument("--dataset")
    add_method_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", type=int, default=NUM_CLASSES)
    p.add_argument("--method-label", default="-")
    p.add_argument("--layers-label", default="-")
    p.add_argument("--delta-label", default="-")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("eval-captures", help="segment and score a capture dataset")
    p.add_argument("--dataset", required=True)
    add_method_flags(p)
    p.add_argument("--classes", type=int, default=NUM_CLASSES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval_captures)

    p = sub.add_parser("sweep", help="evaluate across truncation percentiles")
    p.add_argument("--dataset", required=True)
    add_method_flags(p, with_delta=False)
    p.add_argument("--deltas", required=True, help="start:stop:step, stop inclusive")
    p.add_argument("--classes", type=int, default=NUM_CLASSES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (CamforgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""camcap: capture a pretrained model's activations/gradients to CAMCAP v1.

    camcap --model vgg16 --weights vgg16.pth --image x.jpg --class 281 \
           --stages s1..s5 --out x_c281.camcap
    camcap --model smokevgg --list-stages
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from .capture import capture_image
from .errors import AdapterError
from .stages import STAGE_NAMES, list_stages

_RANGE = re.compile(r"^s(\d)\.\.s(\d)$")


def parse_stages(text: str) -> tuple[str, ...]:
    """Accepts a range like ``s1..s5`` or a comma list like ``s3,s4,s5``."""
    m = _RANGE.match(text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return tuple(f"s{i}" for i in range(lo, hi + 1))
    return tuple(name for name in text.split(",") if name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camcap", description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True, help="model id (vgg16, smokevgg)")
    parser.add_argument("--weights", help="path to a state-dict checkpoint")
    parser.add_argument("--image", help="input image file")
    parser.add_argument("--class", dest="class_index", type=int, help="target class index")
    parser.add_argument("--stages", default="s1..s5", help="s1..s5 or comma list")
    parser.add_argument("--out", help="output .camcap path")
    parser.add_argument(
        "--list-stages", action="store_true", help="print stage table as JSON and exit"
    )
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.list_stages:
            specs = list_stages(args.model, weights=args.weights)
            print(
                json.dumps(
                    [
                        {"name": s.name, "module": s.module_path, "shape": list(s.shape)}
                        for s in specs
                    ],
                    indent=2,
                )
            )
            return 0
        if not args.image or args.class_index is None or not args.out:
            parser.error("--image, --class and --out are required unless --list-stages")
        stages = parse_stages(args.stages)
        record = capture_image(
            args.model,
            args.image,
            args.class_index,
            stages=stages if stages else STAGE_NAMES,
            out_path=args.out,
            weights=args.weights,
        )
        print(
            f"wrote {args.out} (score {record.score:.4f}, "
            f"{len(record.stages)} stages)",
            file=sys.stderr,
        )
        return 0
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command line for the feature exporter."""

from __future__ import annotations

import argparse
import sys

from .export import export, manifest_path
from .manifest import BACKBONES, DATASETS
from .networks import ShapeMismatchError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="a2lp-export",
        description="Export novel-split embeddings from a pretrained backbone "
        "into the engine's binary format.",
    )
    parser.add_argument("--dataset", required=True, choices=DATASETS)
    parser.add_argument("--backbone", required=True, choices=BACKBONES)
    parser.add_argument("--checkpoint", required=True, help="pretrained weights (.pt/.pth)")
    parser.add_argument(
        "--data-root", required=True,
        help="directory containing one subdirectory of images per novel class",
    )
    parser.add_argument("--out", required=True, help="output embeddings file")
    parser.add_argument("--image-size", type=int, default=84)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--workers", type=int, default=0)
    parser.add_argument(
        "--no-strict", action="store_true",
        help="allow a class count that differs from the published novel split",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export(
            dataset=args.dataset,
            backbone=args.backbone,
            checkpoint_path=args.checkpoint,
            data_root=args.data_root,
            out_path=args.out,
            image_size=args.image_size,
            batch_size=args.batch_size,
            device=args.device,
            num_workers=args.workers,
            strict=not args.no_strict,
        )
    except (FileNotFoundError, ValueError, ShapeMismatchError) as exc:
        print(f"a2lp-export: error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {manifest.row_count} x {manifest.dim} embeddings "
        f"({len(manifest.classes)} classes) to {args.out}"
    )
    print(f"manifest: {manifest_path(args.out)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

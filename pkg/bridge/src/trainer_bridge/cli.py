"""Command line entry points: `serve` and `make-dataset`."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .data import (DataError, DatasetSpec, make_random_labels, make_separable,
                   save_dataset)
from .server import Bridge, serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainer-bridge",
        description="Training service for the evaluation protocol")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="answer evaluation requests")
    serve.add_argument("--dataset", required=True,
                       help="directory with images.npy and labels.npy")
    serve.add_argument("--name", default="dataset", help="dataset name tag")
    serve.add_argument("--num-classes", type=int, required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=7077)
    serve.add_argument("--stdio", action="store_true",
                       help="serve over stdin/stdout instead of TCP")
    serve.add_argument("--batch-size", type=int, default=64)
    serve.add_argument("--split-seed", type=int, default=0,
                       help="seed for the fixed train-part/test-part split")

    make = sub.add_parser("make-dataset", help="write a synthetic dataset")
    make.add_argument("--out", required=True)
    make.add_argument("--kind", choices=("separable", "random-labels"),
                      default="separable")
    make.add_argument("--samples", type=int, default=2000)
    make.add_argument("--num-classes", type=int, default=10)
    make.add_argument("--channels", type=int, default=3)
    make.add_argument("--spatial", type=int, default=16)
    make.add_argument("--seed", type=int, default=0)
    return parser


def cmd_serve(args: argparse.Namespace) -> int:
    spec = DatasetSpec(name=args.name, path=args.dataset,
                       num_classes=args.num_classes)
    try:
        bridge = Bridge(spec, batch_size=args.batch_size,
                        split_seed=args.split_seed)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.stdio:
            serve_stdio(bridge)
        else:
            serve_tcp(bridge, args.host, args.port)
    except KeyboardInterrupt:
        pass
    return 0


def cmd_make_dataset(args: argparse.Namespace) -> int:
    maker = make_separable if args.kind == "separable" else make_random_labels
    images, labels = maker(args.samples, args.num_classes, args.seed,
                           channels=args.channels, spatial=args.spatial)
    save_dataset(args.out, images, labels)
    print(os.path.join(args.out, "images.npy"))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("BRIDGE_LOG", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_make_dataset(args)


if __name__ == "__main__":
    sys.exit(main())

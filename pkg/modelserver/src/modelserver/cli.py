"""Command-line front end: ``train`` reference models, ``serve`` one of them."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .protocol import serve
from .training import TrainingError, train_reference_models


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelserver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit RF/GBT/NN on a discretized CSV")
    p_train.add_argument("--csv", required=True, type=Path)
    p_train.add_argument("--schema", required=True, type=Path, help="schema config JSON")
    p_train.add_argument("--out-dir", required=True, type=Path)
    p_train.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="answer prediction requests line by line")
    p_serve.add_argument("--model", required=True, type=Path, help="fitted model file")
    p_serve.add_argument("--tcp", type=int, help="listen on this port instead of stdio")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        schema_config = json.loads(args.schema.read_text())
        try:
            report = train_reference_models(
                args.csv, schema_config, args.out_dir, seed=args.seed
            )
        except TrainingError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for name, accuracy in report["accuracy"].items():
            print(f"{name}: holdout accuracy {accuracy:.3f} "
                  f"(majority baseline {report['majority_baseline']:.3f})")
        return 0
    serve(args.model, tcp_port=args.tcp)
    return 0


if __name__ == "__main__":
    sys.exit(main())

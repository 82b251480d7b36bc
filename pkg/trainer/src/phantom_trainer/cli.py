"""Command-line entry point for the stream-consuming trainer."""

from __future__ import annotations

import argparse
import socket
import sys
from pathlib import Path

from .train import TrainConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phantom-trainer")
    parser.add_argument(
        "--stream",
        default="-",
        help="batch stream source: a file path, or - for stdin",
    )
    parser.add_argument("--connect", help="host:port of a TCP stream producer")
    parser.add_argument("--val-manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-epochs", type=int, default=TrainConfig.max_epochs)
    parser.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    parser.add_argument("--input-size", type=int, default=TrainConfig.input_size)
    parser.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    parser.add_argument("--dropout", type=float, default=TrainConfig.dropout)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        dropout=args.dropout,
        input_size=args.input_size,
    )
    if args.connect:
        host, _, port = args.connect.rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)))
        stream = sock.makefile("rb")
    elif args.stream == "-":
        stream = sys.stdin.buffer
    else:
        stream = open(args.stream, "rb")
    try:
        result = train(stream, args.val_manifest, cfg, args.seed, args.out)
    finally:
        stream.close()
    last = result.curve.val_loss[-1] if result.curve.val_loss else float("nan")
    print(
        f"trained {len(result.curve.epochs)} epochs, "
        f"final val loss {last:.4f}, val accuracy {result.accuracy:.2f}%"
    )
    print(f"loss csv: {result.loss_csv}")
    print(f"preds csv: {result.preds_csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

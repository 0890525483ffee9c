"""Entry point: ``load-adapter --model <id> [--seed N]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .backends import MODEL_IDS, AdapterConfig
from .protocol import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="load-adapter",
        description="serve a pre-trained forecaster over the wire protocol",
    )
    parser.add_argument("--model", required=True, help=f"one of {', '.join(MODEL_IDS)}")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--cache-dir", default=None, help="hub download cache directory")
    parser.add_argument(
        "--offline", action="store_true", help="forbid downloads; use cached weights only"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    # Protocol messages own stdout; all logging goes to stderr.
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    config = AdapterConfig(
        model_id=args.model,
        seed=args.seed,
        device=args.device,
        cache_dir=args.cache_dir,
        offline=args.offline,
    )
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())

"""Serve the scoring endpoint: load one causal LM and stay up."""

from __future__ import annotations

import argparse
import os
import sys

from .app import create_app
from .model import PerplexityModel


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lm-scoring-service",
        description="Sentence-perplexity scoring over HTTP with a causal LM.",
    )
    parser.add_argument(
        "--model",
        default=os.environ.get("LM_SCORING_MODEL", "gpt2"),
        help="model id or local path (English: gpt2; French: asi/gpt-fr-cased-base)",
    )
    parser.add_argument("--host", default=os.environ.get("LM_SCORING_HOST", "127.0.0.1"))
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("LM_SCORING_PORT", "8000"))
    )
    parser.add_argument(
        "--max-batch",
        type=int,
        default=int(os.environ.get("LM_SCORING_MAX_BATCH", "256")),
    )
    parser.add_argument(
        "--device", default=os.environ.get("LM_SCORING_DEVICE", "cpu")
    )
    return parser


def main(argv=None) -> int:
    import uvicorn

    args = build_parser().parse_args(argv)
    try:
        model = PerplexityModel(args.model, device=args.device)
    except Exception as err:
        print(f"failed to load model {args.model!r}: {err}", file=sys.stderr)
        return 1
    app = create_app(model, max_batch=args.max_batch)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point for the encoder sidecar.

Exit codes mirror the pipeline's conventions: 0 success, 1 invalid input,
2 missing input file, 3 encoder backend failure. The last stdout line is a
single summary (count, dim, wall time) for the calling process to relay.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from hs_embed import __version__
from hs_embed.encoder import (
    DEFAULT_MAX_LENGTH,
    DEFAULT_MODEL,
    HASHED_BACKEND,
    EncodeError,
    EncodeRequest,
    EncoderLoadError,
    encode_documents,
)
from hs_embed.vecfile import VectorWriteError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MISSING_INPUT = 2
EXIT_ENCODER = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hs-embed",
        description="Encode documents into the binary vector file consumed by the "
                    "evaluation pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help=f"encoder name, or {HASHED_BACKEND!r} for the offline "
                             f"stand-in (default: {DEFAULT_MODEL})")
    parser.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH,
                        help="token budget per document before truncation")
    parser.add_argument("--device", default="cpu", help="inference device")
    sub = parser.add_subparsers(dest="command", required=True)
    enc = sub.add_parser("encode", help="encode an id+text JSONL file")
    enc.add_argument("--input", type=Path, required=True,
                     help="line-delimited JSON records with id and text")
    enc.add_argument("--output", type=Path, required=True,
                     help="vector file to write (metadata lands beside it)")
    enc.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if not args.input.exists():
        print(f"hs-embed: missing input file {args.input}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    try:
        result = encode_documents(EncodeRequest(
            input_path=args.input,
            output_path=args.output,
            batch_size=args.batch_size,
            model=args.model,
            max_length=args.max_length,
            device=args.device,
        ))
    except EncoderLoadError as exc:
        print(f"hs-embed: {exc}", file=sys.stderr)
        return EXIT_ENCODER
    except (EncodeError, VectorWriteError) as exc:
        print(f"hs-embed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"hs-embed: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT

    for doc_id in result.truncated:
        print(f"hs-embed: warning: {doc_id} exceeded {args.max_length} tokens, truncated",
              file=sys.stderr)
    print(f"encoded {result.count} documents dim={result.dim} "
          f"in {result.seconds:.2f}s")
    return EXIT_OK


def run(argv=None) -> None:
    raise SystemExit(main(argv))


if __name__ == "__main__":
    run()

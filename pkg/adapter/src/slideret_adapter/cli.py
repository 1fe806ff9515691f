"""CLI entry points: caption, export, serve-scorer."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import BackendError
from .captioning import DEFAULT_CAPTION_PROMPT, CaptionJob, caption_slides
from .exporting import (
    ExportJob,
    export_caption_embeddings,
    export_image_embeddings,
    export_query_embeddings,
)
from .scorer_server import serve
from .stores import ExportError


def cmd_caption(args) -> int:
    job = CaptionJob(
        image_paths=[Path(p) for p in args.images],
        model=args.model,
        prompt=args.prompt,
        output_manifest=Path(args.out),
        append=args.append,
    )
    outcome = caption_slides(job)
    print(f"captioned {outcome.written}/{len(job.image_paths)} slides -> {args.out}")
    return 1 if outcome.failures else 0


def cmd_export(args) -> int:
    job = ExportJob(
        store_path=Path(args.out), encoder=args.encoder, kind=args.kind, dtype=args.dtype, dim=args.dim
    )
    if args.images:
        emb, ids = export_image_embeddings(job, [Path(p) for p in args.images], patches=args.patches)
    elif args.manifest:
        emb, ids = export_caption_embeddings(job, args.manifest)
    elif args.queries:
        pairs = []
        with open(args.queries, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    pairs.append((str(obj["query_id"]), str(obj["text"])))
        emb, ids = export_query_embeddings(job, pairs)
    else:
        raise BackendError("export needs --manifest, --queries, or --images")
    print(f"exported {emb} / {ids}")
    return 0


def cmd_serve_scorer(args) -> int:
    return serve(args.model)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slideret-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("caption", help="caption slide images into manifest records")
    p.add_argument("images", nargs="+")
    p.add_argument("--model", default="stub")
    p.add_argument("--prompt", default=DEFAULT_CAPTION_PROMPT)
    p.add_argument("--out", required=True)
    p.add_argument("--append", action="store_true")
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("export", help="export embeddings into an engine store")
    p.add_argument("--manifest", help="encode captions from this manifest")
    p.add_argument("--queries", help="encode query texts from this queries file")
    p.add_argument("--images", nargs="*", help="encode these image files (kind=multi)")
    p.add_argument("--encoder", default="stub")
    p.add_argument("--kind", default="single", choices=["single", "multi"])
    p.add_argument("--dtype", default=None, choices=["fp32", "fp16"],
                   help="default: fp32 for single, fp16 for multi")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--patches", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve-scorer", help="serve a reranker over the scorer line protocol")
    p.add_argument("--model", default="stub")
    p.set_defaults(func=cmd_serve_scorer)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BackendError, ExportError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

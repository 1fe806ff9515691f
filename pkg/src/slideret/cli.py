"""Command-line surface: ingest, index, run, eval, report, selftest.

Exit codes: 0 success, 1 validation error, 2 runtime/stage error.
Run files are deterministic given identical inputs; timing files are the
only non-reproducible artifact and are written separately.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bm25 import build_index
from .config import ExperimentConfig, build_pipeline
from .errors import StageError, ValidationError
from .metrics import (
    aggregate,
    read_timings,
    render_table,
    report_from_kv,
    report_to_kv,
    write_timings,
)
from .pipeline import ExternalScorer, run_pipeline
from .results import write_run
from .selftest import run_selftest
from .store import load_manifest, load_qrels, load_queries, read_embeddings, storage_report


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest)
    doc_ids = manifest.doc_ids()
    queries = load_queries(args.queries) if args.queries else []
    query_ids = {q.query_id for q in queries}
    problems: list[str] = []

    if args.qrels:
        qrels = load_qrels(args.qrels)
        for query_id, docs in sorted(qrels.items()):
            for doc_id in sorted(docs - doc_ids):
                problems.append(f"qrels doc {doc_id!r} (query {query_id!r}) not in manifest")
            if args.queries and query_id not in query_ids:
                problems.append(f"qrels query {query_id!r} not in queries file")

    n_stores = 0
    for store in args.store or []:
        entries = read_embeddings(store)
        n_stores += 1
        for e in entries:
            if e.doc_id not in doc_ids:
                problems.append(f"store {store}: embedding id {e.doc_id!r} not in manifest")
    for store in args.query_store or []:
        entries = read_embeddings(store)
        n_stores += 1
        for e in entries:
            if args.queries and e.doc_id not in query_ids:
                problems.append(f"store {store}: embedding id {e.doc_id!r} not in queries file")

    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        raise ValidationError(f"{len(problems)} dangling reference(s)")
    print(f"ok: {manifest.count} docs, {len(queries)} queries, {n_stores} stores")
    return 0


def cmd_index_build(args) -> int:
    if args.kind != "bm25":
        raise ValidationError(f"unsupported index kind {args.kind!r} (only bm25 is persisted)")
    manifest = load_manifest(args.manifest)
    docs = [
        (d.doc_id, d.caption if args.field == "caption" else (d.ocr_text or ""))
        for d in manifest.docs
    ]
    index = build_index(docs, field_name=args.field)
    index.save(args.out)
    print(f"ok: indexed {index.n_docs} docs ({args.field}) -> {args.out}")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    pipeline, queries, manifest = build_pipeline(config)
    try:
        runs, timings = run_pipeline(pipeline, queries, manifest.by_id())
    finally:
        if isinstance(pipeline.scorer, ExternalScorer):
            pipeline.scorer.close()
    write_run(runs, args.out, tag=config.label)
    timings_path = args.timings or (str(args.out) + ".timings")
    write_timings({q: tuple(t) for q, t in timings.items()}, timings_path)
    print(f"ok: {len(runs)} queries -> {args.out} (timings: {timings_path})")
    return 0


def cmd_eval(args) -> int:
    timings = read_timings(args.timings) if args.timings else None
    storage_gb = args.storage_gb
    if storage_gb is None:
        storage_gb = storage_report(args.storage or []).total_gb
    report = aggregate(
        args.run,
        args.qrels,
        timings=timings,
        label=args.label or Path(args.run).stem,
        storage_gb=storage_gb,
    )
    print(render_table([report]))
    if args.out:
        Path(args.out).write_text(report_to_kv(report), encoding="utf-8")
    return 0


def cmd_report(args) -> int:
    reports = [report_from_kv(path) for path in args.results]
    print(render_table(reports))
    return 0


def cmd_selftest(args) -> int:
    if not run_selftest():
        raise StageError("selftest failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slideret", description="Slide retrieval benchmark engine."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a workspace of artifacts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--queries")
    p.add_argument("--qrels")
    p.add_argument("--store", action="append", help="doc embedding store (repeatable)")
    p.add_argument("--query-store", action="append", dest="query_store")
    p.set_defaults(func=cmd_ingest)

    p_index = sub.add_parser("index", help="build persistent indexes")
    sub_index = p_index.add_subparsers(dest="index_command", required=True)
    p = sub_index.add_parser("build")
    p.add_argument("--kind", required=True, choices=["bm25"])
    p.add_argument("--manifest", required=True)
    p.add_argument("--field", default="caption", choices=["caption", "ocr"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_build)

    p = sub.add_parser("run", help="run a pipeline configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timings", help="timing file path (default: <out>.timings)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--timings")
    p.add_argument("--storage", action="append", help="artifact path to measure (repeatable)")
    p.add_argument("--storage-gb", type=float, dest="storage_gb")
    p.add_argument("--label")
    p.add_argument("--out", help="write machine-readable key-value report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="combine eval outputs into one table")
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the built-in oracle suites")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

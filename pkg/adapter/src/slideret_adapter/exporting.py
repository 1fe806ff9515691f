"""Embedding export into engine stores.

Caption exports read manifest records and encode the caption field;
image exports encode the files directly into patch matrices. Either way
the output is an ``.emb``/``.ids`` pair the engine validates, plus a
``.meta`` line recording the encoder and preprocessing provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .backends import IMAGE_ENCODERS, TEXT_ENCODERS, BackendError, resolve
from .stores import write_store


@dataclass
class ExportJob:
    store_path: Path
    encoder: str = "stub"
    kind: str = "single"  # single | multi
    dtype: str | None = None  # defaults per kind: fp32 single, fp16 multi
    dim: int = 8

    def validate(self) -> None:
        if self.kind not in ("single", "multi"):
            raise BackendError(f"kind must be single or multi, got {self.kind!r}")
        if self.dtype is None:
            self.dtype = "fp32" if self.kind == "single" else "fp16"
        if self.dtype not in ("fp32", "fp16"):
            raise BackendError(f"dtype must be fp32 or fp16, got {self.dtype!r}")


def read_manifest_captions(manifest_path: str | Path) -> list[tuple[str, str]]:
    pairs = []
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                pairs.append((str(obj["doc_id"]), str(obj.get("caption") or "")))
            except (json.JSONDecodeError, KeyError) as exc:
                raise BackendError(f"{manifest_path}: line {lineno}: bad record ({exc})") from exc
    return pairs


def export_caption_embeddings(job: ExportJob, manifest_path: str | Path) -> tuple[Path, Path]:
    job.validate()
    encoder = resolve(TEXT_ENCODERS, job.encoder, "text encoder")(dim=job.dim)
    items = []
    for doc_id, caption in read_manifest_captions(manifest_path):
        matrix = encoder.encode_single(caption) if job.kind == "single" else encoder.encode_multi(caption)
        items.append((doc_id, matrix))
    meta = {
        "encoder": job.encoder,
        "input": "captions",
        "kind": job.kind,
        "dtype": job.dtype,
        "preprocessor": "caption text as-is",
    }
    return write_store(job.store_path, items, kind=job.kind, dtype=job.dtype, metadata=meta)


def export_image_embeddings(job: ExportJob, image_paths: list[Path], patches: int = 16) -> tuple[Path, Path]:
    job.validate()
    if job.kind != "multi":
        raise BackendError("image export produces patch matrices; use kind=multi")
    encoder = resolve(IMAGE_ENCODERS, job.encoder, "image encoder")(patches=patches, dim=job.dim)
    items = [(Path(p).stem, encoder.encode(Path(p))) for p in image_paths]
    meta = {
        "encoder": job.encoder,
        "input": "images",
        "kind": job.kind,
        "dtype": job.dtype,
        "preprocessor": f"{patches} hash-seeded patches (stub default)",
    }
    return write_store(job.store_path, items, kind=job.kind, dtype=job.dtype, metadata=meta)


def export_query_embeddings(
    job: ExportJob, queries: list[tuple[str, str]]
) -> tuple[Path, Path]:
    """Encode (query_id, text) pairs with the same text encoder as captions."""
    job.validate()
    encoder = resolve(TEXT_ENCODERS, job.encoder, "text encoder")(dim=job.dim)
    items = []
    for query_id, text in queries:
        matrix = encoder.encode_single(text) if job.kind == "single" else encoder.encode_multi(text)
        items.append((query_id, matrix))
    meta = {"encoder": job.encoder, "input": "queries", "kind": job.kind, "dtype": job.dtype}
    return write_store(job.store_path, items, kind=job.kind, dtype=job.dtype, metadata=meta)

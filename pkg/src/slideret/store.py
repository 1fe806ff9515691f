"""Corpus data model and on-disk artifact formats.

Three artifact kinds live here:

* Corpus manifests and query files: JSON Lines (one self-describing
  key-value record per line, UTF-8, LF).
* Qrels: TREC-style text lines ``query_id 0 doc_id relevance`` with
  binary relevance.
* Embedding stores: a binary ``<name>.emb`` file plus a ``<name>.ids``
  sidecar listing one doc_id per line, row-order aligned.

``.emb`` layout (all integers little-endian):

    magic     4 bytes  b"SLEM"
    version   1 byte   0x01
    kind      1 byte   0x01 single-vector, 0x02 multi-vector
    dtype     1 byte   0x01 fp32, 0x02 fp16
    dim       u32
    count     u32      number of records
    records   count times: row count t as u32, then t*dim values

Stores are immutable after a successful write. A single writer per
store path is enforced via a ``<name>.lock`` file created O_EXCL.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"SLEM"
VERSION = 1
KIND_SINGLE = 1
KIND_MULTI = 2
DTYPE_FP32 = 1
DTYPE_FP16 = 2

_DTYPE_CODES = {"fp32": DTYPE_FP32, "fp16": DTYPE_FP16}
_DTYPE_NP = {"fp32": np.dtype("<f4"), "fp16": np.dtype("<f2")}
FP16_MAX = float(np.finfo(np.float16).max)  # 65504.0


@dataclass
class SlideDoc:
    """One slide: identifiers plus whatever content artifacts exist for it."""

    doc_id: str
    deck_id: str
    caption: str = ""
    ocr_text: str | None = None
    image_path: str | None = None

    def validate(self) -> None:
        if not self.doc_id:
            raise ValidationError("doc_id must be non-empty")
        if not self.caption and self.ocr_text is None and self.image_path is None:
            raise ValidationError(
                f"doc {self.doc_id!r}: at least one of caption, ocr_text, image_path required"
            )


@dataclass
class Query:
    query_id: str
    text: str

    def validate(self) -> None:
        if not self.query_id:
            raise ValidationError("query_id must be non-empty")
        if not self.text:
            raise ValidationError(f"query {self.query_id!r}: text must be non-empty")


@dataclass
class CorpusManifest:
    docs: list[SlideDoc]
    dataset: str = ""

    @property
    def count(self) -> int:
        return len(self.docs)

    def doc_ids(self) -> set[str]:
        return {d.doc_id for d in self.docs}

    def by_id(self) -> dict[str, SlideDoc]:
        return {d.doc_id: d for d in self.docs}


@dataclass
class EmbeddingMatrix:
    """A t x dim block of vectors for one document (t = 1 for single-vector)."""

    doc_id: str
    values: np.ndarray  # shape (t, dim), float32 or float16

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


@dataclass
class BenchStorage:
    """Per-artifact byte counts plus a GiB total (GB means GiB, 2^30 bytes)."""

    bytes_per_path: dict[str, int] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_per_path.values())

    @property
    def total_gb(self) -> float:
        return round(self.total_bytes / 2**30, 3)


# ---------------------------------------------------------------------------
# Manifest / query / qrels files


def _parse_jsonl(path: str | Path) -> list[tuple[int, dict]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid record ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"{path}: line {lineno}: expected a key-value record")
            records.append((lineno, obj))
    return records


def load_manifest(path: str | Path, dataset: str = "") -> CorpusManifest:
    """Load and validate a corpus manifest; duplicate doc_ids are rejected."""
    docs: list[SlideDoc] = []
    seen: set[str] = set()
    for lineno, obj in _parse_jsonl(path):
        try:
            doc = SlideDoc(
                doc_id=str(obj["doc_id"]),
                deck_id=str(obj.get("deck_id", "")),
                caption=str(obj.get("caption") or ""),
                ocr_text=obj.get("ocr_text"),
                image_path=obj.get("image_path"),
            )
        except KeyError as exc:
            raise FormatError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from exc
        doc.validate()
        if doc.doc_id in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return CorpusManifest(docs=docs, dataset=dataset)


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in manifest.docs:
            rec: dict = {"doc_id": doc.doc_id, "deck_id": doc.deck_id, "caption": doc.caption}
            if doc.ocr_text is not None:
                rec["ocr_text"] = doc.ocr_text
            if doc.image_path is not None:
                rec["image_path"] = doc.image_path
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_queries(path: str | Path) -> list[Query]:
    queries: list[Query] = []
    seen: set[str] = set()
    for lineno, obj in _parse_jsonl(path):
        try:
            q = Query(query_id=str(obj["query_id"]), text=str(obj["text"]))
        except KeyError as exc:
            raise FormatError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from exc
        q.validate()
        if q.query_id in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate query_id {q.query_id!r}")
        seen.add(q.query_id)
        queries.append(q)
    return queries


def save_queries(queries: list[Query], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            fh.write(json.dumps({"query_id": q.query_id, "text": q.text}, ensure_ascii=False) + "\n")


def load_qrels(path: str | Path) -> dict[str, set[str]]:
    """Parse TREC qrels (``query_id 0 doc_id relevance``, relevance in {0,1}).

    Returns query_id -> set of relevant doc_ids. A query judged only
    non-relevant violates the non-empty-set invariant and is rejected.
    """
    qrels: dict[str, set[str]] = {}
    mentioned: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}: line {lineno}: expected 4 fields, got {len(parts)}")
            query_id, _, doc_id, rel = parts
            if rel not in ("0", "1"):
                raise FormatError(f"{path}: line {lineno}: relevance must be 0 or 1, got {rel!r}")
            mentioned.add(query_id)
            if rel == "1":
                qrels.setdefault(query_id, set()).add(doc_id)
    empty = sorted(mentioned - set(qrels))
    if empty:
        raise ValidationError(f"{path}: queries with no relevant doc: {', '.join(empty)}")
    return qrels


def save_qrels(qrels: dict[str, set[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for query_id in sorted(qrels):
            for doc_id in sorted(qrels[query_id]):
                fh.write(f"{query_id} 0 {doc_id} 1\n")


# ---------------------------------------------------------------------------
# Embedding stores


def store_paths(store_path: str | Path) -> tuple[Path, Path]:
    """Resolve a store reference (with or without .emb suffix) to (.emb, .ids)."""
    p = Path(store_path)
    if p.suffix == ".emb":
        p = p.with_suffix("")
    return p.with_suffix(".emb"), p.with_suffix(".ids")


def write_embeddings(
    store_path: str | Path,
    entries: list[EmbeddingMatrix],
    dtype: str | None = None,
    kind: str | None = None,
) -> int:
    """Write an embedding store; returns total bytes on disk (.emb + .ids).

    kind defaults to "single" when every entry has one row, else "multi".
    dtype defaults to fp32 for single-vector stores and fp16 for
    multi-vector ones (the space-saving choice where it matters). fp16
    rejects values outside the representable range instead of silently
    overflowing to inf.
    """
    dims = {e.dim for e in entries}
    if len(dims) > 1:
        raise ValidationError(f"entries disagree on dim: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    if kind is None:
        kind = "single" if all(e.rows == 1 for e in entries) else "multi"
    if kind not in ("single", "multi"):
        raise ValidationError(f"unsupported kind {kind!r}")
    if dtype is None:
        dtype = "fp32" if kind == "single" else "fp16"
    if dtype not in _DTYPE_CODES:
        raise ValidationError(f"unsupported dtype {dtype!r} (expected fp32 or fp16)")
    if kind == "single":
        bad = [e.doc_id for e in entries if e.rows != 1]
        if bad:
            raise ValidationError(f"single-vector store requires t=1, violated by: {bad[:5]}")

    emb_path, ids_path = store_paths(store_path)
    lock_path = emb_path.with_suffix(".lock")
    try:
        lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ValidationError(f"store {emb_path} is locked by another writer ({lock_path})")
    try:
        np_dtype = _DTYPE_NP[dtype]
        with open(emb_path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(bytes([VERSION, KIND_SINGLE if kind == "single" else KIND_MULTI, _DTYPE_CODES[dtype]]))
            fh.write(np.uint32(dim).tobytes())
            fh.write(np.uint32(len(entries)).tobytes())
            for e in entries:
                block = np.asarray(e.values, dtype=np.float64)
                if not np.isfinite(block).all():
                    raise ValidationError(f"doc {e.doc_id!r}: non-finite value in embedding")
                if dtype == "fp16" and np.abs(block).max(initial=0.0) > FP16_MAX:
                    raise ValidationError(f"doc {e.doc_id!r}: value out of fp16 range")
                fh.write(np.uint32(e.rows).tobytes())
                fh.write(block.astype(np_dtype).tobytes())
        with open(ids_path, "w", encoding="utf-8", newline="\n") as fh:
            for e in entries:
                fh.write(e.doc_id + "\n")
    finally:
        os.close(lock_fd)
        os.unlink(lock_path)
    return emb_path.stat().st_size + ids_path.stat().st_size


def read_embeddings(store_path: str | Path) -> list[EmbeddingMatrix]:
    """Read a store back; values keep their on-disk dtype (fp16 or fp32)."""
    entries, _, _ = read_embeddings_meta(store_path)
    return entries


def read_embeddings_meta(store_path: str | Path) -> tuple[list[EmbeddingMatrix], str, str]:
    """As read_embeddings, also returning (entries, kind, dtype)."""
    emb_path, ids_path = store_paths(store_path)
    if not emb_path.exists():
        raise FormatError(f"missing store file {emb_path}")
    if not ids_path.exists():
        raise FormatError(f"missing sidecar {ids_path}")
    data = emb_path.read_bytes()
    if len(data) < 15:
        raise FormatError(f"{emb_path}: truncated header")
    if data[:4] != MAGIC:
        raise FormatError(f"{emb_path}: bad magic bytes {data[:4]!r}")
    if data[4] != VERSION:
        raise FormatError(f"{emb_path}: unsupported version {data[4]}")
    kind_code, dtype_code = data[5], data[6]
    if kind_code not in (KIND_SINGLE, KIND_MULTI):
        raise FormatError(f"{emb_path}: unknown kind byte {kind_code:#x}")
    if dtype_code not in (DTYPE_FP32, DTYPE_FP16):
        raise FormatError(f"{emb_path}: unknown dtype byte {dtype_code:#x}")
    kind = "single" if kind_code == KIND_SINGLE else "multi"
    dtype = "fp32" if dtype_code == DTYPE_FP32 else "fp16"
    np_dtype = _DTYPE_NP[dtype]
    dim = int(np.frombuffer(data, dtype="<u4", count=1, offset=7)[0])
    count = int(np.frombuffer(data, dtype="<u4", count=1, offset=11)[0])

    ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(ids) != count:
        raise FormatError(
            f"{ids_path}: sidecar lists {len(ids)} ids but payload declares {count} records"
        )

    entries: list[EmbeddingMatrix] = []
    offset = 15
    for i in range(count):
        if offset + 4 > len(data):
            raise FormatError(f"{emb_path}: truncated at record {i}")
        t = int(np.frombuffer(data, dtype="<u4", count=1, offset=offset)[0])
        offset += 4
        if t < 1:
            raise FormatError(f"{emb_path}: record {i} has row count {t}")
        nbytes = t * dim * np_dtype.itemsize
        if offset + nbytes > len(data):
            raise FormatError(f"{emb_path}: truncated payload at record {i}")
        block = np.frombuffer(data, dtype=np_dtype, count=t * dim, offset=offset).reshape(t, dim)
        offset += nbytes
        if kind == "single" and t != 1:
            raise FormatError(f"{emb_path}: single-vector store has record with t={t}")
        if not np.isfinite(block.astype(np.float32)).all():
            raise FormatError(f"{emb_path}: non-finite value in record {ids[i]!r}")
        entries.append(EmbeddingMatrix(doc_id=ids[i], values=block.copy()))
    if offset != len(data):
        raise FormatError(f"{emb_path}: {len(data) - offset} trailing bytes after last record")
    return entries, kind, dtype


def storage_report(paths: list[str | Path]) -> BenchStorage:
    """Sum on-disk sizes; GB = GiB = 2^30 bytes, reported to 3 decimals."""
    report = BenchStorage()
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise ValidationError(f"missing artifact: {p}")
        report.bytes_per_path[str(p)] = p.stat().st_size
    return report

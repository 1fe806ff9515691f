"""Writer for the engine's embedding store format.

Independent implementation of the ``.emb``/``.ids`` layout the engine
reads (see the engine's store docs): magic ``SLEM``, version 0x01, kind
byte, dtype byte, dim and record count as u32 LE, then per record a u32
row count followed by the little-endian values. A ``.meta`` JSON sidecar
records encoder/preprocessing provenance; the engine ignores it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SLEM"
VERSION = 1
KIND_BYTES = {"single": 1, "multi": 2}
DTYPE_BYTES = {"fp32": 1, "fp16": 2}
_PACK = {"fp32": "<f4", "fp16": "<f2"}


class ExportError(Exception):
    pass


def write_store(
    store_path: str | Path,
    items: list[tuple[str, np.ndarray]],
    kind: str,
    dtype: str | None = None,
    metadata: dict | None = None,
) -> tuple[Path, Path]:
    """Write (doc_id, matrix) items; matrices are t x d, t=1 for single.

    dtype defaults to the engine convention: fp32 single, fp16 multi."""
    if kind not in KIND_BYTES:
        raise ExportError(f"kind must be single or multi, got {kind!r}")
    if dtype is None:
        dtype = "fp32" if kind == "single" else "fp16"
    if dtype not in DTYPE_BYTES:
        raise ExportError(f"dtype must be fp32 or fp16, got {dtype!r}")
    dims = {m.shape[1] for _, m in items}
    if len(dims) > 1:
        raise ExportError(f"dim drift across items: {sorted(dims)}")
    dim = dims.pop() if dims else 0

    base = Path(store_path)
    if base.suffix == ".emb":
        base = base.with_suffix("")
    emb_path, ids_path = base.with_suffix(".emb"), base.with_suffix(".ids")

    with open(emb_path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BBB", VERSION, KIND_BYTES[kind], DTYPE_BYTES[dtype]))
        fh.write(struct.pack("<II", dim, len(items)))
        for doc_id, matrix in items:
            if matrix.ndim != 2:
                raise ExportError(f"{doc_id}: expected a 2-d matrix, got shape {matrix.shape}")
            if kind == "single" and matrix.shape[0] != 1:
                raise ExportError(f"{doc_id}: single-vector store needs one row")
            if not np.isfinite(matrix).all():
                raise ExportError(f"{doc_id}: non-finite embedding value")
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype=_PACK[dtype]).tobytes())
    with open(ids_path, "w", encoding="utf-8", newline="\n") as fh:
        for doc_id, _ in items:
            fh.write(doc_id + "\n")
    if metadata is not None:
        base.with_suffix(".meta").write_text(
            json.dumps(metadata, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return emb_path, ids_path

"""Exact cosine top-k over single-vector embeddings.

Vectors are unit-normalized once at build time (fp16 promoted to fp32),
so a query scores as a single matrix-vector product. No ANN structures:
search is exhaustive and exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StageError, ValidationError
from .results import RankedList
from .store import EmbeddingMatrix, read_embeddings_meta


@dataclass
class DenseIndex:
    doc_ids: list[str]
    vectors: np.ndarray  # (n, d) float32, rows unit-norm

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.doc_ids)


def build_dense(entries: list[EmbeddingMatrix]) -> DenseIndex:
    """Build from single-vector entries; zero vectors cannot be normalized."""
    if not entries:
        raise ValidationError("cannot build a dense index from an empty store")
    dims = {e.dim for e in entries}
    if len(dims) != 1:
        raise ValidationError(f"entries disagree on dim: {sorted(dims)}")
    for e in entries:
        if e.rows != 1:
            raise ValidationError(f"doc {e.doc_id!r}: multi-vector entry (t={e.rows}) in dense build")
    vectors = np.vstack([e.values.astype(np.float32) for e in entries])
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"doc {entries[zero[0]].doc_id!r}: zero vector cannot be normalized")
    return DenseIndex([e.doc_id for e in entries], vectors / norms[:, None])


def load_dense(store_path) -> DenseIndex:
    entries, kind, _ = read_embeddings_meta(store_path)
    if kind != "single":
        raise ValidationError(f"{store_path}: dense index needs a single-vector store, got kind={kind!r}")
    return build_dense(entries)


def dense_search(index: DenseIndex, query_vec: np.ndarray, k: int) -> RankedList:
    """Top-k by cosine, ties by ascending doc_id. Zero-similarity docs stay
    eligible (unlike BM25's zero-score exclusion)."""
    q = np.asarray(query_vec, dtype=np.float32).reshape(-1)
    if q.shape[0] != index.dim:
        raise StageError(f"query dim {q.shape[0]} != index dim {index.dim}", stage="dense")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise StageError("zero query vector", stage="dense")
    scores = index.vectors @ (q / norm)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.doc_ids[i]))[:k]
    return RankedList.from_pairs("", [(index.doc_ids[i], float(scores[i])) for i in order], producer="dense")

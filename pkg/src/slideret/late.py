"""Late-interaction MaxSim retrieval over multi-vector embeddings.

A document is a t x d token matrix, a query a q x d matrix; the score is
the sum over query tokens of the maximum dot product against any document
token (ColBERT-style MaxSim). Dot product, not cosine: upstream encoders
emit normalized token embeddings and this engine does not re-normalize.

The whole index is scored in memory with one GEMM against the
concatenated token matrix, then a segmented max per document. Exact, no
candidate pruning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StageError, ValidationError
from .results import RankedList
from .store import EmbeddingMatrix, read_embeddings_meta


@dataclass
class MultiVectorIndex:
    doc_ids: list[str]
    tokens: np.ndarray  # (total_tokens, d) float32, all docs concatenated
    offsets: np.ndarray  # (n_docs,) start row of each doc in tokens

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[1])

    @property
    def total_tokens(self) -> int:
        return int(self.tokens.shape[0])

    def __len__(self) -> int:
        return len(self.doc_ids)


def build_multi(entries: list[EmbeddingMatrix]) -> MultiVectorIndex:
    if not entries:
        raise ValidationError("cannot build a multi-vector index from an empty store")
    dims = {e.dim for e in entries}
    if len(dims) != 1:
        raise ValidationError(f"entries disagree on dim: {sorted(dims)}")
    for e in entries:
        if e.rows < 1:
            raise ValidationError(f"doc {e.doc_id!r}: empty token matrix")
    blocks = [e.values.astype(np.float32) for e in entries]
    offsets = np.cumsum([0] + [b.shape[0] for b in blocks[:-1]])
    return MultiVectorIndex([e.doc_id for e in entries], np.vstack(blocks), np.asarray(offsets))


def load_multi(store_path) -> MultiVectorIndex:
    entries, _, _ = read_embeddings_meta(store_path)
    return build_multi(entries)


def maxsim_score(query_tokens: np.ndarray, doc_tokens: np.ndarray) -> float:
    # Contiguous fp32 keeps the GEMM path (and its rounding) independent of
    # the caller's memory layout.
    q = np.ascontiguousarray(np.atleast_2d(query_tokens), dtype=np.float32)
    d = np.ascontiguousarray(np.atleast_2d(doc_tokens), dtype=np.float32)
    if q.shape[0] < 1 or d.shape[0] < 1:
        raise ValidationError("maxsim needs at least one query and one doc token")
    if q.shape[1] != d.shape[1]:
        raise StageError(f"token dim mismatch: query {q.shape[1]} vs doc {d.shape[1]}", stage="late")
    return float((q @ d.T).max(axis=1).sum())


def late_search(index: MultiVectorIndex, query_tokens: np.ndarray, k: int) -> RankedList:
    """Top-k by MaxSim, ties by ascending doc_id."""
    q = np.ascontiguousarray(np.atleast_2d(query_tokens), dtype=np.float32)
    if q.shape[0] < 1:
        raise StageError("empty query token matrix", stage="late")
    if q.shape[1] != index.dim:
        raise StageError(f"query dim {q.shape[1]} != index dim {index.dim}", stage="late")
    sims = q @ index.tokens.T  # (q, total_tokens)
    per_doc_max = np.maximum.reduceat(sims, index.offsets, axis=1)  # (q, n_docs)
    scores = per_doc_max.sum(axis=0)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.doc_ids[i]))[:k]
    return RankedList.from_pairs("", [(index.doc_ids[i], float(scores[i])) for i in order], producer="late")

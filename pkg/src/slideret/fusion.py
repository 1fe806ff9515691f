"""Rank fusion: composite half-and-half merging and Reciprocal Rank Fusion.

Both strategies are rank-only; input scores never influence the output.
Composite output carries ordinal 1/rank scores (input scores from two
different engines are incomparable), RRF output carries the rrf sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .results import RankedList


@dataclass
class FusionSpec:
    method: str = "composite"  # composite | rrf
    rrf_kappa: float = 60.0
    pad_source: str = "first"  # first | second
    target_k: int = 10

    def validate(self) -> None:
        if self.method not in ("composite", "rrf"):
            raise ValidationError(f"unknown fusion method {self.method!r}")
        if self.rrf_kappa <= 0:
            raise ValidationError(f"rrf_kappa must be positive, got {self.rrf_kappa}")
        if self.pad_source not in ("first", "second"):
            raise ValidationError(f"pad_source must be first or second, got {self.pad_source!r}")
        if self.target_k < 1:
            raise ValidationError(f"target_k must be >= 1, got {self.target_k}")


def composite_merge(
    list_a: RankedList,
    list_b: RankedList,
    target_k: int,
    pad_source: str = "first",
) -> RankedList:
    """Merge top halves of A and B: A's ceil(k/2) then B's floor(k/2),
    dropping duplicates (first occurrence wins), then pad with the next
    unused docs from pad_source's full list, falling back to the other
    list once exhausted."""
    if list_a.query_id != list_b.query_id:
        raise ValidationError(
            f"query_id mismatch: {list_a.query_id!r} vs {list_b.query_id!r}"
        )
    if pad_source not in ("first", "second"):
        raise ValidationError(f"pad_source must be first or second, got {pad_source!r}")
    a_ids, b_ids = list_a.doc_ids(), list_b.doc_ids()
    half_a = a_ids[: math.ceil(target_k / 2)]
    half_b = b_ids[: target_k // 2]

    merged: list[str] = []
    seen: set[str] = set()
    for doc_id in half_a + half_b:
        if doc_id not in seen:
            seen.add(doc_id)
            merged.append(doc_id)

    primary, fallback = (a_ids, b_ids) if pad_source == "first" else (b_ids, a_ids)
    for pool in (primary, fallback):
        for doc_id in pool:
            if len(merged) >= target_k:
                break
            if doc_id not in seen:
                seen.add(doc_id)
                merged.append(doc_id)

    pairs = [(doc_id, 1.0 / rank) for rank, doc_id in enumerate(merged[:target_k], start=1)]
    return RankedList.from_pairs(list_a.query_id, pairs, producer="composite")


def rrf_fuse(lists: list[RankedList], kappa: float = 60.0, target_k: int = 10) -> RankedList:
    """rrf(d) = sum over input lists of 1/(kappa + rank of d); a doc missing
    from a list contributes nothing there. Top target_k by descending rrf
    score, ties by ascending doc_id."""
    if len(lists) < 1:
        raise ValidationError("rrf_fuse needs at least one input list")
    if kappa <= 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    query_ids = {rl.query_id for rl in lists}
    if len(query_ids) != 1:
        raise ValidationError(f"query_id mismatch across input lists: {sorted(query_ids)}")
    scores: dict[str, float] = {}
    for rl in lists:
        for entry in rl.entries:
            scores[entry.doc_id] = scores.get(entry.doc_id, 0.0) + 1.0 / (kappa + entry.rank)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:target_k]
    return RankedList.from_pairs(lists[0].query_id, ranked, producer="rrf")

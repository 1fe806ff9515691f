"""Ranked result lists and TREC run file IO.

A run file line is ``query_id Q0 doc_id rank score tag``; scores are
written with full repr precision so identical runs are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int  # 1-based


@dataclass
class RankedList:
    query_id: str
    entries: list[RankedEntry]
    producer: str = ""

    @classmethod
    def from_pairs(cls, query_id: str, pairs: list[tuple[str, float]], producer: str = "") -> "RankedList":
        entries = [RankedEntry(doc_id, float(score), rank) for rank, (doc_id, score) in enumerate(pairs, start=1)]
        return cls(query_id=query_id, entries=entries, producer=producer)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def pairs(self) -> list[tuple[str, float]]:
        return [(e.doc_id, e.score) for e in self.entries]

    def truncated(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.entries[:k], self.producer)

    def with_query_id(self, query_id: str) -> "RankedList":
        return replace(self, query_id=query_id)

    def validate(self, scores_non_increasing: bool = True) -> None:
        if [e.rank for e in self.entries] != list(range(1, len(self.entries) + 1)):
            raise ValidationError(f"query {self.query_id!r}: ranks not contiguous from 1")
        ids = self.doc_ids()
        if len(set(ids)) != len(ids):
            raise ValidationError(f"query {self.query_id!r}: duplicate doc_ids in ranked list")
        if scores_non_increasing:
            for prev, cur in zip(self.entries, self.entries[1:]):
                if cur.score > prev.score:
                    raise ValidationError(
                        f"query {self.query_id!r}: score increases at rank {cur.rank}"
                    )


def write_run(lists: list[RankedList], path: str | Path, tag: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rl in lists:
            line_tag = tag if tag is not None else (rl.producer or "run")
            for e in rl.entries:
                fh.write(f"{rl.query_id} Q0 {e.doc_id} {e.rank} {e.score!r} {line_tag}\n")


def read_run(path: str | Path) -> list[RankedList]:
    """Parse a run file; lines for one query must be contiguous and rank-ordered."""
    lists: list[RankedList] = []
    current: RankedList | None = None
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}: line {lineno}: expected 6 fields, got {len(parts)}")
            query_id, _, doc_id, rank_s, score_s, tag = parts
            try:
                rank, score = int(rank_s), float(score_s)
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: bad rank/score") from exc
            if current is None or current.query_id != query_id:
                if query_id in seen:
                    raise FormatError(f"{path}: line {lineno}: query {query_id!r} not contiguous")
                seen.add(query_id)
                current = RankedList(query_id, [], producer=tag)
                lists.append(current)
            if rank != len(current.entries) + 1:
                raise FormatError(f"{path}: line {lineno}: rank {rank} out of order")
            current.entries.append(RankedEntry(doc_id, score, rank))
    for rl in lists:
        rl.validate(scores_non_increasing=False)
    return lists

"""Tokenization, inverted index, and BM25 top-k search over caption or OCR text.

BM25 variant: Lucene-style idf = ln(1 + (N - df + 0.5)/(df + 0.5)), which is
never negative, with k1=1.2 and b=0.75. Analyzer: lowercase, split on any
non-alphanumeric Unicode scalar, no stemming, no stopwords.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, ValidationError
from .results import RankedList

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)  # alphanumeric runs; _ splits


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def validate(self) -> None:
        if self.k1 <= 0:
            raise ValidationError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"b must be in [0,1], got {self.b}")


def term_weight(tf: int, dl: int, df: int, n_docs: int, avgdl: float, params: Bm25Params) -> float:
    """Per-(term, doc) BM25 contribution. Zero iff tf is zero."""
    if tf == 0:
        return 0.0
    idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
    norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl)
    return idf * tf * (params.k1 + 1.0) / (tf + norm)


@dataclass
class InvertedIndex:
    """term -> [(doc ordinal, tf)], ordinals assigned by ascending doc_id."""

    doc_ids: list[str]
    doc_lengths: list[int]
    postings: dict[str, list[tuple[int, int]]]
    params: Bm25Params = field(default_factory=Bm25Params)
    field_name: str = "caption"

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def avgdl(self) -> float:
        return sum(self.doc_lengths) / self.n_docs if self.doc_lengths else 0.0

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def to_bytes(self) -> bytes:
        # Single-file layout with a stats footer; postings keyed by sorted
        # term so identical corpora serialize to identical bytes.
        payload = {
            "format": "slideret-bm25",
            "version": 1,
            "field": self.field_name,
            "params": {"k1": self.params.k1, "b": self.params.b},
            "doc_ids": self.doc_ids,
            "doc_lengths": self.doc_lengths,
            "postings": {t: self.postings[t] for t in sorted(self.postings)},
            "stats": {
                "n_docs": self.n_docs,
                "avgdl": self.avgdl,
                "vocab": len(self.postings),
                "total_postings": sum(len(p) for p in self.postings.values()),
            },
        }
        return json.dumps(payload, ensure_ascii=False).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "InvertedIndex":
        try:
            payload = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"not a bm25 index file: {exc}") from exc
        if payload.get("format") != "slideret-bm25":
            raise FormatError("not a bm25 index file (missing format marker)")
        return cls(
            doc_ids=payload["doc_ids"],
            doc_lengths=payload["doc_lengths"],
            postings={t: [tuple(p) for p in plist] for t, plist in payload["postings"].items()},
            params=Bm25Params(**payload["params"]),
            field_name=payload.get("field", "caption"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        return cls.from_bytes(Path(path).read_bytes())


def build_index(
    docs: list[tuple[str, str]],
    field_name: str = "caption",
    params: Bm25Params | None = None,
) -> InvertedIndex:
    """Build a deterministic index: ordinals follow ascending doc_id, so the
    result is independent of input order."""
    params = params or Bm25Params()
    params.validate()
    seen: set[str] = set()
    for doc_id, _ in docs:
        if doc_id in seen:
            raise ValidationError(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)

    ordered = sorted(docs, key=lambda d: d[0])
    doc_ids = [d for d, _ in ordered]
    doc_lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for ordinal, (_, text) in enumerate(ordered):
        counts = Counter(tokenize(text))
        doc_lengths.append(sum(counts.values()))
        for term, tf in counts.items():
            postings.setdefault(term, []).append((ordinal, tf))
    return InvertedIndex(doc_ids, doc_lengths, postings, params, field_name)


def bm25_search(index: InvertedIndex, query_text: str, k: int) -> RankedList:
    """Top-k by descending score, ties by ascending doc_id; zero-score docs
    (no query term present) are excluded. Query terms are a sequence: a
    repeated term contributes once per occurrence."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    n, avgdl = index.n_docs, index.avgdl
    for term in tokenize(query_text):
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        for ordinal, tf in plist:
            w = term_weight(tf, index.doc_lengths[ordinal], df, n, avgdl, index.params)
            scores[ordinal] = scores.get(ordinal, 0.0) + w
    ranked = sorted(scores.items(), key=lambda item: (-item[1], index.doc_ids[item[0]]))
    pairs = [(index.doc_ids[o], s) for o, s in ranked[:k]]
    return RankedList.from_pairs("", pairs, producer="bm25")

"""End-to-end pipeline: retrieve (1 or 2 engines), optionally fuse,
optionally rerank via a scorer, truncate, and time each stage.

Scorers run out-of-process behind a line protocol so heavyweight rerank
models stay outside this engine. One JSON object per line on the child's
stdin/stdout, UTF-8, LF:

    request:  {"query_id": ..., "text": ..., "candidates":
               [{"doc_id": ..., "caption": ..., "image_path": ...}, ...]}
    response: {"query_id": ..., "scores": [{"doc_id": ..., "score": ...}]}

A response must cover exactly the requested candidate set. The child
process is reused across queries and fed serially so timing attribution
stays clean.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol

import numpy as np

from .bm25 import InvertedIndex, bm25_search, tokenize
from .dense import DenseIndex, dense_search
from .errors import StageError, ValidationError
from .fusion import FusionSpec, composite_merge, rrf_fuse
from .late import MultiVectorIndex, late_search
from .results import RankedList
from .store import Query, SlideDoc


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    caption: str
    image_path: str | None = None


# A scorer maps (query_id, query_text, candidates) to one score per candidate.
Scorer = Callable[[str, str, list[Candidate]], dict[str, float]]


class StageTiming(NamedTuple):
    retrieval_s: float
    rerank_s: float


class Retriever(Protocol):
    name: str

    def retrieve(self, query: Query, k: int) -> RankedList: ...


@dataclass
class Bm25Retriever:
    name: str
    index: InvertedIndex

    def retrieve(self, query: Query, k: int) -> RankedList:
        return bm25_search(self.index, query.text, k).with_query_id(query.query_id)


@dataclass
class DenseRetriever:
    name: str
    index: DenseIndex
    query_vectors: dict[str, np.ndarray]

    def retrieve(self, query: Query, k: int) -> RankedList:
        vec = self.query_vectors.get(query.query_id)
        if vec is None:
            raise StageError("missing query embedding", stage=self.name, query_id=query.query_id)
        return dense_search(self.index, vec, k).with_query_id(query.query_id)


@dataclass
class LateRetriever:
    name: str
    index: MultiVectorIndex
    query_tokens: dict[str, np.ndarray]

    def retrieve(self, query: Query, k: int) -> RankedList:
        tokens = self.query_tokens.get(query.query_id)
        if tokens is None:
            raise StageError("missing query embedding", stage=self.name, query_id=query.query_id)
        return late_search(self.index, tokens, k).with_query_id(query.query_id)


@dataclass
class PipelineConfig:
    retrievers: list
    fusion: FusionSpec | None = None
    scorer: Scorer | None = None
    scorer_name: str = ""
    candidates_k: int = 100
    final_n: int = 10

    def validate(self) -> None:
        if not self.retrievers:
            raise ValidationError("pipeline needs at least one retriever")
        if self.final_n < 1 or self.candidates_k < 1:
            raise ValidationError("candidates_k and final_n must be >= 1")
        if self.final_n > self.candidates_k:
            raise ValidationError(
                f"final_n ({self.final_n}) must not exceed candidates_k ({self.candidates_k})"
            )
        if self.scorer is None and self.candidates_k != self.final_n:
            raise ValidationError(
                "without a reranker, candidates_k must equal final_n "
                f"(got k={self.candidates_k}, n={self.final_n})"
            )
        if len(self.retrievers) > 1 and self.fusion is None:
            raise ValidationError("multiple retrievers require a fusion spec")
        if self.fusion is not None:
            self.fusion.validate()
            if self.fusion.method == "composite" and len(self.retrievers) != 2:
                raise ValidationError("composite fusion requires exactly two retrievers")
            if self.fusion.method == "rrf" and len(self.retrievers) < 2:
                raise ValidationError("rrf fusion requires at least two retrievers")


def builtin_scorers(qrels: dict[str, set[str]] | None = None) -> dict[str, Scorer]:
    """Deterministic stand-ins for neural rerankers: a qrels oracle and a
    query/caption term-overlap scorer."""

    def oracle(query_id: str, text: str, candidates: list[Candidate]) -> dict[str, float]:
        if qrels is None:
            raise ValidationError("oracle scorer requires qrels")
        relevant = qrels.get(query_id, set())
        return {c.doc_id: (1.0 if c.doc_id in relevant else 0.0) for c in candidates}

    def lexical_overlap(query_id: str, text: str, candidates: list[Candidate]) -> dict[str, float]:
        terms = set(tokenize(text))
        if not terms:
            return {c.doc_id: 0.0 for c in candidates}
        return {
            c.doc_id: len(terms & set(tokenize(c.caption))) / len(terms) for c in candidates
        }

    return {"oracle": oracle, "lexical_overlap": lexical_overlap}


class ExternalScorer:
    """Child-process scorer speaking the line protocol; reused across queries."""

    def __init__(self, command: str | list[str], timeout_s: float = 120.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout_s = timeout_s
        self._proc: subprocess.Popen | None = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            if self._proc is not None and self._proc.poll() is not None:
                raise StageError(
                    f"scorer process exited with code {self._proc.returncode}", stage="rerank"
                )
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                bufsize=0,
            )
        return self._proc

    def _read_line(self, proc: subprocess.Popen, query_id: str) -> bytes:
        fd = proc.stdout.fileno()
        buf = bytearray()
        deadline = time.monotonic() + self.timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                proc.kill()
                raise StageError(
                    f"scorer timed out after {self.timeout_s}s", stage="rerank", query_id=query_id
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                code = proc.wait()
                err = proc.stderr.read().decode("utf-8", "replace").strip()
                raise StageError(
                    f"scorer exited (code {code}) before responding"
                    + (f": {err}" if err else ""),
                    stage="rerank",
                    query_id=query_id,
                )
            buf.extend(chunk)
            if b"\n" in buf:
                line, _, rest = bytes(buf).partition(b"\n")
                if rest:
                    raise StageError(
                        "scorer sent more than one response line", stage="rerank", query_id=query_id
                    )
                return line

    def __call__(self, query_id: str, text: str, candidates: list[Candidate]) -> dict[str, float]:
        proc = self._ensure_started()
        request = {
            "query_id": query_id,
            "text": text,
            "candidates": [
                {"doc_id": c.doc_id, "caption": c.caption}
                | ({"image_path": c.image_path} if c.image_path else {})
                for c in candidates
            ],
        }
        try:
            proc.stdin.write((json.dumps(request, ensure_ascii=False) + "\n").encode("utf-8"))
            proc.stdin.flush()
        except BrokenPipeError:
            code = proc.wait()
            raise StageError(f"scorer pipe closed (exit code {code})", stage="rerank", query_id=query_id)
        line = self._read_line(proc, query_id)
        try:
            response = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise StageError(f"scorer sent invalid response: {exc}", stage="rerank", query_id=query_id)
        if response.get("query_id") != query_id:
            raise StageError(
                f"scorer answered for query {response.get('query_id')!r}",
                stage="rerank",
                query_id=query_id,
            )
        raw = response.get("scores")
        if not isinstance(raw, list):
            raise StageError("scorer response missing scores list", stage="rerank", query_id=query_id)
        scores: dict[str, float] = {}
        for item in raw:
            doc_id = item.get("doc_id") if isinstance(item, dict) else None
            if doc_id is None or doc_id in scores:
                raise StageError(
                    f"scorer response has missing/duplicate doc_id {doc_id!r}",
                    stage="rerank",
                    query_id=query_id,
                )
            try:
                value = float(item["score"])
            except (KeyError, TypeError, ValueError):
                raise StageError(f"scorer sent bad score for {doc_id!r}", stage="rerank", query_id=query_id)
            scores[doc_id] = value
        wanted = {c.doc_id for c in candidates}
        missing = wanted - set(scores)
        extra = set(scores) - wanted
        if missing:
            raise StageError(
                f"scorer omitted candidate {sorted(missing)[0]!r}", stage="rerank", query_id=query_id
            )
        if extra:
            raise StageError(
                f"scorer scored unknown doc {sorted(extra)[0]!r}", stage="rerank", query_id=query_id
            )
        return scores

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_scorer(command: str | list[str], timeout_s: float = 120.0) -> ExternalScorer:
    return ExternalScorer(command, timeout_s)


def rerank(
    candidates: RankedList,
    scores: dict[str, float],
    producer: str,
) -> RankedList:
    """Reorder strictly by scorer score descending; ties keep prior rank."""
    missing = [e.doc_id for e in candidates.entries if e.doc_id not in scores]
    if missing:
        raise StageError(
            f"scorer omitted candidate {missing[0]!r}", stage="rerank", query_id=candidates.query_id
        )
    order = sorted(candidates.entries, key=lambda e: (-scores[e.doc_id], e.rank))
    return RankedList.from_pairs(
        candidates.query_id, [(e.doc_id, scores[e.doc_id]) for e in order], producer
    )


def run_pipeline(
    config: PipelineConfig,
    queries: list[Query],
    docs: dict[str, SlideDoc] | None = None,
) -> tuple[list[RankedList], dict[str, StageTiming]]:
    """Run every query through retrieve -> fuse -> rerank -> truncate.

    docs supplies captions/image paths for scorer requests; required only
    when a scorer is configured.
    """
    config.validate()
    if config.scorer is not None and docs is None:
        raise ValidationError("reranking requires the corpus docs for scorer requests")
    runs: list[RankedList] = []
    timings: dict[str, StageTiming] = {}
    for query in queries:
        t0 = time.perf_counter()
        lists = [r.retrieve(query, config.candidates_k) for r in config.retrievers]
        if config.fusion is not None:
            if config.fusion.method == "composite":
                pooled = composite_merge(
                    lists[0], lists[1], config.candidates_k, config.fusion.pad_source
                )
            else:
                pooled = rrf_fuse(lists, config.fusion.rrf_kappa, config.candidates_k)
        else:
            pooled = lists[0]
        if config.scorer is None:
            final = pooled.truncated(config.final_n)
            timings[query.query_id] = StageTiming(time.perf_counter() - t0, 0.0)
        else:
            t1 = time.perf_counter()
            candidates = []
            for e in pooled.entries:
                doc = docs.get(e.doc_id)
                candidates.append(
                    Candidate(e.doc_id, doc.caption if doc else "", doc.image_path if doc else None)
                )
            try:
                scores = config.scorer(query.query_id, query.text, candidates)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(str(exc), stage="rerank", query_id=query.query_id) from exc
            final = rerank(pooled, scores, config.scorer_name or "rerank").truncated(config.final_n)
            timings[query.query_id] = StageTiming(t1 - t0, time.perf_counter() - t1)
        runs.append(final)
    return runs, timings

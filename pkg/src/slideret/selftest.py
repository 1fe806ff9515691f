"""Built-in oracle suites runnable without a test harness (`slideret selftest`).

Each check re-derives its expected values independently (brute-force
scoring, closed-form constants, finite differences) and prints one
PASS/FAIL line.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .bm25 import Bm25Params, bm25_search, build_index, term_weight, tokenize
from .contrastive import TrainingTriplet, infonce_grad, infonce_loss
from .dense import build_dense, dense_search
from .fusion import composite_merge, rrf_fuse
from .late import build_multi, late_search
from .metrics import ndcg_at_k, recall_at_k
from .results import RankedList
from .store import EmbeddingMatrix


def _check_bm25() -> None:
    rng = random.Random(4242)
    params = Bm25Params()
    for _ in range(5):
        terms = [f"t{i}" for i in range(rng.randint(2, 30))]
        docs = [
            (f"d{i:03d}", " ".join(rng.choice(terms) for _ in range(rng.randint(0, 30))))
            for i in range(rng.randint(2, 100))
        ]
        idx = build_index(docs)
        tokenized = {d: tokenize(t) for d, t in docs}
        avgdl = sum(len(t) for t in tokenized.values()) / len(docs)
        df: dict[str, int] = {}
        for toks in tokenized.values():
            for term in set(toks):
                df[term] = df.get(term, 0) + 1
        for _ in range(4):
            query = " ".join(rng.choice(terms) for _ in range(rng.randint(1, 4)))
            scored = []
            for doc_id in sorted(tokenized):
                toks = tokenized[doc_id]
                s = sum(
                    term_weight(toks.count(t), len(toks), df[t], len(docs), avgdl, params)
                    for t in tokenize(query)
                    if t in df
                )
                if s > 0:
                    scored.append((doc_id, s))
            scored.sort(key=lambda x: (-x[1], x[0]))
            got = bm25_search(idx, query, 10).pairs()
            assert got == scored[:10], f"bm25 mismatch for query {query!r}"


def _check_dense() -> None:
    rng = np.random.default_rng(17)
    matrix = rng.normal(size=(80, 12)).astype(np.float32)
    idx = build_dense([EmbeddingMatrix(f"d{i:03d}", matrix[i : i + 1]) for i in range(80)])
    for seed in range(3):
        q = np.random.default_rng(seed).normal(size=12)
        qn = q / np.linalg.norm(q)
        scored = sorted(
            (
                (f"d{i:03d}", float(np.dot(matrix[i].astype(np.float64) / np.linalg.norm(matrix[i].astype(np.float64)), qn)))
                for i in range(80)
            ),
            key=lambda x: (-x[1], x[0]),
        )
        got = dense_search(idx, q, 10).doc_ids()
        assert got == [d for d, _ in scored[:10]], "dense top-k mismatch"


def _check_late() -> None:
    rng = np.random.default_rng(23)
    entries = [
        EmbeddingMatrix(f"d{i:03d}", rng.integers(-4, 5, size=(int(rng.integers(1, 8)), 4)).astype(np.float32))
        for i in range(60)
    ]
    idx = build_multi(entries)
    for seed in range(3):
        q = np.random.default_rng(seed).integers(-4, 5, size=(3, 4)).astype(np.float32)
        scored = []
        for e in entries:
            total = 0.0
            for qrow in q:
                total += max(float(np.dot(qrow.astype(np.float64), drow.astype(np.float64))) for drow in e.values)
            scored.append((e.doc_id, total))
        scored.sort(key=lambda x: (-x[1], x[0]))
        got = late_search(idx, q, 10).pairs()
        assert got == scored[:10], "late-interaction top-k mismatch"


def _check_fusion() -> None:
    def ranked(ids):
        return RankedList.from_pairs("q", [(d, float(len(ids) - i)) for i, d in enumerate(ids)])

    out = rrf_fuse([ranked(["a", "b", "c"]), ranked(["b", "c", "a"])], kappa=60.0, target_k=3)
    assert out.doc_ids() == ["b", "a", "c"], "rrf order"
    expected = {"b": 1 / 62 + 1 / 61, "a": 1 / 61 + 1 / 63, "c": 1 / 63 + 1 / 62}
    assert all(abs(dict(out.pairs())[d] - v) < 1e-12 for d, v in expected.items()), "rrf scores"
    m1 = composite_merge(ranked(["1", "2", "3", "4"]), ranked(["3", "5", "6", "7"]), 4)
    assert m1.doc_ids() == ["1", "2", "3", "5"], "composite no-overlap"
    m2 = composite_merge(ranked(["1", "2", "3"]), ranked(["2", "4"]), 4, "first")
    assert m2.doc_ids() == ["1", "2", "4", "3"], "composite pad"


def _check_metrics() -> None:
    run = RankedList.from_pairs("q", [("x", 2.0), ("rel", 1.0)])
    value = ndcg_at_k(run, {"q": {"rel"}})
    assert abs(value - 1.0 / math.log2(3)) < 1e-12, "ndcg rank-2"
    perfect = RankedList.from_pairs("q", [("rel", 1.0)])
    assert ndcg_at_k(perfect, {"q": {"rel"}}) == 1.0, "ndcg perfect"
    partial = RankedList.from_pairs("q", [("a", 2.0), ("z", 1.0)])
    assert recall_at_k(partial, {"q": {"a", "b"}}) == 0.5, "recall multi-hop"


def _check_infonce() -> None:
    t = [TrainingTriplet(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.0, 1.0]))]
    assert abs(infonce_loss(t, 1.0) - math.log(2)) < 1e-9, "infonce ln2"
    t2 = [TrainingTriplet(np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))]
    assert abs(infonce_loss(t2, 1.0) - math.log(1 + math.exp(-1))) < 1e-9, "infonce closed form"
    h = 1e-5
    for seed in range(3):
        rng = np.random.default_rng(seed)
        batch = [TrainingTriplet(rng.normal(size=8), rng.normal(size=8), rng.normal(size=8)) for _ in range(6)]
        _, grads = infonce_grad(batch, 0.07)
        flat_a, flat_f = [], []
        for i in range(6):
            for fname, grad in (("query", grads.queries), ("positive", grads.positives), ("negative", grads.negatives)):
                vec = getattr(batch[i], fname)
                for k in range(8):
                    up = [TrainingTriplet(b.query.copy(), b.positive.copy(), b.negative.copy()) for b in batch]
                    dn = [TrainingTriplet(b.query.copy(), b.positive.copy(), b.negative.copy()) for b in batch]
                    getattr(up[i], fname)[k] += h
                    getattr(dn[i], fname)[k] -= h
                    flat_f.append((infonce_loss(up, 0.07) - infonce_loss(dn, 0.07)) / (2 * h))
                    flat_a.append(grad[i][k])
        ga, gf = np.asarray(flat_a), np.asarray(flat_f)
        assert np.linalg.norm(ga - gf) / np.linalg.norm(gf) < 1e-6, "infonce gradient"


CHECKS = [
    ("bm25-brute-force", _check_bm25),
    ("dense-brute-force", _check_dense),
    ("late-brute-force", _check_late),
    ("fusion-hand-cases", _check_fusion),
    ("metrics-hand-cases", _check_metrics),
    ("infonce-closed-forms-and-gradient", _check_infonce),
]


def run_selftest(out=print) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            check()
            out(f"PASS {name}")
        except AssertionError as exc:
            ok = False
            out(f"FAIL {name}: {exc}")
    return ok

import json

import numpy as np
import pytest

from slideret.store import (
    CorpusManifest,
    EmbeddingMatrix,
    Query,
    SlideDoc,
    save_manifest,
    save_qrels,
    save_queries,
    write_embeddings,
)

CAPTIONS = [
    "sales and organic growth for the pet care division",
    "trading operating profit versus group total",
    "pet food market share across regions",
    "quarterly organic growth percentages",
    "cooker market size in australia",
    "average order value comparison by year",
    "dementia lecture introduction slide",
    "brain anatomy overview with diagrams",
    "machine learning course logistics",
    "gradient descent convergence plot",
    "public speaking tips and structure",
    "dental anatomy reference chart",
]


@pytest.fixture
def toy_workspace(tmp_path):
    """A consistent 12-doc, 5-query workspace with dense and late stores."""
    rng = np.random.default_rng(1001)
    docs = [
        SlideDoc(f"s{i:02d}", f"deck{i // 6}", caption=cap, ocr_text=cap.upper())
        for i, cap in enumerate(CAPTIONS)
    ]
    save_manifest(CorpusManifest(docs), tmp_path / "corpus.jsonl")

    queries = [
        Query("q0", "pet care growth"),
        Query("q1", "cooker market australia"),
        Query("q2", "order value by year"),
        Query("q3", "dementia brain"),
        Query("q4", "gradient descent"),
    ]
    save_queries(queries, tmp_path / "queries.jsonl")

    qrels = {"q0": {"s00", "s03"}, "q1": {"s04"}, "q2": {"s05"}, "q3": {"s06", "s07"}, "q4": {"s09"}}
    save_qrels(qrels, tmp_path / "qrels.txt")

    dense_docs = [EmbeddingMatrix(d.doc_id, rng.normal(size=(1, 8)).astype(np.float32)) for d in docs]
    write_embeddings(tmp_path / "caps", dense_docs, dtype="fp32")
    dense_queries = []
    for q in queries:
        target = sorted(qrels[q.query_id])[0]
        vec = next(e.values for e in dense_docs if e.doc_id == target)
        noisy = vec.reshape(-1) + 0.05 * rng.normal(size=8).astype(np.float32)
        dense_queries.append(EmbeddingMatrix(q.query_id, noisy.reshape(1, -1)))
    write_embeddings(tmp_path / "qcaps", dense_queries, dtype="fp32")

    late_docs = [
        EmbeddingMatrix(d.doc_id, rng.normal(size=(int(rng.integers(2, 6)), 4)).astype(np.float32))
        for d in docs
    ]
    write_embeddings(tmp_path / "vis", late_docs, dtype="fp16", kind="multi")
    late_queries = [
        EmbeddingMatrix(q.query_id, rng.normal(size=(3, 4)).astype(np.float32)) for q in queries
    ]
    write_embeddings(tmp_path / "qvis", late_queries, dtype="fp16", kind="multi")

    return tmp_path


def write_config(path, **overrides):
    config = {
        "label": "toy",
        "manifest": "corpus.jsonl",
        "queries": "queries.jsonl",
        "qrels": "qrels.txt",
        "engines": [{"name": "bm25", "kind": "bm25", "field": "caption"}],
        "pipeline": {"retrievers": ["bm25"], "candidates_k": 10, "final_n": 10},
    }
    config.update(overrides)
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path

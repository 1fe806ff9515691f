import numpy as np
import pytest

from slideret.dense import build_dense, dense_search, load_dense
from slideret.errors import StageError, ValidationError
from slideret.store import EmbeddingMatrix, write_embeddings


def entries_from(matrix, prefix="d"):
    return [
        EmbeddingMatrix(f"{prefix}{i:04d}", row.reshape(1, -1).astype(np.float32))
        for i, row in enumerate(matrix)
    ]


def oracle_cosine_topk(doc_ids, matrix, query, k):
    # Independent path: cosine from raw vectors, python sort.
    q = np.asarray(query, dtype=np.float64)
    q = q / np.linalg.norm(q)
    scored = []
    for doc_id, row in zip(doc_ids, matrix):
        v = np.asarray(row, dtype=np.float64)
        scored.append((doc_id, float(np.dot(v / np.linalg.norm(v), q))))
    scored.sort(key=lambda x: (-x[1], x[0]))
    return [d for d, _ in scored[:k]]


def test_build_normalizes():
    idx = build_dense(entries_from(np.array([[3.0, 4.0], [1.0, 0.0], [0.0, 2.0]])))
    assert len(idx) == 3
    assert np.array_equal(idx.vectors[0], np.array([0.6, 0.8], dtype=np.float32))
    assert np.allclose(np.linalg.norm(idx.vectors, axis=1), 1.0, atol=1e-5)


def test_build_rejects_zero_vector():
    with pytest.raises(ValidationError, match="d0001"):
        build_dense(entries_from(np.array([[1.0, 0.0], [0.0, 0.0]])))


def test_build_rejects_multi_vector_entries():
    e = EmbeddingMatrix("m", np.ones((2, 3), dtype=np.float32))
    with pytest.raises(ValidationError, match="multi-vector"):
        build_dense([e])


def test_load_rejects_multi_store(tmp_path):
    write_embeddings(tmp_path / "s", [EmbeddingMatrix("a", np.ones((2, 3), np.float32))], kind="multi")
    with pytest.raises(ValidationError, match="single-vector"):
        load_dense(tmp_path / "s")


def test_self_similarity_first():
    rng = np.random.default_rng(3)
    matrix = rng.normal(size=(20, 8))
    idx = build_dense(entries_from(matrix))
    result = dense_search(idx, matrix[7], k=3)
    assert result.doc_ids()[0] == "d0007"
    assert result.entries[0].score == pytest.approx(1.0, abs=1e-6)


def test_orthogonal_query_all_zero_doc_id_order():
    matrix = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    idx = build_dense(entries_from(matrix))
    result = dense_search(idx, np.array([0.0, 1.0]), k=3)
    assert result.doc_ids() == ["d0000", "d0001", "d0002"]
    assert all(e.score == 0.0 for e in result.entries)


def test_matches_brute_force_100_docs():
    rng = np.random.default_rng(11)
    matrix = rng.normal(size=(100, 16)).astype(np.float32)
    matrix[41] = matrix[13]  # exact tie pair to exercise doc_id tie-break
    ids = [f"d{i:04d}" for i in range(100)]
    idx = build_dense(entries_from(matrix))
    for seed in range(5):
        q = np.random.default_rng(seed).normal(size=16).astype(np.float32)
        got = dense_search(idx, q, k=10).doc_ids()
        want = oracle_cosine_topk(ids, matrix, q, k=10)
        assert got == want


def test_dim_mismatch_and_zero_query():
    idx = build_dense(entries_from(np.eye(3)))
    with pytest.raises(StageError, match="dim"):
        dense_search(idx, np.ones(4), k=1)
    with pytest.raises(StageError, match="zero query"):
        dense_search(idx, np.zeros(3), k=1)


def test_scale_invariance():
    rng = np.random.default_rng(5)
    matrix = rng.normal(size=(50, 12))
    idx = build_dense(entries_from(matrix))
    q = rng.normal(size=12)
    base = dense_search(idx, q, k=50)
    for c in (2.0, 0.5, 4.0):  # power-of-two scaling is exact in fp
        assert dense_search(idx, c * q, k=50).pairs() == base.pairs()
    assert dense_search(idx, 3.7 * q, k=50).doc_ids() == base.doc_ids()


def test_fp16_store_matches_fp32_of_quantized(tmp_path):
    rng = np.random.default_rng(8)
    matrix = rng.normal(size=(30, 6)).astype(np.float32)
    entries = entries_from(matrix)
    write_embeddings(tmp_path / "h", entries, dtype="fp16")
    quantized = [EmbeddingMatrix(e.doc_id, e.values.astype(np.float16).astype(np.float32)) for e in entries]
    write_embeddings(tmp_path / "f", quantized, dtype="fp32")
    idx_h = load_dense(tmp_path / "h")
    idx_f = load_dense(tmp_path / "f")
    q = rng.normal(size=6).astype(np.float32)
    assert dense_search(idx_h, q, k=30).pairs() == dense_search(idx_f, q, k=30).pairs()


def test_k_truncation():
    idx = build_dense(entries_from(np.eye(4)))
    assert len(dense_search(idx, np.ones(4), k=2).entries) == 2
    assert len(dense_search(idx, np.ones(4), k=99).entries) == 4

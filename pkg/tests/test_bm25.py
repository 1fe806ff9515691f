import math
import random

import pytest

from slideret.bm25 import Bm25Params, InvertedIndex, bm25_search, build_index, term_weight, tokenize
from slideret.errors import ValidationError


# ---------------------------------------------------------------------------
# Brute-force oracle: score every document by direct formula evaluation,
# no inverted index involved.


def oracle_bm25(docs, query_text, k, params=Bm25Params()):
    tokenized = {doc_id: tokenize(text) for doc_id, text in docs}
    n = len(docs)
    avgdl = sum(len(t) for t in tokenized.values()) / n
    df = {}
    for toks in tokenized.values():
        for term in set(toks):
            df[term] = df.get(term, 0) + 1
    scored = []
    for doc_id in sorted(tokenized):
        toks = tokenized[doc_id]
        s = 0.0
        for term in tokenize(query_text):
            if term not in df:
                continue
            s += term_weight(toks.count(term), len(toks), df[term], n, avgdl, params)
        if s > 0.0:
            scored.append((doc_id, s))
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored[:k]


def test_tokenize_cases():
    assert tokenize("Cooker, contains 2!") == ["cooker", "contains", "2"]
    assert tokenize("") == []
    assert tokenize("INR CY2013") == ["inr", "cy2013"]
    assert tokenize("foo_bar") == ["foo", "bar"]  # underscore is not alphanumeric
    assert tokenize("café-au-lait") == ["café", "au", "lait"]


def test_build_index_stats():
    idx = build_index([("d1", "cat sat"), ("d2", "dog sat sat")])
    assert idx.n_docs == 2
    assert idx.df("sat") == 2
    assert idx.avgdl == 2.5
    assert idx.doc_lengths == [2, 3]


def test_build_index_empty_doc():
    idx = build_index([("d1", "")])
    assert idx.doc_lengths == [0]
    assert idx.postings == {}


def test_build_index_order_independent_bytes():
    docs = [("d2", "dog sat sat"), ("d1", "cat sat"), ("d3", "bird")]
    a = build_index(docs).to_bytes()
    b = build_index(list(reversed(docs))).to_bytes()
    assert a == b


def test_build_index_duplicate_id():
    with pytest.raises(ValidationError, match="d1"):
        build_index([("d1", "a"), ("d1", "b")])


def test_index_save_load_roundtrip(tmp_path):
    idx = build_index([("d1", "cat sat"), ("d2", "dog sat sat")])
    idx.save(tmp_path / "idx.bm25")
    back = InvertedIndex.load(tmp_path / "idx.bm25")
    assert back.to_bytes() == idx.to_bytes()


def test_hand_case_sat():
    # d2 (tf=2, dl=3) outscores d1 (tf=1, dl=2): tf components 1.302 vs 1.089
    # at k1=1.2, b=0.75, shared idf ln(1.2).
    idx = build_index([("d1", "cat sat"), ("d2", "dog sat sat")])
    result = bm25_search(idx, "sat", k=2)
    assert result.doc_ids() == ["d2", "d1"]
    idf = math.log(1.0 + (2 - 2 + 0.5) / (2 + 0.5))
    d2_expected = idf * 2 * 2.2 / (2 + 1.2 * (1 - 0.75 + 0.75 * 3 / 2.5))
    d1_expected = idf * 1 * 2.2 / (1 + 1.2 * (1 - 0.75 + 0.75 * 2 / 2.5))
    assert result.entries[0].score == pytest.approx(d2_expected, abs=1e-12)
    assert result.entries[1].score == pytest.approx(d1_expected, abs=1e-12)
    assert 2 * 2.2 / (2 + 1.38) == pytest.approx(1.302, abs=1e-3)
    assert 1 * 2.2 / (1 + 1.02) == pytest.approx(1.089, abs=1e-3)


def test_absent_term_and_empty_query():
    idx = build_index([("d1", "cat sat")])
    assert bm25_search(idx, "zebra", k=5).entries == []
    assert bm25_search(idx, "", k=5).entries == []
    assert bm25_search(idx, "...", k=5).entries == []


def test_k_larger_than_corpus():
    idx = build_index([("d1", "cat sat"), ("d2", "dog sat sat")])
    assert bm25_search(idx, "sat", k=100).doc_ids() == ["d2", "d1"]


def test_zero_score_docs_excluded():
    idx = build_index([("d1", "cat"), ("d2", "dog")])
    assert bm25_search(idx, "cat", k=10).doc_ids() == ["d1"]


def random_corpus(rng, max_docs=200, vocab=30, max_len=40):
    terms = [f"t{i}" for i in range(rng.randint(1, vocab))]
    n = rng.randint(1, max_docs)
    docs = []
    for i in range(n):
        length = rng.randint(0, max_len)
        docs.append((f"d{i:03d}", " ".join(rng.choice(terms) for _ in range(length))))
    return docs, terms


def test_oracle_equivalence_sample():
    rng = random.Random(1234)
    for _ in range(20):
        docs, terms = random_corpus(rng)
        idx = build_index(docs)
        for _ in range(5):
            query = " ".join(rng.choice(terms) for _ in range(rng.randint(1, 5)))
            k = rng.randint(1, 20)
            got = bm25_search(idx, query, k).pairs()
            want = oracle_bm25(docs, query, k)
            assert got == want


def test_monotone_in_term_frequency():
    # Adding one occurrence (tf+1, dl+1) never lowers the contribution,
    # other stats fixed.
    rng = random.Random(99)
    params = Bm25Params()
    for _ in range(500):
        n = rng.randint(1, 1000)
        df = rng.randint(1, n)
        tf = rng.randint(1, 50)
        dl = rng.randint(tf, 200)
        avgdl = rng.uniform(1.0, 200.0)
        before = term_weight(tf, dl, df, n, avgdl, params)
        after = term_weight(tf + 1, dl + 1, df, n, avgdl, params)
        assert after >= before


def test_determinism_across_runs():
    docs = [("d1", "cat sat mat"), ("d2", "dog sat"), ("d3", "cat dog cat")]
    idx1 = build_index(docs)
    idx2 = build_index(docs)
    r1 = bm25_search(idx1, "cat dog", k=3)
    r2 = bm25_search(idx2, "cat dog", k=3)
    assert r1.pairs() == r2.pairs()


def test_params_validation():
    with pytest.raises(ValidationError):
        build_index([("d1", "a")], params=Bm25Params(k1=-1))
    with pytest.raises(ValidationError):
        build_index([("d1", "a")], params=Bm25Params(b=1.5))

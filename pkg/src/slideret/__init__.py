"""Slide retrieval benchmark engine.

Retrieval over precomputed artifacts (captions, single- and multi-vector
embeddings), rank fusion, two-stage reranking, and tabular
effectiveness/latency/storage reporting.
"""

__version__ = "0.1.0"

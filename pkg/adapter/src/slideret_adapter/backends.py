"""Model backend registry.

Every captioner/encoder/scorer lives behind a name looked up here. The
``stub`` backend is fully deterministic (hash-seeded) and needs no
weights; real model backends register alongside it and are loaded only
when named, so the engine side never drags in inference dependencies.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np


class BackendError(Exception):
    pass


def _seed_from(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


class StubCaptioner:
    """Deterministic caption text derived from the image path."""

    name = "stub"

    def caption(self, image_path: Path, prompt: str) -> str:
        if not image_path.exists():
            raise BackendError(f"missing image file: {image_path}")
        stem = image_path.stem.replace("_", " ").replace("-", " ")
        digest = hashlib.sha256(image_path.name.encode("utf-8")).hexdigest()[:8]
        return f"Slide {stem}: synthetic caption {digest} describing charts and tables."


class StubTextEncoder:
    """Hash-seeded unit vectors; one pooled row or one row per token."""

    name = "stub"

    def __init__(self, dim: int = 8, max_tokens: int = 16):
        self.dim = dim
        self.max_tokens = max_tokens

    def _vector(self, key: str) -> np.ndarray:
        rng = np.random.default_rng(_seed_from(key))
        v = rng.normal(size=self.dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def encode_single(self, text: str) -> np.ndarray:
        return self._vector(text).reshape(1, self.dim)

    def encode_multi(self, text: str) -> np.ndarray:
        tokens = re.findall(r"[^\W_]+", text.lower()) or ["empty"]
        rows = [self._vector(tok) for tok in tokens[: self.max_tokens]]
        return np.vstack(rows)


class StubImageEncoder:
    """Hash-seeded patch matrix per image file; stands in for a visual encoder."""

    name = "stub"

    def __init__(self, patches: int = 16, dim: int = 8):
        self.patches = patches
        self.dim = dim

    def encode(self, image_path: Path) -> np.ndarray:
        if not image_path.exists():
            raise BackendError(f"missing image file: {image_path}")
        rng = np.random.default_rng(_seed_from(str(image_path.name)))
        m = rng.normal(size=(self.patches, self.dim)).astype(np.float32)
        return m / np.linalg.norm(m, axis=1, keepdims=True)


def term_overlap_score(query_text: str, caption: str) -> float:
    """The stub reranker: fraction of query terms present in the caption."""
    terms = set(re.findall(r"[^\W_]+", query_text.lower()))
    if not terms:
        return 0.0
    caption_terms = set(re.findall(r"[^\W_]+", caption.lower()))
    return len(terms & caption_terms) / len(terms)


CAPTIONERS = {"stub": StubCaptioner}
TEXT_ENCODERS = {"stub": StubTextEncoder}
IMAGE_ENCODERS = {"stub": StubImageEncoder}
SCORERS = {"stub": term_overlap_score}


def resolve(registry: dict, name: str, what: str):
    if name not in registry:
        raise BackendError(
            f"unknown {what} backend {name!r}; available: {sorted(registry)} "
            "(real model backends register here)"
        )
    return registry[name]

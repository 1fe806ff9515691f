"""Declarative experiment configuration files.

A config is a JSON document naming the dataset artifacts, the engines,
and the pipeline stages; every relative path resolves against the config
file's directory so experiment descriptions can live in a repo.

Example::

    {
      "label": "rrf-visual-textual+oracle",
      "manifest": "corpus.jsonl",
      "queries": "queries.jsonl",
      "qrels": "qrels.txt",
      "engines": [
        {"name": "visual", "kind": "late", "store": "vis", "query_store": "qvis"},
        {"name": "textual", "kind": "late", "store": "cap", "query_store": "qcap"}
      ],
      "pipeline": {
        "retrievers": ["visual", "textual"],
        "fusion": {"method": "rrf", "rrf_kappa": 60},
        "reranker": {"kind": "builtin", "name": "oracle"},
        "candidates_k": 100,
        "final_n": 10
      }
    }

Reranker kinds: ``builtin`` (oracle, lexical_overlap) or ``external``
(command speaking the scorer line protocol, optional timeout_s).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bm25 import InvertedIndex, build_index
from .dense import load_dense
from .errors import FormatError, ValidationError
from .fusion import FusionSpec
from .late import load_multi
from .pipeline import (
    Bm25Retriever,
    DenseRetriever,
    LateRetriever,
    PipelineConfig,
    builtin_scorers,
    external_scorer,
)
from .store import CorpusManifest, Query, load_manifest, load_qrels, load_queries, read_embeddings


@dataclass
class ExperimentConfig:
    label: str
    manifest_path: Path
    queries_path: Path
    qrels_path: Path | None
    engines: list[dict]
    pipeline: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read config {path}: {exc}") from exc
        base = path.parent
        for key in ("label", "manifest", "queries", "engines", "pipeline"):
            if key not in raw:
                raise ValidationError(f"{path}: config missing {key!r}")
        return cls(
            label=str(raw["label"]),
            manifest_path=base / raw["manifest"],
            queries_path=base / raw["queries"],
            qrels_path=(base / raw["qrels"]) if raw.get("qrels") else None,
            engines=raw["engines"],
            pipeline=raw["pipeline"],
            base_dir=base,
        )


def _query_vectors(store_path: Path, flatten: bool) -> dict[str, np.ndarray]:
    entries = read_embeddings(store_path)
    if flatten:
        return {e.doc_id: e.values.reshape(-1).astype(np.float32) for e in entries}
    return {e.doc_id: e.values.astype(np.float32) for e in entries}


def build_engine(spec: dict, manifest: CorpusManifest, base_dir: Path):
    name = spec.get("name")
    kind = spec.get("kind")
    if not name or kind not in ("bm25", "dense", "late"):
        raise ValidationError(f"engine needs a name and kind in (bm25, dense, late): {spec}")
    if kind == "bm25":
        if "index" in spec:
            index = InvertedIndex.load(base_dir / spec["index"])
        else:
            fieldname = spec.get("field", "caption")
            if fieldname not in ("caption", "ocr"):
                raise ValidationError(f"engine {name!r}: field must be caption or ocr")
            docs = [
                (d.doc_id, d.caption if fieldname == "caption" else (d.ocr_text or ""))
                for d in manifest.docs
            ]
            index = build_index(docs, field_name=fieldname)
        return Bm25Retriever(name, index)
    if "store" not in spec or "query_store" not in spec:
        raise ValidationError(f"engine {name!r}: {kind} engines need store and query_store")
    if kind == "dense":
        return DenseRetriever(
            name, load_dense(base_dir / spec["store"]), _query_vectors(base_dir / spec["query_store"], True)
        )
    return LateRetriever(
        name, load_multi(base_dir / spec["store"]), _query_vectors(base_dir / spec["query_store"], False)
    )


def build_pipeline(config: ExperimentConfig) -> tuple[PipelineConfig, list[Query], CorpusManifest]:
    manifest = load_manifest(config.manifest_path)
    queries = load_queries(config.queries_path)
    engines = {
        spec.get("name"): build_engine(spec, manifest, config.base_dir) for spec in config.engines
    }
    spec = config.pipeline
    names = spec.get("retrievers", [])
    missing = [n for n in names if n not in engines]
    if missing:
        raise ValidationError(f"pipeline references undefined engines: {missing}")
    retrievers = [engines[n] for n in names]

    fusion = None
    if spec.get("fusion"):
        f = spec["fusion"]
        fusion = FusionSpec(
            method=f.get("method", "composite"),
            rrf_kappa=float(f.get("rrf_kappa", 60.0)),
            pad_source=f.get("pad_source", "first"),
            target_k=int(spec.get("candidates_k", 100)),
        )

    scorer = None
    scorer_name = ""
    if spec.get("reranker"):
        r = spec["reranker"]
        if r.get("kind") == "builtin":
            qrels = load_qrels(config.qrels_path) if config.qrels_path else None
            available = builtin_scorers(qrels)
            scorer_name = r.get("name", "")
            if scorer_name not in available:
                raise ValidationError(f"unknown builtin scorer {scorer_name!r}")
            if scorer_name == "oracle" and qrels is None:
                raise ValidationError("oracle scorer requires a qrels path in the config")
            scorer = available[scorer_name]
        elif r.get("kind") == "external":
            command = r.get("command")
            if not command:
                raise ValidationError("external reranker needs a command")
            scorer = external_scorer(command, float(r.get("timeout_s", 120.0)))
            scorer_name = r.get("name", "external")
        else:
            raise ValidationError(f"reranker kind must be builtin or external: {r}")

    final_n = int(spec.get("final_n", 10))
    candidates_k = int(spec.get("candidates_k", final_n if scorer is None else 100))
    pipeline = PipelineConfig(
        retrievers=retrievers,
        fusion=fusion,
        scorer=scorer,
        scorer_name=scorer_name,
        candidates_k=candidates_k,
        final_n=final_n,
    )
    pipeline.validate()
    return pipeline, queries, manifest

"""Effectiveness and efficiency evaluation: NDCG@10, Recall@10, latency
aggregation, and report rows in the benchmark table shape.

NDCG uses binary gains with a log2(i+1) discount; the ideal DCG places
min(|relevant|, k) relevant docs in the leading ranks. Queries judged in
the qrels but absent from a run contribute zero rather than being
skipped, so a partial run cannot inflate its means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, ValidationError
from .results import RankedList, read_run


def ndcg_at_k(run: RankedList, qrels: dict[str, set[str]], k: int = 10) -> float:
    if run.query_id not in qrels:
        raise ValidationError(f"query {run.query_id!r} absent from qrels")
    relevant = qrels[run.query_id]
    dcg = 0.0
    for i, entry in enumerate(run.entries[:k], start=1):
        if entry.doc_id in relevant:
            dcg += 1.0 / math.log2(i + 1)
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(relevant), k) + 1))
    return dcg / ideal if ideal > 0 else 0.0


def recall_at_k(run: RankedList, qrels: dict[str, set[str]], k: int = 10) -> float:
    if run.query_id not in qrels:
        raise ValidationError(f"query {run.query_id!r} absent from qrels")
    relevant = qrels[run.query_id]
    hits = sum(1 for e in run.entries[:k] if e.doc_id in relevant)
    return hits / len(relevant)


@dataclass
class EvalResult:
    """Percent metrics over all qrels queries (means are plain arithmetic)."""

    per_query_ndcg: dict[str, float] = field(default_factory=dict)
    per_query_recall: dict[str, float] = field(default_factory=dict)

    @property
    def query_count(self) -> int:
        return len(self.per_query_ndcg)

    @property
    def mean_ndcg(self) -> float:
        return 100.0 * sum(self.per_query_ndcg.values()) / self.query_count if self.query_count else 0.0

    @property
    def mean_recall(self) -> float:
        return 100.0 * sum(self.per_query_recall.values()) / self.query_count if self.query_count else 0.0


@dataclass
class BenchReport:
    label: str
    result: EvalResult
    retrieval_seconds: float = 0.0
    rerank_seconds: float = 0.0
    storage_gb: float = 0.0

    def latency_cell(self) -> str:
        # Table cell "a + b" splits retrieval and reranking time.
        if self.rerank_seconds > 0:
            return f"{self.retrieval_seconds:.2f} + {self.rerank_seconds:.2f}"
        return f"{self.retrieval_seconds:.2f}"

    def row(self) -> tuple[str, str, str, str, str]:
        return (
            self.label,
            f"{self.result.mean_ndcg:.1f}",
            f"{self.result.mean_recall:.1f}",
            self.latency_cell(),
            f"{self.storage_gb:.3f}",
        )


def evaluate_runs(runs: list[RankedList], qrels: dict[str, set[str]], k: int = 10) -> EvalResult:
    by_query = {rl.query_id: rl for rl in runs}
    result = EvalResult()
    for query_id in qrels:
        rl = by_query.get(query_id, RankedList(query_id, []))
        result.per_query_ndcg[query_id] = ndcg_at_k(rl, qrels, k)
        result.per_query_recall[query_id] = recall_at_k(rl, qrels, k)
    return result


def read_timings(path: str | Path) -> dict[str, tuple[float, float]]:
    """Timing file: ``query_id retrieval_s rerank_s`` per line."""
    timings: dict[str, tuple[float, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}: line {lineno}: expected 3 fields")
            try:
                timings[parts[0]] = (float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: bad seconds value") from exc
    return timings


def write_timings(timings: dict[str, tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# query_id retrieval_s rerank_s\n")
        for query_id, (retr, rerank) in timings.items():
            fh.write(f"{query_id} {retr:.6f} {rerank:.6f}\n")


def aggregate(
    run_path: str | Path,
    qrels_path_or_map,
    timings: dict[str, tuple[float, float]] | None = None,
    label: str = "",
    storage_gb: float = 0.0,
    k: int = 10,
) -> BenchReport:
    from .store import load_qrels

    qrels = qrels_path_or_map if isinstance(qrels_path_or_map, dict) else load_qrels(qrels_path_or_map)
    runs = read_run(run_path)
    result = evaluate_runs(runs, qrels, k)
    retr = rerank = 0.0
    if timings:
        retr = sum(t[0] for t in timings.values()) / len(timings)
        rerank = sum(t[1] for t in timings.values()) / len(timings)
    return BenchReport(label=label, result=result, retrieval_seconds=retr,
                       rerank_seconds=rerank, storage_gb=storage_gb)


REPORT_COLUMNS = ("Configuration", "NDCG@10", "Recall@10", "Inf. Time", "Storage (GB)")
REPORT_FOOTER = "GB = GiB (2^30 bytes)."


def render_table(reports: list[BenchReport]) -> str:
    """One row per configuration, stable order by label, footer pinning the
    GiB convention."""
    rows = [r.row() for r in sorted(reports, key=lambda r: r.label)]
    widths = [max(len(col), *(len(row[i]) for row in rows)) if rows else len(col)
              for i, col in enumerate(REPORT_COLUMNS)]
    lines = [
        " | ".join(col.ljust(widths[i]) for i, col in enumerate(REPORT_COLUMNS)),
        "-+-".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    lines.append(REPORT_FOOTER)
    return "\n".join(lines)


def report_to_kv(report: BenchReport) -> str:
    """Machine-readable key-value lines mirroring the table row."""
    return "\n".join(
        [
            f"label={report.label}",
            f"queries={report.result.query_count}",
            f"ndcg_at_10={report.result.mean_ndcg:.6f}",
            f"recall_at_10={report.result.mean_recall:.6f}",
            f"retrieval_s={report.retrieval_seconds:.6f}",
            f"rerank_s={report.rerank_seconds:.6f}",
            f"storage_gb={report.storage_gb:.3f}",
        ]
    ) + "\n"


def report_from_kv(path: str | Path) -> BenchReport:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}: line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key] = value
    try:
        n = int(values.get("queries", "0"))
        result = EvalResult(
            per_query_ndcg={f"q{i}": float(values["ndcg_at_10"]) / 100.0 for i in range(n)},
            per_query_recall={f"q{i}": float(values["recall_at_10"]) / 100.0 for i in range(n)},
        )
        return BenchReport(
            label=values["label"],
            result=result,
            retrieval_seconds=float(values["retrieval_s"]),
            rerank_seconds=float(values["rerank_s"]),
            storage_gb=float(values["storage_gb"]),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing key {exc.args[0]!r}") from exc

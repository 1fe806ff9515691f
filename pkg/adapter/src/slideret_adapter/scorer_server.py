"""Reranker server speaking the engine's scorer line protocol.

Reads one JSON request per line on stdin and answers one JSON response
per line on stdout (UTF-8, LF), one score per candidate, strictly in
request order. Malformed request lines are reported on stderr and the
server keeps running; a fatal model-load failure exits nonzero.
"""

from __future__ import annotations

import json
import sys

from .backends import SCORERS, BackendError, resolve


def handle_request(line: str, score_fn) -> str:
    request = json.loads(line)
    query_id = request["query_id"]
    text = request.get("text", "")
    candidates = request["candidates"]
    scores = [
        {"doc_id": c["doc_id"], "score": float(score_fn(text, c.get("caption", "")))}
        for c in candidates
    ]
    return json.dumps({"query_id": query_id, "scores": scores}, ensure_ascii=False)


def serve(model: str, stdin=None, stdout=None, stderr=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        score_fn = resolve(SCORERS, model, "scorer")
    except BackendError as exc:
        print(f"fatal: {exc}", file=stderr)
        return 2
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            response = handle_request(line, score_fn)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            print(f"error: malformed request line ({exc})", file=stderr)
            stderr.flush()
            continue
        print(response, file=stdout)
        stdout.flush()
    return 0

"""Slide captioning into engine manifest records.

Each image becomes one JSON Lines manifest record (doc_id, deck_id,
caption, image_path) the engine can ingest directly. doc_id is the image
file stem, deck_id its parent directory name. Captioning failures are
logged and skipped; the job reports them so the CLI can exit nonzero.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .backends import CAPTIONERS, BackendError, resolve

DEFAULT_CAPTION_PROMPT = (
    "This is a presentation slide. Provide a detailed caption that will be "
    "used in a RAG pipeline. If you see any charts, tables, diagrams etc, "
    "make sure to explain what you see. Don't provide any additional "
    "information or explanations e.g. about colors and backgrounds. Start "
    "doing the captioning immediately."
)


@dataclass
class CaptionJob:
    image_paths: list[Path]
    model: str = "stub"
    prompt: str = DEFAULT_CAPTION_PROMPT
    output_manifest: Path = Path("captions.jsonl")
    append: bool = False

    def validate(self) -> None:
        if not self.prompt:
            raise BackendError("caption prompt must be non-empty")
        if not self.image_paths:
            raise BackendError("no images given")


@dataclass
class CaptionOutcome:
    written: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)  # (path, reason)


def caption_slides(job: CaptionJob, log=lambda msg: print(msg, file=sys.stderr)) -> CaptionOutcome:
    job.validate()
    captioner = resolve(CAPTIONERS, job.model, "captioner")()
    outcome = CaptionOutcome()
    mode = "a" if job.append else "w"
    with open(job.output_manifest, mode, encoding="utf-8", newline="\n") as fh:
        for path in job.image_paths:
            path = Path(path)
            try:
                text = captioner.caption(path, job.prompt)
            except BackendError as exc:
                outcome.failures.append((str(path), str(exc)))
                log(f"caption failed for {path}: {exc}")
                continue
            record = {
                "doc_id": path.stem,
                "deck_id": path.parent.name or "deck",
                "caption": text,
                "image_path": str(path),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            outcome.written += 1
    return outcome

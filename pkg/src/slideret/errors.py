"""Exception types shared across the engine.

ValidationError maps to CLI exit code 1 (bad inputs, bad config),
StageError to exit code 2 (a pipeline stage failed at runtime).
"""


class SlideRetError(Exception):
    pass


class ValidationError(SlideRetError):
    pass


class FormatError(ValidationError):
    """Malformed artifact file (manifest, store, qrels, run, config)."""


class StageError(SlideRetError):
    """Runtime failure inside an engine, fusion, or scorer stage."""

    def __init__(self, message: str, stage: str | None = None, query_id: str | None = None):
        parts = []
        if stage:
            parts.append(f"stage={stage}")
        if query_id:
            parts.append(f"query_id={query_id}")
        suffix = f" [{', '.join(parts)}]" if parts else ""
        super().__init__(message + suffix)
        self.stage = stage
        self.query_id = query_id

"""Exception types shared across the toolkit."""


class PentraceError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PentraceError):
    """A file could not be parsed (malformed row, bad header, bad value)."""


class ValidationError(PentraceError):
    """Well-formed input violates a documented invariant."""


class SchemaError(PentraceError):
    """Feature names at predict time differ from the training-time schema."""

    def __init__(self, missing, extra):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        if not self.missing and not self.extra:
            detail = "same names in a different order"
        else:
            detail = f"missing={self.missing} extra={self.extra}"
        super().__init__(f"feature schema mismatch: {detail}")


class MissingTraitError(PentraceError):
    """A feature set requires strokes of a trait kind the task does not have."""

    def __init__(self, participant_id, task_id, kind):
        self.participant_id = participant_id
        self.task_id = task_id
        self.kind = kind
        super().__init__(
            f"participant {participant_id!r} task {task_id} has no {kind} strokes"
        )

"""Exception hierarchy shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class StrategyNotFoundError(EngineError):
    def __init__(self, strategy_id: str):
        super().__init__(f"unknown strategy id: {strategy_id}")
        self.strategy_id = strategy_id


class LifecycleError(EngineError):
    """Operation attempted on a dead strategy."""


class NoCandidatesError(EngineError):
    """No applicable strategies exist; the caller must run genesis first."""


class ValidationError(EngineError):
    """A record violates an invariant. ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SnapshotParseError(EngineError):
    """Malformed persisted snapshot; ``record`` identifies the first bad entry."""

    def __init__(self, record: str, message: str):
        super().__init__(f"record {record}: {message}")
        self.record = record


class TemplateError(EngineError):
    """Prompt rendering failed. ``placeholder`` names the unbound variable."""

    def __init__(self, placeholder: str):
        super().__init__(f"unbound placeholder: {placeholder}")
        self.placeholder = placeholder


class TransportError(EngineError):
    """Provider endpoint unreachable or returned a non-success status."""


class StructuredOutputError(EngineError):
    """Model reply failed schema validation after all retries."""

    def __init__(self, message: str, raw_reply: str = ""):
        super().__init__(message)
        self.raw_reply = raw_reply


class DimensionMismatchError(EngineError):
    pass


class ZeroNormError(EngineError):
    pass


class ConflictError(EngineError):
    """Concurrent operation rejected (turn in flight, epoch in flight)."""

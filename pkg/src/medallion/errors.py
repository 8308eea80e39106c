"""Exception taxonomy. Retryable errors are transient; validation errors fail fast."""


class MedallionError(Exception):
    """Base for all errors raised by this package."""


class ValidationError(MedallionError):
    """Invariant or precondition violation. Non-retryable."""


class SchemaValidationError(ValidationError):
    """A required source field is missing or mistyped. Non-retryable, fails the task fast."""

    def __init__(self, source_system: str, field: str, detail: str = ""):
        self.source_system = source_system
        self.field = field
        msg = f"schema validation failed for {source_system}: missing/invalid field {field!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class RetryableError(MedallionError):
    """Transient failure; the task may be retried with backoff."""


class SourceTimeoutError(RetryableError):
    """Simulated upstream timeout."""


class RateLimitedError(RetryableError):
    """Simulated HTTP 429 from the source."""


class CredentialExpiredError(RetryableError):
    """Token presented to the source is past its expiry."""


class ResumeTokenError(MedallionError):
    """Resume token is unknown to the change log; restart from 0 or a known checkpoint."""


class CycleError(ValidationError):
    """DAG edges form a cycle."""

    def __init__(self, cycle: list):
        self.cycle = list(cycle)
        super().__init__(f"dependency cycle: {' -> '.join(self.cycle)}")


class UnknownTaskError(ValidationError):
    """An edge names a task that was never declared."""


class NotFoundError(MedallionError):
    """Unknown run/task/dag id."""


class IllegalTransitionError(MedallionError):
    """Requested state change is not allowed (e.g. clearing a running task)."""


class CrashInjected(MedallionError):
    """Raised by test crash points to simulate a process dying mid-commit."""

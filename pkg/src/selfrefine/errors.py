"""Exception hierarchy.

``BackendError`` and its subclasses abort a session; the engine turns them
into a ``backend_error`` stop reason and still returns the incumbent.
"""

from __future__ import annotations


class RefineError(Exception):
    """Root of every error raised by this package."""


class InvalidQuery(RefineError, ValueError):
    pass


class InvalidAnswer(RefineError, ValueError):
    pass


class MissingDefect(RefineError, ValueError):
    pass


class OrderingError(RefineError, ValueError):
    """The vote prompt was asked to compare a newer answer against an older one."""


class InvalidTranscript(RefineError, ValueError):
    pass


class BackendError(RefineError):
    pass


class TransportError(BackendError):
    pass


class ServerError(BackendError):
    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class RateLimited(ServerError):
    pass


class AuthError(BackendError):
    pass


class RequestRejected(BackendError):
    """A 4xx other than 401/403/429; retrying would not help."""

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class MalformedResponse(BackendError):
    pass


class ScriptExhausted(BackendError):
    pass


class UnparseableVote(BackendError):
    """The vote reply named zero or several of the labels 0/1/2."""

    def __init__(self, raw: str) -> None:
        super().__init__(f"cannot parse vote reply {raw!r}")
        self.raw = raw


class ConfigError(RefineError):
    pass


class SchemaError(RefineError, ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCorpus(RefineError, ValueError):
    pass

"""Shared exception types."""

from __future__ import annotations


class TantoError(Exception):
    """Base class for all toolkit errors."""


class DatasetFormatError(TantoError):
    """A dataset record failed schema or invariant checks.

    Carries the one-based line number when the failure is tied to a
    specific record in a file.
    """

    def __init__(self, message: str, *, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownQuestionError(TantoError):
    """An answer or transcript record references a question id not in the dataset."""


class TemplateError(TantoError):
    """A prompt template is malformed or a rendering binding is incomplete."""


class BackendError(TantoError):
    """A model backend failed to produce a completion."""


class ReplayMissError(BackendError):
    """A replay backend received a request with no stored record.

    Never degraded to a zero-point attempt: a miss means the transcript
    does not cover the run being replayed.
    """


class LeakageError(TantoError):
    """A test-year question was about to leak into another question's prompt."""

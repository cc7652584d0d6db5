"""Exception types shared across the pipeline.

Plain invalid arguments (length mismatches, out-of-range values) raise
ValueError; everything operational gets a class here so callers can route
failures to the right exit code.
"""

from __future__ import annotations


class LexichainError(Exception):
    """Base class for all pipeline errors."""


class TransportError(LexichainError):
    """A backend request failed and the retry budget is spent."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(LexichainError):
    """The backend answered, but the payload violates the wire contract."""


class ScriptExhaustedError(LexichainError):
    """No mock rule matched a request; almost always a test-script bug."""


class ExtractionError(LexichainError):
    """Keyword scoring produced no parseable result within the retry budget."""


class IndexBuildError(LexichainError):
    """Lexicon index construction failed (bad vectors, dimension drift)."""


class EmptyDictionaryError(IndexBuildError):
    """A dictionary file yielded zero usable entries."""


class EmptyTranslationError(LexichainError):
    """The model returned an empty translation after cleanup."""


class DatasetError(LexichainError):
    """Dataset files are missing, misaligned, or the wrong size."""


class RunFailedError(LexichainError):
    """Too many sentences failed for the run to count."""

    def __init__(self, message: str, run_path=None, failures: int = 0, total: int = 0):
        super().__init__(message)
        self.run_path = run_path
        self.failures = failures
        self.total = total


class ComparisonError(LexichainError):
    """Run files are not mutually comparable (different data or metrics)."""

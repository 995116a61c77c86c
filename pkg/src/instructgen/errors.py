"""Exception types shared across the pipeline stages."""
from __future__ import annotations


class InstructGenError(Exception):
    """Base class for all engine errors."""


class ConfigError(InstructGenError):
    pass


# --- store ---

class UnknownRecord(InstructGenError):
    pass


class StaleStateTransition(InstructGenError):
    """Compare-and-swap transition found the record in an unexpected state."""


# --- ingest ---

class FetcherUnavailable(InstructGenError):
    """Transient fetcher outage; callers retry per backoff policy."""


class QuotaExceeded(InstructGenError):
    """Channel quota exhausted; the crawl for this channel halts."""


class IndexUnavailable(InstructGenError):
    pass


class AnchorMissing(InstructGenError):
    pass


class EmptyQueue(InstructGenError):
    """No records waiting; signals queue completion, not failure."""


# --- backends ---

class BackendTimeout(InstructGenError):
    pass


class EmptyCaption(InstructGenError):
    pass


class OCRUnavailable(InstructGenError):
    pass


class FixtureMissing(InstructGenError):
    """A mock backend had no fixture for the requested key."""


# --- templates / generation ---

class MissingTemplate(InstructGenError):
    pass


class ModeMismatch(InstructGenError):
    pass


class UnresolvedSlot(InstructGenError):
    pass


class ParseFailure(InstructGenError):
    """Backend response did not match the output format spec."""

    def __init__(self, message: str, raw: str = "", archive_path: str | None = None):
        super().__init__(message)
        self.raw = raw
        self.archive_path = archive_path


class MalformedOptions(ParseFailure):
    pass


class CountMismatch(ParseFailure):
    pass


class AnswerNotInOptions(ParseFailure):
    pass


# --- seed bank ---

class SeedParseError(InstructGenError):
    def __init__(self, message: str, path: str, line_no: int):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class InsufficientSeeds(InstructGenError):
    def __init__(self, pool_size: int, n: int):
        super().__init__(f"seed pool has {pool_size} eligible seeds, {n} requested")
        self.pool_size = pool_size
        self.n = n


class NoCaptionedImages(InstructGenError):
    pass


# --- converter ---

class UnknownAdapter(InstructGenError):
    pass


class SourceSchemaMismatch(InstructGenError):
    pass


# --- review ---

class EmptySelection(InstructGenError):
    pass


class AlreadyInReview(InstructGenError):
    pass


class BatchNotInRound(InstructGenError):
    pass


class LeaseConflict(InstructGenError):
    pass


class StaleLease(InstructGenError):
    pass


class InvalidCorrection(InstructGenError):
    def __init__(self, message: str, violations: list | None = None):
        super().__init__(message)
        self.violations = violations or []


class RoundIncomplete(InstructGenError):
    pass


# --- export ---

class UnresolvedImageRef(InstructGenError):
    pass


# --- pipeline ---

class StageFailure(InstructGenError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage

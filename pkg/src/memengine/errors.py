"""Exception hierarchy shared by every engine module."""

from __future__ import annotations


class MemEngineError(Exception):
    """Base class for all engine errors."""


class AffectDomainError(MemEngineError, ValueError):
    """An argument fell outside its mathematical domain."""


class EncodingDegenerate(MemEngineError):
    """No modality and no context tokens: nothing to anchor the unit on."""


class OrderingViolation(MemEngineError):
    """Timestamps or turn indices went backwards."""


class EmptyWindow(MemEngineError):
    """Aggregation was requested over an empty working-memory buffer."""


class MissingRecord(MemEngineError, KeyError):
    """A referenced long-term record id does not exist."""


class SnapshotCorrupt(MemEngineError):
    """A snapshot or log file failed to parse."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class VersionError(MemEngineError):
    """Snapshot format version is not supported."""


class ConfigError(MemEngineError, ValueError):
    """Invalid configuration values."""


class AlignmentError(MemEngineError, ValueError):
    """Prediction and truth streams have different lengths."""

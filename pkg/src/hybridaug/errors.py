"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, data/validation
errors -> 2, I/O errors (OSError and friends) -> 3.
"""

from __future__ import annotations


class HybridAugError(Exception):
    """Base class for all errors raised by this package."""


class DataError(HybridAugError):
    """Invalid or inconsistent data (bad manifest, bad label, bad config)."""


class ManifestError(DataError):
    """Manifest-level parse or validation failure, with location context."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownLabelError(ManifestError):
    pass


class DuplicateIdError(ManifestError):
    pass


class InsufficientClassError(DataError):
    """A sampler asked for more records of a class than the manifest has."""

    def __init__(self, label: str, wanted: int, available: int):
        self.label = label
        self.wanted = wanted
        self.available = available
        super().__init__(
            f"class {label}: requested {wanted} records, only {available} available"
        )


class EmptyMaskError(DataError):
    """Mask contains no foreground pixel."""


class DegenerateMaskError(DataError):
    """Mask too small or too flat to carry shape statistics."""


class Rejection(HybridAugError):
    """Template extraction declined an image; carries the QC reason.

    Not a programming error: catching Rejection is the normal way to
    classify an image as cut-paste ineligible.
    """

    EMPTY_MASK = "empty-mask"
    DEGENERATE_MASK = "degenerate-mask"
    ECCENTRIC = "eccentric"
    CIRCLE_OUT_OF_BOUNDS = "circle-out-of-bounds"

    def __init__(self, reason: str, value: float | None = None):
        self.reason = reason
        self.value = value
        detail = f" ({value:.4f})" if value is not None else ""
        super().__init__(f"rejected: {reason}{detail}")


class EmptyPoolError(DataError):
    """A donor or acceptor pool is empty."""


class PoolMismatchError(DataError):
    """Template pool does not match the counts an offline plan expects."""


class MissingEligibilityError(DataError):
    """A record has no eligibility flag while building an epoch schedule."""

    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"no eligibility flag for record {record_id!r}")


class StreamFormatError(DataError):
    """Malformed byte stream."""


class TruncatedError(StreamFormatError):
    def __init__(self, offset: int, message: str = "stream truncated"):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


class BadMagicError(StreamFormatError):
    pass


class VersionUnsupportedError(StreamFormatError):
    pass


class DimensionMismatchError(DataError):
    """Images in one batch frame must share a single height and width."""

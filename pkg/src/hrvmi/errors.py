"""Exception types raised across the package.

``HRVError`` subclasses fall into two buckets that the CLI maps to exit
codes: :class:`ValidationError` (bad input or configuration, exit 1) and
everything else (runtime failure, exit 2).
"""

from __future__ import annotations


class HRVError(Exception):
    """Base class for all package errors."""


class ValidationError(HRVError):
    """Input or configuration rejected before any work is done."""


# -- ingestion ---------------------------------------------------------------


class MalformedLine(ValidationError):
    def __init__(self, line_no: int, reason: str = "malformed row"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class NonMonotonicTime(ValidationError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: onset_ms decreases")


class EmptyRecording(ValidationError):
    pass


class TooFewBeats(HRVError):
    pass


# -- index computation -------------------------------------------------------


class TooFewIntervals(HRVError):
    pass


class SpanTooShort(HRVError):
    pass


class NoValidNeighbors(HRVError):
    pass


class NoAnchors(HRVError):
    pass


class InvalidParams(ValidationError):
    pass


# -- models and evaluation ---------------------------------------------------


class DegenerateClass(ValidationError):
    pass


class SingularCovariance(HRVError):
    pass


class ArityMismatch(ValidationError):
    pass


class TooSmall(ValidationError):
    pass


class FoldDegenerate(HRVError):
    pass


class SingleClass(ValidationError):
    pass


class DegenerateCell(ValidationError):
    pass


class SchemaError(ValidationError):
    pass

"""Exception hierarchy.

User-facing problems derive from :class:`RectIsoError` (CLI exit code 1).
Broken mathematical invariants raise :class:`InvariantViolation`, which is an
``AssertionError`` so that it is never swallowed by ``except RectIsoError``
(CLI exit code 2).
"""


class RectIsoError(Exception):
    """Base class for recoverable, user-caused errors."""


class SchemaError(RectIsoError):
    pass


class ParseError(RectIsoError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ValidationError(RectIsoError):
    pass


class EmptyDatasetError(RectIsoError):
    pass


class DegenerateLatticeError(RectIsoError):
    def __init__(self, message, dim=None):
        super().__init__(message)
        self.dim = dim


class EmptyGridError(RectIsoError):
    pass


class CapacityError(RectIsoError):
    pass


class InvalidRectangleError(RectIsoError):
    pass


class NotEstimableError(RectIsoError):
    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = list(points)


class NonConvergenceError(RectIsoError):
    def __init__(self, message, gap):
        super().__init__(message)
        self.gap = gap


class EmptyDomainError(RectIsoError):
    pass


class PreconditionError(RectIsoError):
    pass


class ExperimentError(RectIsoError):
    pass


class InvariantViolation(AssertionError):
    """A property that holds by construction was observed to fail."""

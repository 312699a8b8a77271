"""Exception types shared across the package."""


class TangencyLabError(Exception):
    """Base class for all package errors."""


class ConcentricError(TangencyLabError):
    """Two circles share a center, so no tangency point is defined."""


class NotNearTangentError(TangencyLabError):
    """A pair was passed to a tangency-rectangle construction but its gap is too large."""


class InvalidParamsError(TangencyLabError):
    """Generator or enumeration parameters violate a precondition.

    The message names the offending parameter so CLI diagnostics can echo it.
    """


class EmptyFamilyError(TangencyLabError):
    """An operation needs at least two points (or one) and got fewer."""


class ValidationError(TangencyLabError):
    """An experiment precondition failed hard (as opposed to a flagged row)."""


class DegenerateSweepError(TangencyLabError):
    """A log-log fit was requested on a sweep with no spread in the abscissa."""

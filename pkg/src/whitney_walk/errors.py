"""Exception hierarchy shared by all modules."""


class WhitneyWalkError(Exception):
    """Base class for errors raised by this package."""


class DomainError(WhitneyWalkError, ValueError):
    """A point is outside the region where an operation is defined."""


class UnsupportedCapability(WhitneyWalkError):
    """The body cannot answer this query (e.g. l_p distance for p != 1 on a membership-only body)."""


class MarginError(DomainError):
    """The point is too close to the boundary for the oracle's precision budget."""


class BoundaryPointError(DomainError):
    """The point lies on a dyadic cube boundary, so its cube is ambiguous."""


class LocateError(WhitneyWalkError):
    """No candidate level produced a Whitney cube containing the point."""


class StepFailure(WhitneyWalkError):
    """A random-walk step could not be completed."""


class SizeError(WhitneyWalkError):
    """A requested computation exceeds the supported problem size."""


class InconsistentVolume(WhitneyWalkError, ValueError):
    """The supplied body volume is incompatible with the enumerated cubes."""


class BodySpecError(WhitneyWalkError, ValueError):
    """A body description (e.g. JSON) is malformed.

    ``field`` names the offending entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

"""Exception hierarchy shared by all modules."""


class LandauSpectraError(Exception):
    """Base class for library errors."""


class DomainError(LandauSpectraError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedError(LandauSpectraError):
    """The requested operation is not available for this potential."""


class ShapeError(LandauSpectraError, ValueError):
    """Wrong potential shape or wrong matrix structure."""


class GapViolationError(LandauSpectraError, ValueError):
    """A spectral window touches or contains a Landau level."""


class InfiniteMeasureError(LandauSpectraError):
    """A level-set measure is infinite."""


class AccuracyError(LandauSpectraError):
    """Quadrature did not reach the requested accuracy.

    ``achieved`` holds the best relative discrepancy reached.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class DegenerateShiftError(LandauSpectraError):
    """A counting shift sits on (or numerically next to) an eigenvalue."""

"""
Exception hierarchy for cmcurves.

Argument-validation failures also derive from ``ValueError`` so callers that
catch the builtin keep working.
"""

from typing import Any, Optional


class CMCurvesError(Exception):
    """Base class for every error raised by cmcurves."""


class DomainError(CMCurvesError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(CMCurvesError, ValueError):
    """Invalid run configuration."""


class AccuracyError(CMCurvesError):
    """A series or quadrature failed to reach the requested accuracy."""

    def __init__(self, message: str, quantity: str = "", estimates: tuple = ()):
        super().__init__(message)
        self.quantity = quantity
        self.estimates = estimates


class PoleError(CMCurvesError, ValueError):
    """Evaluation at (or too close to) a pole."""

    def __init__(self, message: str, nearest: Optional[complex] = None, entry: Any = None):
        super().__init__(message)
        self.nearest = nearest
        self.entry = entry


class UnsupportedOrderError(CMCurvesError, ValueError):
    """Requested derivative order is above the supported range."""


class CollisionError(CMCurvesError):
    """Two particles came closer than the collision threshold."""

    def __init__(self, message: str, time: float = 0.0, pair: tuple = ()):
        super().__init__(message)
        self.time = time
        self.pair = pair


class StabilityError(CMCurvesError):
    """Energy drift exceeded the configured bound."""

    def __init__(self, message: str, drift: float = 0.0, time: float = 0.0):
        super().__init__(message)
        self.drift = drift
        self.time = time


class BranchCrossingError(CMCurvesError):
    """The tracked eigenvalue of L collided with another one."""

    def __init__(self, message: str, time: float = 0.0):
        super().__init__(message)
        self.time = time


class TrackingError(CMCurvesError):
    """Roots could not be matched unambiguously between samples."""


class SamplingError(CMCurvesError):
    """Least-squares sample system is ill-conditioned."""

    def __init__(self, message: str, condition: float = 0.0):
        super().__init__(message)
        self.condition = condition


class BranchPointError(CMCurvesError):
    """Continuation ran into a branch point."""

    def __init__(self, message: str, location: Optional[complex] = None):
        super().__init__(message)
        self.location = location


class InconsistencyError(CMCurvesError):
    """A lifted loop did not close within N repetitions."""


class UnsupportedCurveError(CMCurvesError):
    """The curve is outside what degree_check can handle."""


class ConsistencyError(CMCurvesError):
    """Two independent computations disagree."""


class GridError(CMCurvesError, ValueError):
    """A PDE grid point sits too close to a pole."""


class SearchError(CMCurvesError):
    """Newton search failed from every starting point."""


class SaddleEncounter(CMCurvesError):
    """Level-set tracing reached a zero of the differential."""

    def __init__(self, message: str, location: complex, polyline: Any = None):
        super().__init__(message)
        self.location = location
        self.polyline = polyline

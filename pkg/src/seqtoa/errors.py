"""Exception types raised by the estimation pipeline.

Everything numerical derives from :class:`EstimationError` so callers (and the
CLI) can distinguish estimation failures from I/O or schema problems.
"""


class EstimationError(Exception):
    """Base class for numerical/estimation failures."""


class UnderdeterminedError(EstimationError):
    """Fewer measurement rows than unknowns."""


class RankDeficiencyError(EstimationError):
    """Whitened design matrix is numerically rank deficient."""

    def __init__(self, message: str, numerical_rank: int):
        super().__init__(message)
        self.numerical_rank = numerical_rank


class ConditioningError(EstimationError):
    """A covariance or weight matrix is singular or not positive definite."""


class DegenerateGeometryError(EstimationError):
    """Geometry makes the problem unobservable (coincident/collinear nodes)."""


class NotPositiveDefiniteError(EstimationError):
    """A matrix that must be positive (semi)definite is not."""

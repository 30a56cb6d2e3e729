"""Exception hierarchy shared across the package."""


class RewardRiskError(Exception):
    """Base class for all package errors."""


class SchemaError(RewardRiskError):
    """A required column or field is missing or malformed."""


class GapError(RewardRiskError):
    """A monthly series has a hole in its date coverage."""

    def __init__(self, message, first_missing=None):
        super().__init__(message)
        self.first_missing = first_missing


class InsufficientDataError(RewardRiskError):
    """Too few observations to compute the requested quantity."""


class RangeError(RewardRiskError):
    """A split or window boundary falls outside the available data."""


class ConfigError(RewardRiskError):
    """An invalid learner or run configuration."""


class AlignmentError(RewardRiskError):
    """Two series that must share a month index do not."""


class SingularityError(RewardRiskError):
    """A regression design matrix is rank deficient or collinear."""


class UndefinedMetricError(RewardRiskError):
    """A metric has no defined value (zero variance, zero benchmark SSE)."""


class DomainError(RewardRiskError):
    """An input is outside the mathematical domain of an operation."""


class DependencyError(RewardRiskError):
    """A strategy needs a forecast column that was not supplied."""

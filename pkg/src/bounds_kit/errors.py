"""Exception and warning types shared across the package."""


class BoundsKitError(Exception):
    """Base class for all package-specific errors."""


class DataValidationError(BoundsKitError):
    """Input records violate the survey data contract.

    Carries the list of violations when raised by the loader, so callers
    can report every problem at once instead of one per run.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else []


class EstimationUndefinedError(BoundsKitError):
    """An estimator is undefined on the given data.

    Raised for empty estimation cells (a stratum with no participating
    students), zero weight totals, observations outside a declared
    support, or assumption sets refuted by the data.
    """


class ConfigError(BoundsKitError):
    """Invalid run configuration (bad regime spec, missing flags, ...)."""


class EstimationWarning(UserWarning):
    """Non-fatal estimation diagnostics, e.g. a school dropped because it
    has no participating students, or a monotone upper bound binding at
    the quantile rather than the participant mean."""

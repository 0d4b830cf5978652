"""Input validation helpers for the estimator API."""

from __future__ import annotations

from .errors import DataValidationError, EstimationUndefinedError
from .model import Dataset, validate


def check_dataset(dataset) -> Dataset:
    """Require a valid :class:`Dataset`; raise with every violation listed."""
    if not isinstance(dataset, Dataset):
        raise DataValidationError(
            f"expected a Dataset, got {type(dataset).__name__}; load one with "
            "bounds_kit.load_dataset or build_dataset")
    report = validate(dataset)
    if not report.ok:
        raise DataValidationError(
            "invalid dataset:\n" + report.summary(), violations=report.errors())
    return dataset


def check_alpha(alpha: float) -> float:
    """Require a quantile level usable for two-sided bounds."""
    alpha = float(alpha)
    if not (0.0 < alpha <= 0.5):
        raise EstimationUndefinedError(f"alpha must lie in (0, 0.5], got {alpha}")
    return alpha


def check_support(support_min, support_max) -> tuple[float, float]:
    """Require ordered, finite outcome-scale limits."""
    if support_min is None or support_max is None:
        raise EstimationUndefinedError("support_min and support_max are both required")
    lo, hi = float(support_min), float(support_max)
    if not lo < hi:
        raise EstimationUndefinedError(f"support_min={lo} must be below support_max={hi}")
    return lo, hi

"""Scikit-learn style estimator facade.

The functional API in :mod:`bounds_kit.regions` computes one region per
call; this wrapper packages the full workflow (validation, one pass per
plausible value, endpoint averaging) behind the familiar
construct-then-``fit`` pattern, with ``get_params`` / ``set_params`` and
``sklearn.clone`` compatibility for free.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .pv import aggregate_over_pvs
from .regions import AssumptionSet, parse_regime
from .validation import check_dataset


class MeanBoundsEstimator(BaseEstimator):
    """Interval (or point) estimator of mean achievement under
    two-stage non-participation.

    Parameters
    ----------
    regime : str or Regime, default="A1"
        Assumption set to maintain about non-participating students.
        One of ``WORST_CASE``, ``A1``, ``A1_1``, ``A1_2_A2``, ``A2_A3``,
        ``A2_A3_REPLACEMENT``, ``A1_A4``, ``A1_1_A4_1``.
    alpha : float, default=0.05
        Quantile level in (0, 0.5] confining the non-participant mean;
        required by the quantile regimes, ignored by the others.
    support_min, support_max : float, optional
        Known outcome-scale limits; required by ``WORST_CASE``.
    strict_monotone : bool, default=False
        For the monotone regime, keep the extreme case where the upper
        participant quantile falls below the participant mean (the upper
        bound then takes the minimum of the two).

    Attributes
    ----------
    region_ : IdentificationRegion
        Combined region, endpoints averaged across plausible values.
    aggregate_ : PvAggregate
        Per-plausible-value regions plus the combined one.
    lower_, upper_, width_ : float
        Endpoints and width of ``region_``.
    ingredients_ : CellIngredients
        Participation rates, participant mean and quantiles behind the
        endpoints (averaged across plausible values).

    Examples
    --------
    >>> est = MeanBoundsEstimator(regime="A1", alpha=0.05).fit(dataset)
    >>> est.lower_, est.upper_                          # doctest: +SKIP
    (470.0, 530.0)
    """

    def __init__(
        self,
        regime="A1",
        alpha: float = 0.05,
        support_min: float | None = None,
        support_max: float | None = None,
        strict_monotone: bool = False,
    ):
        self.regime = regime
        self.alpha = alpha
        self.support_min = support_min
        self.support_max = support_max
        self.strict_monotone = strict_monotone

    def assumptions(self) -> AssumptionSet:
        """Resolve constructor parameters into a validated assumption set."""
        regime = parse_regime(self.regime)
        return AssumptionSet(
            regime=regime,
            alpha=self.alpha,
            support_min=self.support_min,
            support_max=self.support_max,
        )

    def fit(self, dataset, y=None):
        """Estimate the identification region from a validated dataset.

        Parameters
        ----------
        dataset : Dataset
            Linked survey records (see :func:`bounds_kit.load_dataset`).
        y : ignored
            Present for scikit-learn API compatibility.
        """
        check_dataset(dataset)
        aggregate = aggregate_over_pvs(
            dataset, self.assumptions(), strict_monotone=self.strict_monotone)
        self.aggregate_ = aggregate
        self.region_ = aggregate.combined
        self.lower_ = aggregate.combined.lower
        self.upper_ = aggregate.combined.upper
        self.width_ = aggregate.combined.width
        self.ingredients_ = aggregate.combined.ingredients
        return self

    def interval(self) -> tuple[float, float]:
        """Fitted (lower, upper) endpoints."""
        self._check_fitted()
        return self.lower_, self.upper_

    def _check_fitted(self):
        if not hasattr(self, "region_"):
            raise NotFittedError(
                "This MeanBoundsEstimator instance is not fitted yet; "
                "call fit(dataset) first.")

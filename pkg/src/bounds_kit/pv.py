"""Plausible-value aggregation.

Assessment files carry several plausible values per participating
student.  Standard practice is to run an estimator once per plausible
value and report the average of the estimates; here regions are combined
endpoint-wise (the mean of the lower endpoints, the mean of the uppers).
Measurement spread across plausible values is visible in ``per_pv`` but
is not propagated into the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataValidationError
from .model import Dataset
from .regions import (
    AssumptionSet,
    CellIngredients,
    IdentificationRegion,
    StratumComponent,
    compute_region,
)


@dataclass(frozen=True)
class PvAggregate:
    """Per-plausible-value regions plus their endpoint-wise average."""

    per_pv: tuple[IdentificationRegion, ...]
    combined: IdentificationRegion

    @property
    def spread(self) -> float:
        """Largest absolute deviation of any per-PV endpoint from the
        combined endpoint; a cheap view of measurement disagreement."""
        lo = max(abs(r.lower - self.combined.lower) for r in self.per_pv)
        hi = max(abs(r.upper - self.combined.upper) for r in self.per_pv)
        return max(lo, hi)


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _mean_optional(values):
    values = list(values)
    if any(v is None for v in values):
        return None
    return _mean(values)


def _combine_ingredients(cells: list[CellIngredients]) -> CellIngredients:
    return CellIngredients(
        mu=_mean(c.mu for c in cells),
        p1=_mean(c.p1 for c in cells),
        p2=_mean(c.p2 for c in cells),
        p=_mean(c.p for c in cells),
        q_lo=_mean_optional(c.q_lo for c in cells),
        q_hi=_mean_optional(c.q_hi for c in cells),
        n_participants=cells[0].n_participants,
    )


def _combine_strata(regions: list[IdentificationRegion]):
    if regions[0].per_stratum is None:
        return None
    combined = []
    for idx, first in enumerate(regions[0].per_stratum):
        parts = [r.per_stratum[idx] for r in regions]
        combined.append(
            StratumComponent(
                stratum_id=first.stratum_id,
                share=first.share,
                lower=_mean(p.lower for p in parts),
                upper=_mean(p.upper for p in parts),
                ingredients=_combine_ingredients([p.ingredients for p in parts]),
            )
        )
    return tuple(combined)


def aggregate_over_pvs(
    dataset: Dataset, assumptions: AssumptionSet, strict_monotone: bool = False
) -> PvAggregate:
    """Estimate the region once per plausible value and average endpoints.

    With a single plausible value this reduces to the raw estimator.
    """
    for stu in dataset.students:
        if stu.z2 != 1:
            continue
        n = 0 if stu.pv is None else len(stu.pv)
        if n != dataset.pv_count:
            missing = n + 1
            raise DataValidationError(
                f"student {stu.student_id!r} is missing plausible value {missing} "
                f"(carries {n} of {dataset.pv_count})")

    per_pv = tuple(
        compute_region(dataset, assumptions, pv_index=k, strict_monotone=strict_monotone)
        for k in range(dataset.pv_count)
    )
    combined = IdentificationRegion(
        lower=_mean(r.lower for r in per_pv),
        upper=_mean(r.upper for r in per_pv),
        regime=per_pv[0].regime,
        alpha=per_pv[0].alpha,
        ingredients=_combine_ingredients([r.ingredients for r in per_pv]),
        per_stratum=_combine_strata(list(per_pv)),
        pv_index=None,
    )
    return PvAggregate(per_pv=per_pv, combined=combined)

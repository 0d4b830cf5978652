"""Design-weighted sample statistics and non-response adjustment factors.

These are the building blocks for every interval and point estimator in
the package: weighted means, weighted quantiles, the two-stage
participation-rate estimators, and the school- and stratum-level
non-response adjustment factors.

Weighted quantile convention
----------------------------
``weighted_quantile`` is the left-continuous inverse of the weighted
empirical CDF: the smallest observed value whose normalized cumulative
weight reaches the requested level.  Equal values are merged before
inversion, and tie groups are accumulated in a canonical order, so the
result never depends on input ordering.  Interval-bound endpoints depend
directly on this convention; any alternative convention (linear
interpolation, right-continuous inversion) gives different endpoints at
quantile boundaries.

All scalar accumulations use compensated summation (``math.fsum``), so
results are exactly rounded and independent of summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EstimationUndefinedError
from .model import Dataset, SchoolRecord, StratumRecord

PRODUCT_TOL = 1e-12


@dataclass(frozen=True)
class WeightedSample:
    """Paired outcome values and positive design weights.

    Raises
    ------
    EstimationUndefinedError
        If empty, mismatched in length, or any weight is non-positive or
        non-finite.
    """

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise EstimationUndefinedError("weighted sample is empty")
        if len(self.values) != len(self.weights):
            raise EstimationUndefinedError(
                f"{len(self.values)} values but {len(self.weights)} weights")
        if not all(math.isfinite(v) for v in self.values):
            raise EstimationUndefinedError("values must be finite")
        if not all(math.isfinite(w) and w > 0 for w in self.weights):
            raise EstimationUndefinedError("weights must be positive and finite")

    @classmethod
    def from_arrays(cls, values, weights) -> "WeightedSample":
        return cls(tuple(float(v) for v in values), tuple(float(w) for w in weights))


@dataclass(frozen=True)
class ParticipationEstimates:
    """Two-stage participation rates: school stage, student stage, joint.

    ``p`` is exactly the product of the two stage rates.
    """

    p1: float
    p2: float
    p: float

    def __post_init__(self):
        for name, value in (("p1", self.p1), ("p2", self.p2), ("p", self.p)):
            if not (0.0 <= value <= 1.0):
                raise EstimationUndefinedError(f"{name}={value} outside [0, 1]")
        if abs(self.p - self.p1 * self.p2) > PRODUCT_TOL:
            raise EstimationUndefinedError(
                f"p={self.p!r} is not the product of p1={self.p1!r} and p2={self.p2!r}")

    @classmethod
    def from_stages(cls, p1: float, p2: float) -> "ParticipationEstimates":
        return cls(p1=p1, p2=p2, p=p1 * p2)


def weighted_mean(sample: WeightedSample) -> float:
    """Weight-normalized average ``sum(w*y) / sum(w)``."""
    total = math.fsum(sample.weights)
    if total <= 0:
        raise EstimationUndefinedError("total weight is zero")
    return math.fsum(w * v for w, v in zip(sample.weights, sample.values)) / total


def weighted_quantile(sample: WeightedSample, alpha: float) -> float:
    """Left-continuous weighted-CDF inverse at level ``alpha``.

    Parameters
    ----------
    sample : WeightedSample
    alpha : float
        Level in (0, 1).

    Returns
    -------
    float
        The smallest value ``v`` such that the cumulative weight of
        values ``<= v`` is at least ``alpha`` times the total weight.
    """
    if not (0.0 < alpha < 1.0):
        raise EstimationUndefinedError(f"alpha must lie in (0, 1), got {alpha}")
    values = np.asarray(sample.values, dtype=float)
    weights = np.asarray(sample.weights, dtype=float)
    # Canonical (value, weight) order makes tie-group accumulation
    # independent of the input permutation.
    order = np.lexsort((weights, values))
    values = values[order]
    weights = weights[order]
    uniq, start = np.unique(values, return_index=True)
    group_w = np.add.reduceat(weights, start)
    cumulative = np.cumsum(group_w)
    target = alpha * cumulative[-1]
    idx = int(np.searchsorted(cumulative, target, side="left"))
    if idx >= len(uniq):  # fp guard when alpha*total exceeds the last cumsum
        idx = len(uniq) - 1
    return float(uniq[idx])


def design_schools(dataset: Dataset) -> tuple[SchoolRecord, ...]:
    """Originally sampled schools: every row without a replacement link."""
    return tuple(s for s in dataset.schools if s.replacement_of is None)


def school_participation_rate(schools) -> float:
    """Estimated share of enrolled students in schools that would participate.

    Enrollment-weighted by the school design weights; any replacement
    rows in ``schools`` are excluded so the rate reflects the original
    sample only.
    """
    schools = [s for s in schools if s.replacement_of is None]
    if not schools:
        raise EstimationUndefinedError("no originally sampled schools")
    den = math.fsum(s.school_weight * s.enrollment for s in schools)
    if den <= 0:
        raise EstimationUndefinedError("school participation rate: zero denominator")
    num = math.fsum(s.school_weight * s.enrollment for s in schools if s.z1 == 1)
    return num / den


def _school_row_weights(students, school: SchoolRecord):
    """Weight pairs (participant total, all-sampled total) for one school.

    Student rows carry the weights.  When the file omits individual
    non-participant rows (``sampled_student_count`` exceeds the rows
    present) the missing students are counted at the school's mean
    row weight, since within-school selection is equal-probability.
    Returns ``None`` when the school has sampled students but no rows at
    all, in which case no weight information exists.
    """
    n_rows = len(students)
    n_sampled = max(school.sampled_student_count, n_rows)
    if n_sampled == 0:
        return None
    if n_rows == 0:
        return None
    w_all = math.fsum(s.student_weight for s in students)
    w_part = math.fsum(s.student_weight for s in students if s.z2 == 1)
    if n_sampled > n_rows:
        w_all += (n_sampled - n_rows) * (w_all / n_rows)
    return w_part, w_all


def student_participation_rate(dataset: Dataset, schools=None) -> float:
    """Estimated share of students who would participate within
    participating schools, weighted by student design weights."""
    if schools is None:
        schools = design_schools(dataset)
    num_terms = []
    den_terms = []
    for school in schools:
        if school.z1 != 1:
            continue
        pair = _school_row_weights(dataset.students_by_school.get(school.school_id, ()), school)
        if pair is None:
            continue
        w_part, w_all = pair
        num_terms.append(w_part)
        den_terms.append(w_all)
    den = math.fsum(den_terms)
    if den <= 0:
        raise EstimationUndefinedError(
            "student participation rate: no sampled students in participating schools")
    return math.fsum(num_terms) / den


def participation_rate(dataset: Dataset, schools=None) -> ParticipationEstimates:
    """Joint participation estimate: school stage times student stage."""
    if schools is None:
        schools = design_schools(dataset)
    p1 = school_participation_rate(schools)
    p2 = student_participation_rate(dataset, schools)
    return ParticipationEstimates.from_stages(p1, p2)


def school_adjustment_factor(school: SchoolRecord, students) -> float:
    """Within-school non-response factor: participating over sampled count.

    Dividing a participating student's weight by this factor restores the
    school's sampled-count contribution under the assumption that
    participation is ignorable within the school.  A factor of zero means
    the school contributes nothing downstream.
    """
    if school.z1 != 1:
        raise EstimationUndefinedError(
            f"school {school.school_id!r} did not participate; no adjustment factor")
    n_rows = len(students)
    n_sampled = max(school.sampled_student_count, n_rows)
    if n_sampled == 0:
        raise EstimationUndefinedError(
            f"school {school.school_id!r} has zero sampled students")
    n_part = sum(1 for s in students if s.z2 == 1)
    return n_part / n_sampled


def stratum_adjustment_factor(
    stratum: StratumRecord, schools, use_replacements: bool = False
) -> float:
    """Stratum-level non-response factor: participating over sampled schools.

    With ``use_replacements`` each recipient slot filled by a replacement
    school counts as participating, which is how the factor changes when
    replacement data are brought into point estimation.
    """
    originals = [s for s in schools if s.replacement_of is None]
    if not originals:
        raise EstimationUndefinedError(
            f"stratum {stratum.stratum_id!r} has zero sampled schools")
    participating = sum(1 for s in originals if s.z1 == 1)
    if use_replacements:
        filled = {s.replacement_of for s in schools if s.replacement_of is not None}
        participating += sum(1 for s in originals if s.z1 == 0 and s.school_id in filled)
    return participating / len(originals)


def participant_sample(
    dataset: Dataset, schools, pv_index: int = 0, school_adjusted: bool = False
) -> tuple[WeightedSample, list[str]]:
    """Collect participating students' outcomes and weights.

    Parameters
    ----------
    dataset : Dataset
    schools : iterable of SchoolRecord
        The estimation cell (typically one stratum's originally sampled
        schools, or all of them).
    pv_index : int
        Which plausible value to treat as the outcome.
    school_adjusted : bool
        If True, divide each weight by the school's within-school
        non-response factor.  Schools whose factor is zero are skipped;
        their ids are returned so callers can warn.

    Returns
    -------
    (WeightedSample, skipped_school_ids)
    """
    values: list[float] = []
    weights: list[float] = []
    skipped: list[str] = []
    for school in schools:
        if school.z1 != 1:
            continue
        students = dataset.students_by_school.get(school.school_id, ())
        participants = [s for s in students if s.z2 == 1]
        if not participants:
            if school_adjusted and (school.sampled_student_count or students):
                skipped.append(school.school_id)
            continue
        factor = 1.0
        if school_adjusted:
            factor = school_adjustment_factor(school, students)
            if factor == 0.0:
                skipped.append(school.school_id)
                continue
        for s in participants:
            if s.pv is None or pv_index >= len(s.pv):
                raise EstimationUndefinedError(
                    f"student {s.student_id!r} lacks plausible value {pv_index + 1}")
            values.append(s.pv[pv_index])
            weights.append(s.student_weight / factor)
    if not values:
        raise EstimationUndefinedError("no participating students in cell")
    return WeightedSample.from_arrays(values, weights), skipped

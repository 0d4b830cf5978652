"""Identification regions for mean achievement under non-participation.

Each estimator returns an :class:`IdentificationRegion` for the
population mean under one set of assumptions about the students who
would not participate:

``WORST_CASE``
    The non-participant mean lies between known outcome-scale limits.
``A1`` / ``A1_1``
    The non-participant mean lies between the alpha and (1-alpha)
    participant quantiles, overall / within each stratum.
``A1_2_A2``
    Within-school non-participation is ignorable (participant weights are
    rescaled by the within-school factor), and only school-level
    non-participation widens the region, with stratum-specific quantile
    limits on the unobserved school mean.
``A2_A3`` / ``A2_A3_REPLACEMENT``
    Both stages are ignorable within their cells; the mean is a point,
    optionally after imputing non-participating schools from fielded
    replacement schools.
``A1_A4`` / ``A1_1_A4_1``
    Adds monotone selection: participants' mean is at least the
    non-participants' mean, which caps the region at the participant
    mean, overall / within strata.

All regimes share one ingredient pipeline, so identities that algebra
forces (equal lower bounds across regimes, stratified regimes collapsing
to unstratified ones for a single stratum, point collapse at alpha=0.5)
hold bit-for-bit, not merely within tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

from .errors import EstimationUndefinedError, EstimationWarning
from .model import Dataset
from .weighting import (
    design_schools,
    participant_sample,
    participation_rate,
    stratum_adjustment_factor,
    weighted_mean,
    weighted_quantile,
)

REGION_TOL = 1e-9


class Regime(str, Enum):
    """Assumption set selector; values double as CLI tokens."""

    WORST_CASE = "WORST_CASE"
    A1 = "A1"
    A1_1 = "A1_1"
    A1_2_A2 = "A1_2_A2"
    A2_A3 = "A2_A3"
    A2_A3_REPLACEMENT = "A2_A3_REPLACEMENT"
    A1_A4 = "A1_A4"
    A1_1_A4_1 = "A1_1_A4_1"


#: Regimes whose region is driven by participant quantiles and so require alpha.
QUANTILE_REGIMES = frozenset({
    Regime.A1, Regime.A1_1, Regime.A1_2_A2, Regime.A1_A4, Regime.A1_1_A4_1,
})

#: Regimes with two-sided quantile endpoints; alpha=0.5 collapses these to points.
TWO_SIDED_QUANTILE_REGIMES = frozenset({Regime.A1, Regime.A1_1, Regime.A1_2_A2})

#: Regimes that identify the mean as a single point.
POINT_REGIMES = frozenset({Regime.A2_A3, Regime.A2_A3_REPLACEMENT})

_REGIME_ALIASES = {
    "WORST_CASE": Regime.WORST_CASE,
    "WORSTCASE": Regime.WORST_CASE,
    "A1": Regime.A1,
    "A1_1": Regime.A1_1,
    "A1.1": Regime.A1_1,
    "A1_2_A2": Regime.A1_2_A2,
    "A1.2_A2": Regime.A1_2_A2,
    "A1.2+A2": Regime.A1_2_A2,
    "A2_A3": Regime.A2_A3,
    "A2+A3": Regime.A2_A3,
    "A2_A3_REPLACEMENT": Regime.A2_A3_REPLACEMENT,
    "A2+A3+REPLACEMENT": Regime.A2_A3_REPLACEMENT,
    "A1_A4": Regime.A1_A4,
    "A1+A4": Regime.A1_A4,
    "A1_1_A4_1": Regime.A1_1_A4_1,
    "A1.1+A4.1": Regime.A1_1_A4_1,
}


def parse_regime(token: str | Regime) -> Regime:
    """Resolve a regime token; accepts dotted and plus-joined spellings."""
    if isinstance(token, Regime):
        return token
    try:
        return _REGIME_ALIASES[str(token).strip().upper()]
    except KeyError:
        raise EstimationUndefinedError(
            f"unknown regime {token!r}; expected one of {[r.value for r in Regime]}"
        ) from None


@dataclass(frozen=True)
class AssumptionSet:
    """A regime plus the numbers it needs.

    ``alpha`` is required for quantile regimes and must lie in (0, 0.5].
    ``support_min`` / ``support_max`` are required for ``WORST_CASE``.
    """

    regime: Regime
    alpha: float | None = None
    support_min: float | None = None
    support_max: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "regime", parse_regime(self.regime))
        if self.regime in QUANTILE_REGIMES:
            if self.alpha is None or not (0.0 < self.alpha <= 0.5):
                raise EstimationUndefinedError(
                    f"regime {self.regime.value} requires alpha in (0, 0.5], got {self.alpha}")
        if self.regime is Regime.WORST_CASE:
            if self.support_min is None or self.support_max is None:
                raise EstimationUndefinedError(
                    "WORST_CASE requires support_min and support_max")
            if not (self.support_min < self.support_max):
                raise EstimationUndefinedError(
                    f"support_min={self.support_min} must be below support_max={self.support_max}")

    def label(self) -> str:
        if self.regime in QUANTILE_REGIMES:
            return f"{self.regime.value}@{self.alpha:g}"
        return self.regime.value


@dataclass(frozen=True)
class CellIngredients:
    """Estimates feeding one cell's bound endpoints."""

    mu: float
    p1: float
    p2: float
    p: float
    q_lo: float | None = None
    q_hi: float | None = None
    n_participants: int = 0


@dataclass(frozen=True)
class StratumComponent:
    """One stratum's contribution to a stratified region."""

    stratum_id: str
    share: float
    lower: float
    upper: float
    ingredients: CellIngredients


@dataclass(frozen=True)
class IdentificationRegion:
    """Closed interval of population means consistent with the data and
    the maintained assumptions; degenerate (lower == upper) when the
    assumptions point-identify the mean."""

    lower: float
    upper: float
    regime: Regime
    alpha: float | None
    ingredients: CellIngredients
    per_stratum: tuple[StratumComponent, ...] | None = None
    pv_index: int | None = 0

    def __post_init__(self):
        if self.lower > self.upper + REGION_TOL:
            raise EstimationUndefinedError(
                f"assumptions are refuted by the data: computed lower bound "
                f"{self.lower!r} exceeds upper bound {self.upper!r} "
                f"(regime {self.regime.value})")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def is_point(self) -> bool:
        return self.lower == self.upper


def region_width(region: IdentificationRegion) -> float:
    """Remaining ambiguity about the mean: upper minus lower endpoint."""
    return region.upper - region.lower


# --- ingredient pipeline -------------------------------------------------
#
# Every regime funnels through _cell_ingredients and the endpoint helpers
# below; sharing the exact arithmetic path is what makes the cross-regime
# coincidence identities exact.

def _cell_ingredients(
    dataset: Dataset,
    schools,
    pv_index: int,
    alpha: float | None,
    school_adjusted: bool = False,
) -> CellIngredients:
    rates = participation_rate(dataset, schools)
    sample, skipped = participant_sample(
        dataset, schools, pv_index=pv_index, school_adjusted=school_adjusted)
    for school_id in skipped:
        warnings.warn(
            f"school {school_id!r} has no participating students; it contributes "
            "nothing to the adjusted estimate",
            EstimationWarning,
            stacklevel=3,
        )
    q_lo = q_hi = None
    if alpha is not None:
        q_lo = weighted_quantile(sample, alpha)
        q_hi = weighted_quantile(sample, 1.0 - alpha)
    return CellIngredients(
        mu=weighted_mean(sample),
        p1=rates.p1,
        p2=rates.p2,
        p=rates.p,
        q_lo=q_lo,
        q_hi=q_hi,
        n_participants=len(sample.values),
    )


def _endpoint(mu: float, p: float, anchor: float) -> float:
    """Mix the participant mean with an anchor for the unobserved mean."""
    return mu * p + anchor * (1.0 - p)


def _combine(components: list[StratumComponent]) -> tuple[float, float]:
    lower = math.fsum(c.share * c.lower for c in components)
    upper = math.fsum(c.share * c.upper for c in components)
    return lower, upper


def _stratum_cells(
    dataset: Dataset, pv_index: int, alpha: float | None, school_adjusted: bool = False
) -> list[tuple[str, float, CellIngredients]]:
    """Per-stratum ingredients in stratum file order (fixed reduction order)."""
    cells = []
    for stratum in dataset.strata:
        schools = [
            s for s in dataset.schools_by_stratum.get(stratum.stratum_id, ())
            if s.replacement_of is None
        ]
        if not schools:
            raise EstimationUndefinedError(
                f"stratum {stratum.stratum_id!r} has no sampled schools")
        try:
            cell = _cell_ingredients(
                dataset, schools, pv_index, alpha, school_adjusted=school_adjusted)
        except EstimationUndefinedError as exc:
            raise EstimationUndefinedError(
                f"stratum {stratum.stratum_id!r}: {exc}") from None
        cells.append((stratum.stratum_id, stratum.share, cell))
    return cells


# --- regimes --------------------------------------------------------------

def bounds_worst_case(
    dataset: Dataset, support_min: float, support_max: float, pv_index: int = 0
) -> IdentificationRegion:
    """Bounds assuming only that the outcome scale has known limits.

    The region endpoints anchor the unobserved non-participant mean at
    each limit; its width is ``(1 - p) * (support_max - support_min)``.
    Every observed plausible value must lie inside the declared limits.
    """
    if not (support_min < support_max):
        raise EstimationUndefinedError(
            f"support_min={support_min} must be below support_max={support_max}")
    for stu in dataset.students:
        if stu.pv is None:
            continue
        for k, v in enumerate(stu.pv):
            if not (support_min <= v <= support_max):
                raise EstimationUndefinedError(
                    f"student {stu.student_id!r} pv{k + 1}={v} lies outside the "
                    f"declared support [{support_min}, {support_max}]")
    cell = _cell_ingredients(dataset, design_schools(dataset), pv_index, alpha=None)
    return IdentificationRegion(
        lower=_endpoint(cell.mu, cell.p, support_min),
        upper=_endpoint(cell.mu, cell.p, support_max),
        regime=Regime.WORST_CASE,
        alpha=None,
        ingredients=cell,
        pv_index=pv_index,
    )


def bounds_a1(dataset: Dataset, alpha: float, pv_index: int = 0) -> IdentificationRegion:
    """Bounds with the non-participant mean confined to the participant
    alpha..(1-alpha) quantile interval.

    All ingredients are estimated over participating students in
    originally sampled schools with unadjusted design weights.
    """
    _check_alpha(alpha)
    cell = _cell_ingredients(dataset, design_schools(dataset), pv_index, alpha)
    return IdentificationRegion(
        lower=_endpoint(cell.mu, cell.p, cell.q_lo),
        upper=_endpoint(cell.mu, cell.p, cell.q_hi),
        regime=Regime.A1,
        alpha=alpha,
        ingredients=cell,
        pv_index=pv_index,
    )


def bounds_a1_stratified(dataset: Dataset, alpha: float, pv_index: int = 0) -> IdentificationRegion:
    """Stratum-specific quantile bounds, averaged with frame shares.

    Each stratum contributes its own participant mean, participation rate
    and quantile band; a stratum without participating students is an
    explicit error, never silently borrowed from neighbors.
    """
    _check_alpha(alpha)
    components = [
        StratumComponent(
            stratum_id=sid,
            share=share,
            lower=_endpoint(cell.mu, cell.p, cell.q_lo),
            upper=_endpoint(cell.mu, cell.p, cell.q_hi),
            ingredients=cell,
        )
        for sid, share, cell in _stratum_cells(dataset, pv_index, alpha)
    ]
    lower, upper = _combine(components)
    return IdentificationRegion(
        lower=lower,
        upper=upper,
        regime=Regime.A1_1,
        alpha=alpha,
        ingredients=_overall_ingredients(components),
        per_stratum=tuple(components),
        pv_index=pv_index,
    )


def bounds_a12_a2(dataset: Dataset, alpha: float, pv_index: int = 0) -> IdentificationRegion:
    """Stratified bounds when within-school non-participation is ignorable.

    Participant weights are rescaled by each school's within-school
    factor, and only the school-stage rate enters the endpoints, so the
    region width is proportional to the share of students in schools that
    would not participate.
    """
    _check_alpha(alpha)
    components = []
    for sid, share, cell in _stratum_cells(dataset, pv_index, alpha, school_adjusted=True):
        components.append(
            StratumComponent(
                stratum_id=sid,
                share=share,
                lower=_endpoint(cell.mu, cell.p1, cell.q_lo),
                upper=_endpoint(cell.mu, cell.p1, cell.q_hi),
                ingredients=cell,
            )
        )
    lower, upper = _combine(components)
    return IdentificationRegion(
        lower=lower,
        upper=upper,
        regime=Regime.A1_2_A2,
        alpha=alpha,
        ingredients=_overall_ingredients(components),
        per_stratum=tuple(components),
        pv_index=pv_index,
    )


def point_standard(
    dataset: Dataset, use_replacements: bool = False, pv_index: int = 0
) -> IdentificationRegion:
    """Point identification under two-stage ignorability.

    The estimate is the participant mean with weights rescaled by both
    the within-school and the within-stratum non-response factors.  With
    ``use_replacements``, recipient slots are first filled from fielded
    replacement schools and the stratum factors recomputed, which is how
    assessment reports usually publish the mean.
    """
    working = dataset
    if use_replacements:
        from .model import link_replacements

        working = link_replacements(dataset)

    values: list[float] = []
    weights: list[float] = []
    for stratum in working.strata:
        schools = working.schools_by_stratum.get(stratum.stratum_id, ())
        originals = [s for s in schools if s.replacement_of is None]
        if not originals:
            raise EstimationUndefinedError(
                f"stratum {stratum.stratum_id!r} has no sampled schools")
        if not any(s.z1 == 1 for s in originals):
            raise EstimationUndefinedError(
                f"stratum {stratum.stratum_id!r} has no participating schools")
        stratum_factor = stratum_adjustment_factor(stratum, schools)
        try:
            sample, skipped = participant_sample(
                working, originals, pv_index=pv_index, school_adjusted=True)
        except EstimationUndefinedError as exc:
            raise EstimationUndefinedError(
                f"stratum {stratum.stratum_id!r}: {exc}") from None
        for school_id in skipped:
            warnings.warn(
                f"school {school_id!r} has no participating students; it contributes "
                "nothing to the point estimate",
                EstimationWarning,
                stacklevel=2,
            )
        values.extend(sample.values)
        weights.extend(w / stratum_factor for w in sample.weights)

    total = math.fsum(weights)
    if total <= 0:
        raise EstimationUndefinedError("point estimate: zero total weight")
    point = math.fsum(w * v for w, v in zip(weights, values)) / total

    rates = participation_rate(working, design_schools(working))
    cell = CellIngredients(
        mu=point, p1=rates.p1, p2=rates.p2, p=rates.p, n_participants=len(values))
    return IdentificationRegion(
        lower=point,
        upper=point,
        regime=Regime.A2_A3_REPLACEMENT if use_replacements else Regime.A2_A3,
        alpha=None,
        ingredients=cell,
        pv_index=pv_index,
    )


def bounds_monotone(
    dataset: Dataset, alpha: float, strict_form: bool = False, pv_index: int = 0
) -> IdentificationRegion:
    """Quantile lower bound with a monotone-selection cap on the upper.

    The lower endpoint is identical to the plain quantile regime.  By
    default the upper endpoint is the participant mean, which rules out
    the extreme case where the (1-alpha) participant quantile falls below
    that mean; ``strict_form`` keeps that case on the table by taking the
    minimum of the two, with a warning when the quantile binds.
    """
    _check_alpha(alpha)
    cell = _cell_ingredients(dataset, design_schools(dataset), pv_index, alpha)
    lower = _endpoint(cell.mu, cell.p, cell.q_lo)
    if strict_form:
        upper = min(cell.mu, cell.q_hi)
        if cell.q_hi < cell.mu:
            warnings.warn(
                f"monotone upper bound binds at the {1 - alpha:g} participant "
                f"quantile ({cell.q_hi!r}) below the participant mean ({cell.mu!r})",
                EstimationWarning,
                stacklevel=2,
            )
    else:
        upper = cell.mu
    return IdentificationRegion(
        lower=lower,
        upper=upper,
        regime=Regime.A1_A4,
        alpha=alpha,
        ingredients=cell,
        pv_index=pv_index,
    )


def bounds_monotone_stratified(
    dataset: Dataset, alpha: float, pv_index: int = 0
) -> IdentificationRegion:
    """Stratified monotone-selection bounds.

    The lower endpoint coincides exactly with the stratified quantile
    regime's lower endpoint; the upper endpoint is the share-weighted
    average of the stratum participant means.
    """
    _check_alpha(alpha)
    components = []
    for sid, share, cell in _stratum_cells(dataset, pv_index, alpha):
        components.append(
            StratumComponent(
                stratum_id=sid,
                share=share,
                lower=_endpoint(cell.mu, cell.p, cell.q_lo),
                upper=cell.mu,
                ingredients=cell,
            )
        )
    lower, upper = _combine(components)
    return IdentificationRegion(
        lower=lower,
        upper=upper,
        regime=Regime.A1_1_A4_1,
        alpha=alpha,
        ingredients=_overall_ingredients(components),
        per_stratum=tuple(components),
        pv_index=pv_index,
    )


def compute_region(
    dataset: Dataset,
    assumptions: AssumptionSet,
    pv_index: int = 0,
    strict_monotone: bool = False,
) -> IdentificationRegion:
    """Dispatch to the regime's estimator for one plausible value."""
    regime = assumptions.regime
    if regime is Regime.WORST_CASE:
        return bounds_worst_case(
            dataset, assumptions.support_min, assumptions.support_max, pv_index=pv_index)
    if regime is Regime.A1:
        return bounds_a1(dataset, assumptions.alpha, pv_index=pv_index)
    if regime is Regime.A1_1:
        return bounds_a1_stratified(dataset, assumptions.alpha, pv_index=pv_index)
    if regime is Regime.A1_2_A2:
        return bounds_a12_a2(dataset, assumptions.alpha, pv_index=pv_index)
    if regime is Regime.A2_A3:
        return point_standard(dataset, use_replacements=False, pv_index=pv_index)
    if regime is Regime.A2_A3_REPLACEMENT:
        return point_standard(dataset, use_replacements=True, pv_index=pv_index)
    if regime is Regime.A1_A4:
        return bounds_monotone(
            dataset, assumptions.alpha, strict_form=strict_monotone, pv_index=pv_index)
    if regime is Regime.A1_1_A4_1:
        return bounds_monotone_stratified(dataset, assumptions.alpha, pv_index=pv_index)
    raise EstimationUndefinedError(f"unhandled regime {regime!r}")


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha <= 0.5):
        raise EstimationUndefinedError(f"alpha must lie in (0, 0.5], got {alpha}")


def _overall_ingredients(components: list[StratumComponent]) -> CellIngredients:
    """Share-weighted summary of stratum ingredients, for reporting."""
    def avg(get):
        vals = [get(c.ingredients) for c in components]
        if any(v is None for v in vals):
            return None
        return math.fsum(c.share * v for c, v in zip(components, vals))

    return CellIngredients(
        mu=avg(lambda i: i.mu),
        p1=avg(lambda i: i.p1),
        p2=avg(lambda i: i.p2),
        p=avg(lambda i: i.p),
        q_lo=avg(lambda i: i.q_lo),
        q_hi=avg(lambda i: i.q_hi),
        n_participants=sum(c.ingredients.n_participants for c in components),
    )

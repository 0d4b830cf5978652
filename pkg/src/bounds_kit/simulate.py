"""Synthetic populations, census ground truth, and coverage checks.

The generator builds a fully enumerated two-stage population (strata of
schools of students) with latent participation at both stages, under a
configurable participation mechanism.  Because every student is
enumerated, ground truth is computed by direct enumeration, and any
estimator can be verified either in census mode (every school and
student "sampled", isolating identification error from sampling error)
or across replicated probability samples.

Mechanisms
----------
``IGNORABLE_WITHIN_CELLS``
    Participation probabilities depend only on the cell (stratum for
    schools, school for students), never on achievement: both
    ignorability assumptions hold.
``MONOTONE_SELECTION``
    Participation probability increases with achievement at both stages,
    so participants outscore non-participants on average.
``STRATUM_HETEROGENEOUS``
    Like the ignorable mechanism, but outcome location and participation
    rates vary systematically across strata, which is what makes
    stratum-specific assumptions pay off.
``ADVERSARIAL_WITHIN_QUANTILES``
    All schools participate; within each stratum a contiguous block of
    the achievement distribution is marked non-participating so the
    non-participant mean sits at a chosen position of the participant
    quantile band.  ``position`` in (0, 1) keeps the quantile-interval
    premise satisfied; ``position`` at or outside {0, 1} plants the
    non-participant mean in a tail, deliberately violating it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .errors import EstimationUndefinedError
from .model import Dataset, SchoolRecord, StratumRecord, StudentRecord, build_dataset
from .pv import aggregate_over_pvs
from .regions import AssumptionSet


class MechanismKind(str, Enum):
    IGNORABLE_WITHIN_CELLS = "IGNORABLE_WITHIN_CELLS"
    MONOTONE_SELECTION = "MONOTONE_SELECTION"
    STRATUM_HETEROGENEOUS = "STRATUM_HETEROGENEOUS"
    ADVERSARIAL_WITHIN_QUANTILES = "ADVERSARIAL_WITHIN_QUANTILES"


#: Per-mechanism parameter defaults and allowed ranges (inclusive).
_PARAM_SPECS: dict[MechanismKind, dict[str, tuple[float, float, float]]] = {
    # name: (default, min, max)
    MechanismKind.IGNORABLE_WITHIN_CELLS: {
        "loc": (500.0, -1e6, 1e6),
        "scale": (80.0, 1e-6, 1e6),
        "skew": (0.0, -5.0, 5.0),
        "school_sd": (25.0, 0.0, 1e6),
        "school_rate": (0.85, 0.01, 1.0),
        "student_rate": (0.9, 0.01, 1.0),
        "student_rate_jitter": (0.05, 0.0, 0.5),
    },
    MechanismKind.MONOTONE_SELECTION: {
        "loc": (500.0, -1e6, 1e6),
        "scale": (80.0, 1e-6, 1e6),
        "skew": (0.0, -5.0, 5.0),
        "school_sd": (25.0, 0.0, 1e6),
        "school_rate": (0.85, 0.01, 1.0),
        "student_rate": (0.9, 0.01, 1.0),
        "strength": (0.1, 0.0, 0.45),
    },
    MechanismKind.STRATUM_HETEROGENEOUS: {
        "loc": (500.0, -1e6, 1e6),
        "scale": (80.0, 1e-6, 1e6),
        "skew": (0.0, -5.0, 5.0),
        "school_sd": (25.0, 0.0, 1e6),
        "school_rate": (0.85, 0.01, 1.0),
        "student_rate": (0.9, 0.01, 1.0),
        "loc_spread": (60.0, 0.0, 1e6),
        "rate_spread": (0.1, 0.0, 0.4),
    },
    MechanismKind.ADVERSARIAL_WITHIN_QUANTILES: {
        "loc": (500.0, -1e6, 1e6),
        "scale": (80.0, 1e-6, 1e6),
        "skew": (0.0, -5.0, 5.0),
        "school_sd": (25.0, 0.0, 1e6),
        "participation": (0.8, 0.05, 0.99),
        "position": (0.5, -1.0, 2.0),
    },
}


@dataclass(frozen=True)
class MechanismConfig:
    """Participation mechanism descriptor: kind, parameters, seed."""

    kind: MechanismKind
    parameters: dict = field(default_factory=dict)
    seed: int = 0

    def resolved(self) -> dict[str, float]:
        """Parameters merged over defaults, with range validation."""
        spec = _PARAM_SPECS[MechanismKind(self.kind)]
        unknown = set(self.parameters) - set(spec)
        if unknown:
            raise EstimationUndefinedError(
                f"unknown parameters {sorted(unknown)} for mechanism {self.kind}")
        out = {}
        for name, (default, lo, hi) in spec.items():
            value = float(self.parameters.get(name, default))
            if not (lo <= value <= hi):
                raise EstimationUndefinedError(
                    f"parameter {name}={value} outside [{lo}, {hi}]")
            out[name] = value
        return out


@dataclass(frozen=True)
class PopulationShape:
    """Counts: strata, schools per stratum, and mean school size."""

    strata: int = 2
    schools_per_stratum: int = 20
    students_per_school: int = 30

    def __post_init__(self):
        if min(self.strata, self.schools_per_stratum, self.students_per_school) < 1:
            raise EstimationUndefinedError("all shape counts must be >= 1")


@dataclass(frozen=True, eq=False)
class SyntheticPopulation:
    """Fully enumerated population with latent participation."""

    mechanism: MechanismConfig
    stratum_ids: tuple[str, ...]
    school_stratum: np.ndarray  # (J,) stratum index per school
    school_size: np.ndarray  # (J,) true enrollment per school
    school_z1: np.ndarray  # (J,) latent school participation
    student_school: np.ndarray  # (N,) school index per student
    student_y: np.ndarray  # (N,) true achievement
    student_z2: np.ndarray  # (N,) latent student participation

    @property
    def n_students(self) -> int:
        return int(self.student_y.size)

    @property
    def n_schools(self) -> int:
        return int(self.school_size.size)

    def student_z(self) -> np.ndarray:
        """Joint participation: school and student stages both realized."""
        return self.school_z1[self.student_school] & self.student_z2

    def stratum_of_students(self) -> np.ndarray:
        return self.school_stratum[self.student_school]


def _skewed_standard(rng, n, skew):
    """Zero-mean, unit-variance draws with configurable skew."""
    base = rng.standard_normal(n)
    if skew == 0.0:
        return base
    bump = skew * (rng.exponential(1.0, n) - 1.0)
    return (base + bump) / math.sqrt(1.0 + skew * skew)


def generate_population(config: MechanismConfig, shape: PopulationShape) -> SyntheticPopulation:
    """Build a deterministic population for the given mechanism and seed."""
    params = config.resolved()
    kind = MechanismKind(config.kind)
    rng = np.random.default_rng(config.seed)

    n_strata = shape.strata
    n_schools = n_strata * shape.schools_per_stratum
    school_stratum = np.repeat(np.arange(n_strata), shape.schools_per_stratum)

    size_lo = max(2, int(round(0.5 * shape.students_per_school)))
    size_hi = max(size_lo, int(round(1.5 * shape.students_per_school)))
    school_size = rng.integers(size_lo, size_hi + 1, size=n_schools)
    student_school = np.repeat(np.arange(n_schools), school_size)
    n_students = int(school_size.sum())

    # Outcome model: stratum location, school intercept, skewed student noise.
    if kind is MechanismKind.STRATUM_HETEROGENEOUS and n_strata > 1:
        offsets = np.linspace(-1.0, 1.0, n_strata) * params["loc_spread"]
    else:
        offsets = np.zeros(n_strata)
    stratum_loc = params["loc"] + offsets
    school_effect = rng.standard_normal(n_schools) * params["school_sd"]
    noise = _skewed_standard(rng, n_students, params["skew"]) * params["scale"]
    student_y = stratum_loc[school_stratum[student_school]] + school_effect[student_school] + noise

    if kind is MechanismKind.ADVERSARIAL_WITHIN_QUANTILES:
        school_z1 = np.ones(n_schools, dtype=bool)
        student_z2 = _adversarial_z2(
            student_y, school_stratum[student_school], n_strata,
            participation=params["participation"], position=params["position"])
    else:
        school_z1, student_z2 = _two_stage_participation(
            rng, kind, params, n_strata, school_stratum, school_size,
            student_school, student_y)

    return SyntheticPopulation(
        mechanism=config,
        stratum_ids=tuple(f"W{w + 1}" for w in range(n_strata)),
        school_stratum=school_stratum,
        school_size=school_size,
        school_z1=school_z1,
        student_school=student_school,
        student_y=student_y,
        student_z2=student_z2,
    )


def _two_stage_participation(rng, kind, params, n_strata, school_stratum,
                             school_size, student_school, student_y):
    school_rate = np.full(n_strata, params["school_rate"])
    student_rate = np.full(n_strata, params["student_rate"])
    if kind is MechanismKind.STRATUM_HETEROGENEOUS and n_strata > 1:
        tilt = np.linspace(-1.0, 1.0, n_strata) * params["rate_spread"]
        school_rate = np.clip(school_rate + tilt, 0.02, 0.99)
        student_rate = np.clip(student_rate + tilt, 0.02, 0.99)

    school_prob = school_rate[school_stratum]
    n_schools = school_size.size
    if kind is MechanismKind.MONOTONE_SELECTION and params["strength"] > 0:
        school_mean = np.bincount(student_school, weights=student_y, minlength=n_schools)
        school_mean /= school_size
        std = (school_mean - school_mean.mean()) / max(school_mean.std(), 1e-12)
        school_prob = np.clip(school_prob + params["strength"] * std, 0.02, 0.98)
    school_z1 = rng.random(n_schools) < school_prob

    student_prob = student_rate[school_stratum[student_school]]
    if kind is MechanismKind.IGNORABLE_WITHIN_CELLS and params["student_rate_jitter"] > 0:
        # Per-school wobble drawn independently of achievement keeps the
        # mechanism ignorable while making adjustment factors non-trivial.
        jitter = rng.uniform(-params["student_rate_jitter"],
                             params["student_rate_jitter"], n_schools)
        student_prob = np.clip(student_prob + jitter[student_school], 0.02, 1.0)
    if kind is MechanismKind.MONOTONE_SELECTION and params["strength"] > 0:
        school_mean = np.bincount(student_school, weights=student_y, minlength=n_schools)
        school_mean /= school_size
        within = student_y - school_mean[student_school]
        std = within / max(within.std(), 1e-12)
        student_prob = np.clip(student_prob + params["strength"] * std, 0.02, 0.98)
    student_z2 = rng.random(student_y.size) < student_prob
    return school_z1, student_z2


def _adversarial_z2(student_y, student_stratum, n_strata, participation, position):
    """Mark a contiguous achievement block non-participating per stratum."""
    z2 = np.ones(student_y.size, dtype=bool)
    remove_frac = 1.0 - participation
    for w in range(n_strata):
        members = np.flatnonzero(student_stratum == w)
        n = members.size
        k = int(round(remove_frac * n))
        if k <= 0:
            continue
        order = members[np.argsort(student_y[members], kind="stable")]
        if position <= 0.0:
            start = 0
        elif position >= 1.0:
            start = n - k
        else:
            center = position * (n - 1)
            start = int(round(center - k / 2.0))
            start = min(max(start, 0), n - k)
        z2[order[start:start + k]] = False
    return z2


@dataclass(frozen=True)
class StratumTruth:
    stratum_id: str
    share: float
    mean: float
    participant_mean: float
    nonparticipant_mean: float | None
    participation: float
    participant_quantiles: dict


@dataclass(frozen=True)
class TruthReport:
    """Exact population quantities from full enumeration."""

    mean: float
    participant_mean: float
    nonparticipant_mean: float | None
    participation: float
    school_stage_rate: float
    student_stage_rate: float
    participant_quantiles: dict
    strata: tuple[StratumTruth, ...]

    def to_dict(self) -> dict:
        return asdict(self)


def _rank_quantile(sorted_values: np.ndarray, alpha: float) -> float:
    """Smallest value whose rank fraction reaches alpha (census convention)."""
    n = sorted_values.size
    k = int(math.ceil(alpha * n))
    k = min(max(k, 1), n)
    return float(sorted_values[k - 1])


def census_truth(pop: SyntheticPopulation, alphas=(0.05, 0.1, 0.25)) -> TruthReport:
    """Enumerate the population: exact means, rates and participant quantiles."""
    z = pop.student_z()
    y = pop.student_y
    stratum = pop.stratum_of_students()
    z1_students = pop.school_z1[pop.student_school]

    def quantiles(values):
        s = np.sort(values)
        return {f"{a:g}": _rank_quantile(s, a) for a in alphas} | {
            f"{1 - a:g}": _rank_quantile(s, 1 - a) for a in alphas}

    strata_truth = []
    for w, sid in enumerate(pop.stratum_ids):
        in_w = stratum == w
        yw, zw = y[in_w], z[in_w]
        nonpart = yw[~zw]
        strata_truth.append(StratumTruth(
            stratum_id=sid,
            share=float(in_w.sum() / y.size),
            mean=float(yw.mean()),
            participant_mean=float(yw[zw].mean()) if zw.any() else float("nan"),
            nonparticipant_mean=float(nonpart.mean()) if nonpart.size else None,
            participation=float(zw.mean()),
            participant_quantiles=quantiles(yw[zw]) if zw.any() else {},
        ))

    nonpart = y[~z]
    return TruthReport(
        mean=float(y.mean()),
        participant_mean=float(y[z].mean()),
        nonparticipant_mean=float(nonpart.mean()) if nonpart.size else None,
        participation=float(z.mean()),
        school_stage_rate=float(z1_students.mean()),
        student_stage_rate=float(z[z1_students].mean()) if z1_students.any() else 0.0,
        participant_quantiles=quantiles(y[z]),
        strata=tuple(strata_truth),
    )


@dataclass(frozen=True)
class SampleDesign:
    """Two-stage design: schools per stratum, students per participating
    school.  ``None`` at either stage means take everything (census)."""

    schools_per_stratum: int | None = None
    students_per_school: int | None = None

    @property
    def is_census(self) -> bool:
        return self.schools_per_stratum is None and self.students_per_school is None


def census_design() -> SampleDesign:
    return SampleDesign(None, None)


def _systematic_pps(sizes: np.ndarray, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Probability-proportional-to-size draw of ``n`` units without
    replacement: certainty units extracted, then systematic selection on a
    randomly permuted frame.  Returns (selected indices, inclusion
    probabilities aligned to ``sizes``)."""
    m = sizes.size
    prob = np.ones(m)
    if n >= m:
        return np.arange(m), prob
    remaining = np.arange(m)
    certain: list[int] = []
    n_rem = n
    while n_rem > 0 and remaining.size:
        total = sizes[remaining].sum()
        p = n_rem * sizes[remaining] / total
        over = p >= 1.0
        if not over.any():
            break
        certain.extend(remaining[over].tolist())
        remaining = remaining[~over]
        n_rem -= int(over.sum())
    selected = list(certain)
    if n_rem > 0 and remaining.size:
        total = sizes[remaining].sum()
        prob[remaining] = n_rem * sizes[remaining] / total
        perm = rng.permutation(remaining)
        cum = np.cumsum(sizes[perm])
        step = cum[-1] / n_rem
        points = rng.uniform(0.0, step) + step * np.arange(n_rem)
        hits = np.searchsorted(cum, points, side="left")
        selected.extend(perm[hits].tolist())
    return np.asarray(sorted(selected)), prob


def draw_sample(pop: SyntheticPopulation, design: SampleDesign, seed: int = 0) -> Dataset:
    """Draw a two-stage sample and reveal participation.

    Schools are selected with probability proportional to their true size
    within each stratum; students are selected with equal probability
    within each sampled, participating school.  Design weights are exact
    inverse inclusion probabilities.  Participating students carry the
    standard number of plausible values, all equal to the true score
    (measurement error is out of scope here).
    """
    rng = np.random.default_rng(seed)
    strata_records = [
        StratumRecord(
            stratum_id=sid,
            frame_enrollment=float(pop.school_size[pop.school_stratum == w].sum()),
            share=0.0,
        )
        for w, sid in enumerate(pop.stratum_ids)
    ]

    starts = np.concatenate(([0], np.cumsum(pop.school_size)))

    school_records = []
    student_records = []
    pv_count = 5
    for w, sid in enumerate(pop.stratum_ids):
        school_idx = np.flatnonzero(pop.school_stratum == w)
        sizes = pop.school_size[school_idx]
        if design.schools_per_stratum is None:
            chosen = np.arange(school_idx.size)
            probs = np.ones(school_idx.size)
        else:
            if design.schools_per_stratum < 1:
                raise EstimationUndefinedError("schools_per_stratum must be >= 1")
            chosen, probs = _systematic_pps(sizes, design.schools_per_stratum, rng)
        for local_j in chosen:
            j = int(school_idx[local_j])
            pi_j = float(probs[local_j])
            z1 = bool(pop.school_z1[j])
            school_id = f"SCH{j + 1:05d}"
            size_j = int(pop.school_size[j])
            members = np.arange(starts[j], starts[j + 1])
            if z1:
                if design.students_per_school is None or design.students_per_school >= size_j:
                    picked = members
                else:
                    picked = np.sort(rng.choice(members, design.students_per_school, replace=False))
                pi_i = picked.size / size_j
                n_sampled = picked.size
            else:
                picked = np.empty(0, dtype=int)
                pi_i = 1.0
                n_sampled = 0
            school_records.append(SchoolRecord(
                school_id=school_id,
                stratum_id=sid,
                z1=int(z1),
                enrollment=size_j,
                school_weight=1.0 / pi_j,
                sampled_student_count=n_sampled,
            ))
            weight = 1.0 / (pi_j * pi_i) if n_sampled else 0.0
            for i in picked:
                z2 = bool(pop.student_z2[i])
                y = float(pop.student_y[i])
                student_records.append(StudentRecord(
                    student_id=f"{school_id}-{int(i - starts[j]) + 1:04d}",
                    school_id=school_id,
                    z2=int(z2),
                    student_weight=weight,
                    pv=(y,) * pv_count if z2 else None,
                ))

    return build_dataset(student_records, school_records, strata_records, pv_count=pv_count)


@dataclass(frozen=True)
class CoverageReport:
    """Containment of the true mean in computed regions."""

    mechanism: MechanismConfig
    assumptions: AssumptionSet
    truth_mean: float
    census_contained: bool
    census_lower: float
    census_upper: float
    replicates: int
    contained_count: int
    results: tuple[bool, ...]

    @property
    def coverage(self) -> float | None:
        if self.replicates == 0:
            return None
        return self.contained_count / self.replicates


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("BOUNDS_KIT_THREADS", "")
    try:
        cap_n = int(cap) if cap else 1
    except ValueError:
        cap_n = 1
    return max(1, min(n_tasks, cap_n, os.cpu_count() or 1))


def verify_coverage(
    pop: SyntheticPopulation,
    assumptions: AssumptionSet,
    replicates: int = 0,
    design: SampleDesign | None = None,
    base_seed: int = 0,
) -> CoverageReport:
    """Check whether computed regions contain the true population mean.

    A census-mode check always runs (the full population as the sample);
    ``replicates`` additional probability samples are drawn under
    ``design`` (census by default) with per-replicate derived seeds.
    Replicates run in parallel when ``BOUNDS_KIT_THREADS`` allows; results
    merge by replicate index, so the report is deterministic either way.
    """
    truth = census_truth(pop)
    census = draw_sample(pop, census_design(), seed=base_seed)
    census_region = aggregate_over_pvs(census, assumptions).combined
    census_contained = census_region.lower <= truth.mean <= census_region.upper

    rep_design = design or census_design()

    def one(r: int) -> bool:
        ds = draw_sample(pop, rep_design, seed=base_seed + 1 + r)
        region = aggregate_over_pvs(ds, assumptions).combined
        return bool(region.lower <= truth.mean <= region.upper)

    results: list[bool]
    workers = _worker_count(replicates)
    if replicates and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(r) for r in range(replicates)]

    return CoverageReport(
        mechanism=pop.mechanism,
        assumptions=assumptions,
        truth_mean=truth.mean,
        census_contained=bool(census_contained),
        census_lower=census_region.lower,
        census_upper=census_region.upper,
        replicates=replicates,
        contained_count=sum(results),
        results=tuple(results),
    )

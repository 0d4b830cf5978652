"""Data model for a two-stage sampled assessment.

A survey dataset links three record kinds: students nested in schools
nested in strata.  Students appear in the file only when their school
participated; non-participating students inside participating schools
appear as rows with ``z2 == 0`` and no plausible values.  All records
are immutable once constructed; the :class:`Dataset` is safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

from .errors import DataValidationError

#: Number of plausible values carried per participating student.
DEFAULT_PV_COUNT = 5

SHARE_SUM_TOL = 1e-9


@dataclass(frozen=True)
class StudentRecord:
    """One sampled student.

    Attributes
    ----------
    student_id, school_id : str
        Opaque identifiers; ``school_id`` must reference a participating
        school.
    z2 : int
        1 if the student participated in the assessment, else 0.
    student_weight : float
        Design weight, the inverse of the student's joint inclusion
        probability (school stage times within-school stage).
    pv : tuple of float or None
        Plausible values of the achievement score.  Present exactly when
        ``z2 == 1``.
    """

    student_id: str
    school_id: str
    z2: int
    student_weight: float
    pv: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SchoolRecord:
    """One sampled school.

    ``enrollment`` is the measure of size from the sampling frame, while
    ``sampled_student_count`` is the number of students actually selected
    in the field; the two come from different moments of the survey and
    are intentionally never reconciled.  ``replacement_of`` marks a school
    fielded specifically to stand in for a sampled, non-participating
    "recipient" school in the same stratum.
    """

    school_id: str
    stratum_id: str
    z1: int
    enrollment: int
    school_weight: float
    sampled_student_count: int = 0
    replacement_of: str | None = None


@dataclass(frozen=True)
class StratumRecord:
    """One explicit school stratum.

    ``share`` is the proportion of the student population enrolled in the
    stratum, derived from frame enrollment totals (never from sample
    counts); shares sum to one across strata.
    """

    stratum_id: str
    frame_enrollment: float
    share: float


@dataclass(frozen=True)
class Dataset:
    """Validated, linked collection of students, schools and strata."""

    students: tuple[StudentRecord, ...]
    schools: tuple[SchoolRecord, ...]
    strata: tuple[StratumRecord, ...]
    pv_count: int = DEFAULT_PV_COUNT

    @cached_property
    def schools_by_id(self) -> dict[str, SchoolRecord]:
        return {s.school_id: s for s in self.schools}

    @cached_property
    def strata_by_id(self) -> dict[str, StratumRecord]:
        return {s.stratum_id: s for s in self.strata}

    @cached_property
    def students_by_school(self) -> dict[str, tuple[StudentRecord, ...]]:
        grouped: dict[str, list[StudentRecord]] = {s.school_id: [] for s in self.schools}
        for stu in self.students:
            grouped.setdefault(stu.school_id, []).append(stu)
        return {k: tuple(v) for k, v in grouped.items()}

    @cached_property
    def schools_by_stratum(self) -> dict[str, tuple[SchoolRecord, ...]]:
        grouped: dict[str, list[SchoolRecord]] = {s.stratum_id: [] for s in self.strata}
        for sch in self.schools:
            grouped.setdefault(sch.stratum_id, []).append(sch)
        return {k: tuple(v) for k, v in grouped.items()}


def derive_shares(strata: list[StratumRecord] | tuple[StratumRecord, ...]) -> tuple[StratumRecord, ...]:
    """Recompute each stratum's ``share`` from frame enrollment totals."""
    total = math.fsum(s.frame_enrollment for s in strata)
    if total <= 0:
        raise DataValidationError("total frame enrollment must be positive")
    return tuple(replace(s, share=s.frame_enrollment / total) for s in strata)


def build_dataset(students, schools, strata, pv_count: int = DEFAULT_PV_COUNT) -> Dataset:
    """Assemble a :class:`Dataset` from record collections.

    Stratum shares are (re)derived from frame enrollment.  The result is
    not validated; call :func:`validate` or load through
    :func:`bounds_kit.io.load_dataset` for a checked dataset.
    """
    return Dataset(
        students=tuple(students),
        schools=tuple(schools),
        strata=derive_shares(tuple(strata)),
        pv_count=pv_count,
    )


SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    severity: str
    record_kind: str  # "student" | "school" | "stratum" | "dataset"
    record_id: str
    message: str

    def __str__(self) -> str:
        return f"[{self.severity}] {self.record_kind} {self.record_id}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(v.severity == SEVERITY_ERROR for v in self.violations)

    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == SEVERITY_ERROR)

    def summary(self) -> str:
        if not self.violations:
            return "dataset valid"
        return "\n".join(str(v) for v in self.violations)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate(dataset: Dataset) -> ValidationReport:
    """Check every record invariant and return the full violation list.

    Violations are data, not failures: this never raises.  An empty
    report means the dataset is valid.
    """
    out: list[Violation] = []

    def err(kind, rid, msg):
        out.append(Violation(SEVERITY_ERROR, kind, rid, msg))

    def warn(kind, rid, msg):
        out.append(Violation(SEVERITY_WARNING, kind, rid, msg))

    strata_ids = set()
    for st in dataset.strata:
        if st.stratum_id in strata_ids:
            err("stratum", st.stratum_id, "duplicate stratum_id")
        strata_ids.add(st.stratum_id)
        if not _finite(st.frame_enrollment) or st.frame_enrollment <= 0:
            err("stratum", st.stratum_id, f"frame_enrollment must be positive, got {st.frame_enrollment}")
        if not _finite(st.share) or not (0.0 < st.share <= 1.0):
            err("stratum", st.stratum_id, f"share must lie in (0, 1], got {st.share}")
    if not dataset.strata:
        err("dataset", "strata", "no strata defined")
    else:
        share_sum = math.fsum(s.share for s in dataset.strata)
        if abs(share_sum - 1.0) > SHARE_SUM_TOL:
            err("stratum", "strata", f"shares sum to {share_sum!r}, expected 1 within {SHARE_SUM_TOL}")
        total = math.fsum(s.frame_enrollment for s in dataset.strata)
        if total > 0:
            for st in dataset.strata:
                if abs(st.share - st.frame_enrollment / total) > SHARE_SUM_TOL:
                    err("stratum", st.stratum_id,
                        "share is not the frame-enrollment proportion; shares must be "
                        "derived from the frame, not from sample counts")

    school_ids = set()
    recipients_claimed: dict[str, str] = {}
    for sch in dataset.schools:
        if sch.school_id in school_ids:
            err("school", sch.school_id, "duplicate school_id")
        school_ids.add(sch.school_id)
        if sch.stratum_id not in dataset.strata_by_id:
            err("school", sch.school_id, f"unknown stratum_id {sch.stratum_id!r}")
        if sch.z1 not in (0, 1):
            err("school", sch.school_id, f"z1 must be 0 or 1, got {sch.z1}")
        if not _finite(sch.school_weight) or sch.school_weight < 1.0:
            err("school", sch.school_id, f"school_weight must be >= 1, got {sch.school_weight}")
        if sch.enrollment < 1:
            err("school", sch.school_id, f"enrollment must be >= 1, got {sch.enrollment}")
        if sch.sampled_student_count < 0:
            err("school", sch.school_id, "sampled_student_count must be nonnegative")
        if sch.replacement_of is not None:
            target = dataset.schools_by_id.get(sch.replacement_of)
            if sch.replacement_of == sch.school_id:
                err("school", sch.school_id, "school cannot replace itself")
            elif target is None:
                err("school", sch.school_id, f"replacement_of names unknown school {sch.replacement_of!r}")
            else:
                if target.z1 != 0:
                    err("school", sch.school_id,
                        f"replacement_of must name a non-participating school, but {target.school_id!r} has z1=1")
                if target.stratum_id != sch.stratum_id:
                    err("school", sch.school_id,
                        f"replacement school is in stratum {sch.stratum_id!r} but recipient "
                        f"{target.school_id!r} is in stratum {target.stratum_id!r}")
            if sch.z1 != 1:
                err("school", sch.school_id, "a fielded replacement school must itself participate (z1=1)")
            prior = recipients_claimed.get(sch.replacement_of)
            if prior is not None:
                err("school", sch.school_id,
                    f"recipient {sch.replacement_of!r} already replaced by {prior!r}")
            else:
                recipients_claimed[sch.replacement_of] = sch.school_id

    student_ids = set()
    rows_per_school: dict[str, int] = {}
    for stu in dataset.students:
        if stu.student_id in student_ids:
            err("student", stu.student_id, "duplicate student_id")
        student_ids.add(stu.student_id)
        rows_per_school[stu.school_id] = rows_per_school.get(stu.school_id, 0) + 1
        school = dataset.schools_by_id.get(stu.school_id)
        if school is None:
            err("student", stu.student_id, f"unknown school_id {stu.school_id!r}")
        elif school.z1 != 1:
            err("student", stu.student_id,
                f"references non-participating school {stu.school_id!r}; students appear "
                "only inside participating schools")
        if stu.z2 not in (0, 1):
            err("student", stu.student_id, f"z2 must be 0 or 1, got {stu.z2}")
        if not _finite(stu.student_weight) or stu.student_weight <= 0:
            err("student", stu.student_id, f"student_weight must be positive and finite, got {stu.student_weight}")
        if stu.z2 == 1:
            if stu.pv is None:
                err("student", stu.student_id, "participating student carries no plausible values")
            elif len(stu.pv) != dataset.pv_count:
                err("student", stu.student_id,
                    f"expected {dataset.pv_count} plausible values, got {len(stu.pv)}")
            elif not all(_finite(v) for v in stu.pv):
                err("student", stu.student_id, "plausible values must all be finite")
        elif stu.pv is not None:
            err("student", stu.student_id, "non-participating student must not carry plausible values")

    for sch in dataset.schools:
        n_rows = rows_per_school.get(sch.school_id, 0)
        if sch.sampled_student_count and sch.sampled_student_count < n_rows:
            err("school", sch.school_id,
                f"sampled_student_count={sch.sampled_student_count} is below the "
                f"{n_rows} student rows present")
        if sch.z1 == 1 and sch.replacement_of is None and sch.sampled_student_count > 0 and n_rows == 0:
            warn("school", sch.school_id,
                 "participating school has sampled students but no student rows; "
                 "its student weights are unknown and it will be skipped by "
                 "participation-rate estimation")

    return ValidationReport(tuple(out))


def link_replacements(dataset: Dataset) -> Dataset:
    """Attribute each replacement school's students to its recipient's slot.

    Returns a view of the dataset in which every recipient slot named by a
    replacement is marked participating, carries the replacement's field
    data (students and sampled count), and keeps its own design identity
    (stratum, frame enrollment, school weight).  Replacement rows
    disappear; untouched schools pass through unchanged.  With no
    replacement links the input dataset is returned as-is, which makes
    the operation idempotent.
    """
    links = [s for s in dataset.schools if s.replacement_of is not None]
    if not links:
        return dataset

    by_recipient: dict[str, SchoolRecord] = {}
    for repl in links:
        recipient = dataset.schools_by_id.get(repl.replacement_of)
        if recipient is None:
            raise DataValidationError(
                f"replacement school {repl.school_id!r} names unknown recipient {repl.replacement_of!r}")
        if recipient.replacement_of is not None:
            raise DataValidationError(
                f"replacement chain: recipient {recipient.school_id!r} is itself a replacement")
        if recipient.stratum_id != repl.stratum_id:
            raise DataValidationError(
                f"cross-stratum replacement link {repl.school_id!r} -> {recipient.school_id!r}")
        if recipient.z1 != 0:
            raise DataValidationError(
                f"recipient {recipient.school_id!r} participated; nothing to replace")
        if recipient.school_id in by_recipient:
            raise DataValidationError(
                f"recipient {recipient.school_id!r} claimed by more than one replacement")
        by_recipient[recipient.school_id] = repl

    replaced_ids = {r.school_id for r in links}
    new_schools = []
    for sch in dataset.schools:
        if sch.school_id in replaced_ids:
            continue
        repl = by_recipient.get(sch.school_id)
        if repl is not None:
            sch = replace(sch, z1=1, sampled_student_count=repl.sampled_student_count)
        new_schools.append(sch)

    redirect = {repl.school_id: rec_id for rec_id, repl in by_recipient.items()}
    new_students = tuple(
        replace(stu, school_id=redirect[stu.school_id]) if stu.school_id in redirect else stu
        for stu in dataset.students
    )
    return Dataset(
        students=new_students,
        schools=tuple(new_schools),
        strata=dataset.strata,
        pv_count=dataset.pv_count,
    )

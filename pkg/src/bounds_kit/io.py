"""Reading and writing the delimited survey file schema.

Three UTF-8 comma-separated files with header rows:

* students: ``student_id, school_id, z2, student_weight, pv1..pvK``
  (PV cells empty when ``z2 == 0``)
* schools: ``school_id, stratum_id, z1, enrollment, school_weight,
  sampled_student_count, replacement_of`` (``replacement_of`` may be empty)
* strata: ``stratum_id, frame_enrollment``

Stratum shares are derived from ``frame_enrollment`` at load time.
"""

from __future__ import annotations

import csv
import os
from .errors import DataValidationError
from .model import (
    Dataset,
    SchoolRecord,
    StratumRecord,
    StudentRecord,
    build_dataset,
    validate,
)

STUDENT_COLUMNS = ("student_id", "school_id", "z2", "student_weight")
SCHOOL_COLUMNS = (
    "school_id",
    "stratum_id",
    "z1",
    "enrollment",
    "school_weight",
    "sampled_student_count",
    "replacement_of",
)
STRATUM_COLUMNS = ("stratum_id", "frame_enrollment")


def _pv_columns(pv_count: int) -> tuple[str, ...]:
    return tuple(f"pv{k}" for k in range(1, pv_count + 1))


class _RowReader:
    """DictReader wrapper that reports parse problems with file/row/column."""

    def __init__(self, path, required):
        self.path = path
        self.required = required

    def __enter__(self):
        if not os.path.exists(self.path):
            raise DataValidationError(f"{self.path}: file not found")
        self._fh = open(self.path, newline="", encoding="utf-8")
        reader = csv.DictReader(self._fh)
        header = reader.fieldnames or ()
        missing = [c for c in self.required if c not in header]
        if missing:
            self._fh.close()
            raise DataValidationError(f"{self.path}: missing required columns {missing}")
        self._reader = reader
        return self._rows()

    def _rows(self):
        # DictReader counts the header as line 1.
        for lineno, row in enumerate(self._reader, start=2):
            yield lineno, row

    def __exit__(self, *exc):
        self._fh.close()
        return False


def _parse(path, lineno, column, raw, kind):
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise DataValidationError(
            f"{path}:{lineno}: column {column!r}: cannot parse {raw!r} as {kind.__name__}"
        ) from None


def load_dataset(student_path, school_path, stratum_path, pv_count: int = 5) -> Dataset:
    """Load, link and validate the three survey files.

    Raises
    ------
    DataValidationError
        On parse failure (with file, row and column), on referential
        integrity failure, or on any record invariant violation.  The
        exception carries the full violation list.
    """
    strata = []
    with _RowReader(stratum_path, STRATUM_COLUMNS) as rows:
        for lineno, row in rows:
            strata.append(
                StratumRecord(
                    stratum_id=row["stratum_id"].strip(),
                    frame_enrollment=_parse(stratum_path, lineno, "frame_enrollment",
                                            row["frame_enrollment"], float),
                    share=0.0,  # derived below
                )
            )

    schools = []
    with _RowReader(school_path, SCHOOL_COLUMNS) as rows:
        for lineno, row in rows:
            raw_repl = (row.get("replacement_of") or "").strip()
            schools.append(
                SchoolRecord(
                    school_id=row["school_id"].strip(),
                    stratum_id=row["stratum_id"].strip(),
                    z1=_parse(school_path, lineno, "z1", row["z1"], int),
                    enrollment=_parse(school_path, lineno, "enrollment", row["enrollment"], int),
                    school_weight=_parse(school_path, lineno, "school_weight",
                                         row["school_weight"], float),
                    sampled_student_count=_parse(school_path, lineno, "sampled_student_count",
                                                 row["sampled_student_count"], int),
                    replacement_of=raw_repl or None,
                )
            )

    pv_cols = _pv_columns(pv_count)
    students = []
    with _RowReader(student_path, STUDENT_COLUMNS + pv_cols) as rows:
        for lineno, row in rows:
            z2 = _parse(student_path, lineno, "z2", row["z2"], int)
            pv = None
            if z2 == 1:
                pv = tuple(
                    _parse(student_path, lineno, col, row[col], float) for col in pv_cols
                )
            else:
                filled = [col for col in pv_cols if (row.get(col) or "").strip()]
                if filled:
                    raise DataValidationError(
                        f"{student_path}:{lineno}: non-participating student "
                        f"{row['student_id']!r} has non-empty {filled[0]!r}"
                    )
            students.append(
                StudentRecord(
                    student_id=row["student_id"].strip(),
                    school_id=row["school_id"].strip(),
                    z2=z2,
                    student_weight=_parse(student_path, lineno, "student_weight",
                                          row["student_weight"], float),
                    pv=pv,
                )
            )

    dataset = build_dataset(students, schools, strata, pv_count=pv_count)
    report = validate(dataset)
    if not report.ok:
        raise DataValidationError(
            "invalid dataset:\n" + report.summary(), violations=report.errors()
        )
    return dataset


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # lossless round trip
    return str(value)


def write_dataset(dataset: Dataset, student_path, school_path, stratum_path) -> None:
    """Write the dataset back out in the load schema (lossless floats)."""
    pv_cols = _pv_columns(dataset.pv_count)
    with open(student_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(STUDENT_COLUMNS + pv_cols)
        for stu in dataset.students:
            pv = stu.pv if stu.pv is not None else (None,) * dataset.pv_count
            writer.writerow(
                [stu.student_id, stu.school_id, stu.z2, _fmt(stu.student_weight)]
                + [_fmt(v) for v in pv]
            )
    with open(school_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHOOL_COLUMNS)
        for sch in dataset.schools:
            writer.writerow([
                sch.school_id,
                sch.stratum_id,
                sch.z1,
                sch.enrollment,
                _fmt(sch.school_weight),
                sch.sampled_student_count,
                _fmt(sch.replacement_of),
            ])
    with open(stratum_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(STRATUM_COLUMNS)
        for st in dataset.strata:
            writer.writerow([st.stratum_id, _fmt(st.frame_enrollment)])

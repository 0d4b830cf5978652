from __future__ import annotations

import numpy as np
import pytest

from bounds_kit import (
    SchoolRecord,
    StratumRecord,
    StudentRecord,
    build_dataset,
)


def make_student(sid, school, z2=1, weight=1.0, pv=None, pv_count=1):
    if z2 == 1 and pv is None:
        pv = (500.0,) * pv_count
    if z2 == 1 and not isinstance(pv, tuple):
        pv = (float(pv),) * pv_count
    return StudentRecord(sid, school, z2, weight, pv if z2 == 1 else None)


def make_school(sid, stratum="w1", z1=1, enrollment=100, weight=1.0,
                sampled=0, replacement_of=None):
    return SchoolRecord(sid, stratum, z1, enrollment, weight, sampled, replacement_of)


def single_school_dataset(values, n_nonparticipants=0, weights=None, pv_count=1):
    """One stratum, one participating school; values are participant scores."""
    weights = weights or [1.0] * len(values)
    students = [
        make_student(f"st{i:03d}", "sch1", 1, w, (float(v),) * pv_count, pv_count)
        for i, (v, w) in enumerate(zip(values, weights))
    ]
    students += [
        make_student(f"np{i:03d}", "sch1", 0, 1.0, pv_count=pv_count)
        for i in range(n_nonparticipants)
    ]
    schools = [make_school("sch1", sampled=len(students))]
    strata = [StratumRecord("w1", 1000.0, 0.0)]
    return build_dataset(students, schools, strata, pv_count=pv_count)


@pytest.fixture
def a1_fixture():
    """Participant mean 500, q05=350, q95=650, joint participation 0.8."""
    values = [350.0] + [490.0] * 16 + [510.0] + [650.0] * 2
    return single_school_dataset(values, n_nonparticipants=5)


def random_dataset(rng: np.random.Generator, pv_count=1, n_strata=None):
    """Random valid dataset with >= 1 participant per stratum."""
    n_strata = n_strata or int(rng.integers(1, 4))
    students, schools, strata = [], [], []
    for w in range(n_strata):
        sid = f"w{w + 1}"
        strata.append(StratumRecord(sid, float(rng.integers(100, 2000)), 0.0))
        n_schools = int(rng.integers(1, 5))
        for j in range(n_schools):
            school_id = f"{sid}-sch{j + 1}"
            # guaranteed at least one participating school per stratum
            z1 = 1 if j == 0 else int(rng.random() < 0.75)
            n_students = int(rng.integers(1, 9))
            schools.append(make_school(
                school_id, stratum=sid, z1=z1,
                enrollment=int(rng.integers(20, 400)),
                weight=float(rng.uniform(1.0, 30.0)),
                sampled=n_students if z1 else 0,
            ))
            if not z1:
                continue
            for i in range(n_students):
                z2 = 1 if (j == 0 and i == 0) else int(rng.random() < 0.8)
                pv = tuple(float(rng.uniform(200, 800)) for _ in range(pv_count))
                students.append(StudentRecord(
                    f"{school_id}-st{i + 1}", school_id, z2,
                    float(rng.uniform(0.5, 50.0)),
                    pv if z2 else None,
                ))
    return build_dataset(students, schools, strata, pv_count=pv_count)

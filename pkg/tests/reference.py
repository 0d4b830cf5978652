"""Hand-coded brute-force evaluations used as independent oracles.

Everything here is written as plain loops over records, sharing no code
with the package internals, so a disagreement means one side is wrong.
The weighted-quantile helper implements the documented convention (the
smallest value whose cumulative weight reaches alpha times the total)
directly from its definition.
"""

from __future__ import annotations

import math


def ref_quantile(values, weights, alpha):
    pairs = sorted(zip(values, weights))
    total = sum(w for _, w in pairs)
    cum = 0.0
    for v, w in pairs:
        cum += w
        if cum >= alpha * total:
            return v
    return pairs[-1][0]


def ref_mean(values, weights):
    return sum(w * v for v, w in zip(values, weights)) / sum(weights)


def expansion_mean(values, weights, copies_per_unit_weight):
    """Expand each record into ceil(w*K) unweighted copies and average."""
    expanded = []
    for v, w in zip(values, weights):
        expanded.extend([v] * math.ceil(w * copies_per_unit_weight))
    return sum(expanded) / len(expanded)


def expansion_quantile(values, weights, alpha, copies_per_unit_weight):
    expanded = []
    for v, w in zip(values, weights):
        expanded.extend([v] * math.ceil(w * copies_per_unit_weight))
    expanded.sort()
    n = len(expanded)
    cum = 0
    for v in expanded:
        cum += 1
        if cum >= alpha * n:
            return v
    return expanded[-1]


def _originals(dataset):
    return [s for s in dataset.schools if s.replacement_of is None]


def ref_p1(dataset, schools=None):
    schools = _originals(dataset) if schools is None else [
        s for s in schools if s.replacement_of is None]
    num = den = 0.0
    for s in schools:
        den += s.school_weight * s.enrollment
        if s.z1 == 1:
            num += s.school_weight * s.enrollment
    return num / den


def _rows(dataset, school):
    return [st for st in dataset.students if st.school_id == school.school_id]


def ref_p2(dataset, schools=None):
    schools = _originals(dataset) if schools is None else schools
    num = den = 0.0
    for sch in schools:
        if sch.z1 != 1:
            continue
        rows = _rows(dataset, sch)
        if not rows:
            continue
        w_all = sum(st.student_weight for st in rows)
        n_missing = max(sch.sampled_student_count, len(rows)) - len(rows)
        den += w_all + n_missing * (w_all / len(rows))
        num += sum(st.student_weight for st in rows if st.z2 == 1)
    return num / den


def ref_participants(dataset, schools=None, pv_index=0, school_adjusted=False):
    schools = _originals(dataset) if schools is None else schools
    values, weights = [], []
    for sch in schools:
        if sch.z1 != 1:
            continue
        rows = _rows(dataset, sch)
        participants = [st for st in rows if st.z2 == 1]
        if not participants:
            continue
        factor = 1.0
        if school_adjusted:
            factor = len(participants) / max(sch.sampled_student_count, len(rows))
        for st in participants:
            values.append(st.pv[pv_index])
            weights.append(st.student_weight / factor)
    return values, weights


def ref_mu(dataset, schools=None, pv_index=0, school_adjusted=False):
    values, weights = ref_participants(dataset, schools, pv_index, school_adjusted)
    return ref_mean(values, weights)


def ref_worst_case(dataset, lo, hi, pv_index=0):
    p = ref_p1(dataset) * ref_p2(dataset)
    mu = ref_mu(dataset, pv_index=pv_index)
    return mu * p + lo * (1 - p), mu * p + hi * (1 - p)


def ref_a1(dataset, alpha, pv_index=0):
    p = ref_p1(dataset) * ref_p2(dataset)
    mu = ref_mu(dataset, pv_index=pv_index)
    values, weights = ref_participants(dataset, pv_index=pv_index)
    q_lo = ref_quantile(values, weights, alpha)
    q_hi = ref_quantile(values, weights, 1 - alpha)
    return mu * p + q_lo * (1 - p), mu * p + q_hi * (1 - p)


def _stratum_schools(dataset, stratum_id):
    return [s for s in dataset.schools
            if s.stratum_id == stratum_id and s.replacement_of is None]


def ref_a1_stratified(dataset, alpha, pv_index=0):
    lower = upper = 0.0
    for st in dataset.strata:
        schools = _stratum_schools(dataset, st.stratum_id)
        p = ref_p1(dataset, schools) * ref_p2(dataset, schools)
        mu = ref_mu(dataset, schools, pv_index)
        values, weights = ref_participants(dataset, schools, pv_index)
        q_lo = ref_quantile(values, weights, alpha)
        q_hi = ref_quantile(values, weights, 1 - alpha)
        lower += st.share * (mu * p + q_lo * (1 - p))
        upper += st.share * (mu * p + q_hi * (1 - p))
    return lower, upper


def ref_a12_a2(dataset, alpha, pv_index=0):
    lower = upper = 0.0
    for st in dataset.strata:
        schools = _stratum_schools(dataset, st.stratum_id)
        p1 = ref_p1(dataset, schools)
        mu = ref_mu(dataset, schools, pv_index, school_adjusted=True)
        values, weights = ref_participants(dataset, schools, pv_index, school_adjusted=True)
        q_lo = ref_quantile(values, weights, alpha)
        q_hi = ref_quantile(values, weights, 1 - alpha)
        lower += st.share * (mu * p1 + q_lo * (1 - p1))
        upper += st.share * (mu * p1 + q_hi * (1 - p1))
    return lower, upper


def ref_point(dataset, pv_index=0):
    """Pooled mean with school- and stratum-factor adjusted weights."""
    num = den = 0.0
    for st in dataset.strata:
        schools = _stratum_schools(dataset, st.stratum_id)
        stratum_factor = sum(1 for s in schools if s.z1 == 1) / len(schools)
        for sch in schools:
            if sch.z1 != 1:
                continue
            rows = _rows(dataset, sch)
            participants = [r for r in rows if r.z2 == 1]
            if not participants:
                continue
            school_factor = len(participants) / max(sch.sampled_student_count, len(rows))
            for r in participants:
                w = r.student_weight / (school_factor * stratum_factor)
                num += w * r.pv[pv_index]
                den += w
    return num / den


def ref_monotone(dataset, alpha, pv_index=0, strict=False):
    lower, _ = ref_a1(dataset, alpha, pv_index)
    mu = ref_mu(dataset, pv_index=pv_index)
    if strict:
        values, weights = ref_participants(dataset, pv_index=pv_index)
        upper = min(mu, ref_quantile(values, weights, 1 - alpha))
    else:
        upper = mu
    return lower, upper


def ref_monotone_stratified(dataset, alpha, pv_index=0):
    lower, _ = ref_a1_stratified(dataset, alpha, pv_index)
    upper = 0.0
    for st in dataset.strata:
        schools = _stratum_schools(dataset, st.stratum_id)
        upper += st.share * ref_mu(dataset, schools, pv_index)
    return lower, upper

from __future__ import annotations

import math

import numpy as np
import pytest

from bounds_kit import (
    AssumptionSet,
    EstimationUndefinedError,
    MechanismConfig,
    MechanismKind,
    PopulationShape,
    Regime,
    SampleDesign,
    census_design,
    census_truth,
    draw_sample,
    generate_population,
    load_dataset,
    participation_rate,
    validate,
    verify_coverage,
    weighted_mean,
    weighted_quantile,
    write_dataset,
)
from bounds_kit.weighting import participant_sample, design_schools


def ignorable_pop(seed=0, **params):
    config = MechanismConfig(MechanismKind.IGNORABLE_WITHIN_CELLS, params, seed)
    return generate_population(config, PopulationShape(2, 50, 30))


class TestGeneration:
    def test_determinism(self):
        a = ignorable_pop(seed=7)
        b = ignorable_pop(seed=7)
        assert np.array_equal(a.student_y, b.student_y)
        assert np.array_equal(a.student_z2, b.student_z2)
        assert np.array_equal(a.school_z1, b.school_z1)
        c = ignorable_pop(seed=8)
        assert not np.array_equal(a.student_y, c.student_y)

    def test_ignorable_within_cell_correlation_near_zero(self):
        pop = ignorable_pop(seed=1)
        cors = []
        for j in range(pop.n_schools):
            members = pop.student_school == j
            y = pop.student_y[members]
            z = pop.student_z2[members].astype(float)
            if z.std() == 0 or y.std() == 0:
                continue
            cors.append(np.corrcoef(y, z)[0, 1])
        assert abs(np.mean(cors)) < 0.05

    def test_monotone_population_orders_means(self):
        config = MechanismConfig(
            MechanismKind.MONOTONE_SELECTION, {"strength": 0.2}, seed=2)
        pop = generate_population(config, PopulationShape(2, 40, 40))
        truth = census_truth(pop)
        assert truth.nonparticipant_mean < truth.mean < truth.participant_mean

    def test_zero_strength_monotone_is_globally_independent(self):
        config = MechanismConfig(
            MechanismKind.MONOTONE_SELECTION, {"strength": 0.0}, seed=3)
        pop = generate_population(config, PopulationShape(2, 80, 40))
        z = pop.student_z()
        y = pop.student_y
        # school-effect clustering leaves ~160 effective draws at the school
        # stage, so the noise floor is a few hundredths
        assert abs(np.corrcoef(y, z.astype(float))[0, 1]) < 0.05

    def test_invalid_parameters_rejected(self):
        with pytest.raises(EstimationUndefinedError):
            MechanismConfig(MechanismKind.IGNORABLE_WITHIN_CELLS,
                            {"school_rate": 1.5}).resolved()
        with pytest.raises(EstimationUndefinedError):
            MechanismConfig(MechanismKind.IGNORABLE_WITHIN_CELLS,
                            {"no_such": 1.0}).resolved()
        with pytest.raises(EstimationUndefinedError):
            PopulationShape(0, 10, 10)

    def test_stratum_heterogeneous_separates_locations(self):
        config = MechanismConfig(
            MechanismKind.STRATUM_HETEROGENEOUS, {"loc_spread": 80.0}, seed=4)
        pop = generate_population(config, PopulationShape(3, 30, 30))
        strata = pop.stratum_of_students()
        means = [pop.student_y[strata == w].mean() for w in range(3)]
        assert means[0] < means[1] < means[2]


class TestCensusTruth:
    def test_total_probability_identity(self):
        pop = ignorable_pop(seed=5)
        truth = census_truth(pop)
        reconstructed = (truth.participant_mean * truth.participation
                         + truth.nonparticipant_mean * (1 - truth.participation))
        assert reconstructed == pytest.approx(truth.mean, abs=1e-12)

    def test_everyone_participates(self):
        pop = ignorable_pop(seed=6, school_rate=1.0, student_rate=1.0,
                            student_rate_jitter=0.0)
        truth = census_truth(pop)
        assert truth.participation == 1.0
        assert truth.participant_mean == truth.mean
        assert truth.nonparticipant_mean is None

    def test_stratum_shares_sum_to_one(self):
        truth = census_truth(ignorable_pop(seed=7))
        assert math.fsum(s.share for s in truth.strata) == pytest.approx(1.0, abs=1e-12)


class TestDrawSample:
    def test_census_draw_matches_population_quantities(self):
        pop = ignorable_pop(seed=8)
        truth = census_truth(pop)
        ds = draw_sample(pop, census_design(), seed=0)
        assert validate(ds).ok
        est = participation_rate(ds)
        assert est.p1 == pytest.approx(truth.school_stage_rate, abs=1e-9)
        assert est.p == pytest.approx(truth.participation, abs=1e-9)
        sample, _ = participant_sample(ds, design_schools(ds))
        assert weighted_mean(sample) == pytest.approx(truth.participant_mean, abs=1e-9)
        for alpha in (0.05, 0.25):
            assert weighted_quantile(sample, alpha) == pytest.approx(
                truth.participant_quantiles[f"{alpha:g}"], abs=1e-9)

    def test_draw_determinism(self):
        pop = ignorable_pop(seed=9)
        a = draw_sample(pop, SampleDesign(10, 15), seed=3)
        b = draw_sample(pop, SampleDesign(10, 15), seed=3)
        assert a == b

    def test_design_exceeding_population_is_census(self):
        pop = ignorable_pop(seed=10)
        ds = draw_sample(pop, SampleDesign(9999, 9999), seed=0)
        census = draw_sample(pop, census_design(), seed=0)
        assert ds == census

    def test_inverse_weight_totals_reproduce_enrollment(self):
        pop = ignorable_pop(seed=11)
        total = float(pop.school_size.sum())
        for seed in range(5):
            ds = draw_sample(pop, SampleDesign(12, 5), seed=seed)
            estimate = math.fsum(
                s.school_weight * s.enrollment for s in ds.schools)
            assert estimate == pytest.approx(total, rel=1e-9)

    def test_pps_selection_frequencies(self):
        config = MechanismConfig(MechanismKind.IGNORABLE_WITHIN_CELLS, {}, seed=12)
        pop = generate_population(config, PopulationShape(1, 12, 30))
        sizes = pop.school_size.astype(float)
        n_draw = 4
        hits = np.zeros(pop.n_schools)
        replicates = 4000
        for seed in range(replicates):
            ds = draw_sample(pop, SampleDesign(n_draw, 1), seed=seed)
            for sch in ds.schools:
                hits[int(sch.school_id[3:]) - 1] += 1
        expected = n_draw * sizes / sizes.sum()
        observed = hits / replicates
        # Monte Carlo tolerance: binomial se ~ sqrt(p(1-p)/R) < 0.008
        np.testing.assert_allclose(observed, np.minimum(expected, 1.0), atol=0.025)

    def test_equal_sizes_reduce_to_equal_probabilities(self):
        config = MechanismConfig(MechanismKind.IGNORABLE_WITHIN_CELLS, {}, seed=13)
        pop = generate_population(config, PopulationShape(1, 10, 20))
        sizes = np.full(10, 20)
        pop = type(pop)(
            mechanism=pop.mechanism,
            stratum_ids=pop.stratum_ids,
            school_stratum=pop.school_stratum,
            school_size=sizes,
            school_z1=pop.school_z1[:10],
            student_school=np.repeat(np.arange(10), 20),
            student_y=pop.student_y[:200],
            student_z2=pop.student_z2[:200],
        )
        ds = draw_sample(pop, SampleDesign(4, 5), seed=1)
        weights = {s.school_weight for s in ds.schools}
        assert weights == {10 / 4}

    def test_round_trip_through_file_schema(self, tmp_path):
        pop = ignorable_pop(seed=14)
        ds = draw_sample(pop, SampleDesign(8, 6), seed=2)
        paths = tuple(str(tmp_path / n) for n in ("s.csv", "c.csv", "w.csv"))
        write_dataset(ds, *paths)
        assert load_dataset(*paths) == ds


class TestCoverage:
    def test_adversarial_census_containment(self):
        config = MechanismConfig(
            MechanismKind.ADVERSARIAL_WITHIN_QUANTILES,
            {"participation": 0.8, "position": 0.5}, seed=15)
        pop = generate_population(config, PopulationShape(2, 12, 60))
        for regime, alpha in ((Regime.A1, 0.05), (Regime.A1_1, 0.05)):
            report = verify_coverage(
                pop, AssumptionSet(regime=regime, alpha=alpha))
            assert report.census_contained

    def test_premise_violation_breaks_containment(self):
        config = MechanismConfig(
            MechanismKind.ADVERSARIAL_WITHIN_QUANTILES,
            {"participation": 0.8, "position": 0.0}, seed=16)
        pop = generate_population(config, PopulationShape(2, 12, 60))
        report = verify_coverage(pop, AssumptionSet(regime=Regime.A1, alpha=0.05))
        assert not report.census_contained
        # non-participant mean sits below the participant alpha-quantile
        truth = census_truth(pop)
        assert truth.nonparticipant_mean < truth.participant_quantiles["0.05"]

    def test_replicated_coverage_reports_fraction(self):
        config = MechanismConfig(
            MechanismKind.ADVERSARIAL_WITHIN_QUANTILES,
            {"participation": 0.85, "position": 0.4}, seed=17)
        pop = generate_population(config, PopulationShape(1, 10, 40))
        report = verify_coverage(
            pop, AssumptionSet(regime=Regime.A1, alpha=0.05),
            replicates=8)
        assert report.replicates == 8
        assert report.coverage == report.contained_count / 8
        assert len(report.results) == 8

    def test_thread_cap_env_var_keeps_results(self, monkeypatch):
        config = MechanismConfig(
            MechanismKind.ADVERSARIAL_WITHIN_QUANTILES, {}, seed=18)
        pop = generate_population(config, PopulationShape(1, 8, 30))
        assumptions = AssumptionSet(regime=Regime.A1, alpha=0.1)
        serial = verify_coverage(pop, assumptions, replicates=6)
        monkeypatch.setenv("BOUNDS_KIT_THREADS", "4")
        threaded = verify_coverage(pop, assumptions, replicates=6)
        assert serial.results == threaded.results

    def test_ignorable_point_estimate_tracks_truth(self):
        pop = ignorable_pop(seed=19)
        truth = census_truth(pop)
        ds = draw_sample(pop, census_design(), seed=0)
        from bounds_kit import point_standard

        region = point_standard(ds)
        # 3000 students: identification error only, a fraction of a sd
        assert region.lower == pytest.approx(truth.mean, abs=5.0)

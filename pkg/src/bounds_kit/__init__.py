"""Interval and point estimation of mean student achievement under
two-stage survey non-participation.

The population mean is only partially identified when some sampled
students never take the assessment; this package computes the interval
of means consistent with the observed data under a ladder of assumption
regimes, from worst-case outcome-scale bounds down to the standard
point-identifying ignorability model, together with the sample-analog
estimators, plausible-value aggregation, a synthetic-population oracle,
and a command-line front end.
"""

from .errors import (
    BoundsKitError,
    ConfigError,
    DataValidationError,
    EstimationUndefinedError,
    EstimationWarning,
)
from .estimator import MeanBoundsEstimator
from .io import load_dataset, write_dataset
from .model import (
    Dataset,
    SchoolRecord,
    StratumRecord,
    StudentRecord,
    ValidationReport,
    Violation,
    build_dataset,
    derive_shares,
    link_replacements,
    validate,
)
from .pv import PvAggregate, aggregate_over_pvs
from .regions import (
    AssumptionSet,
    CellIngredients,
    IdentificationRegion,
    Regime,
    StratumComponent,
    bounds_a1,
    bounds_a1_stratified,
    bounds_a12_a2,
    bounds_monotone,
    bounds_monotone_stratified,
    bounds_worst_case,
    compute_region,
    parse_regime,
    point_standard,
    region_width,
)
from .simulate import (
    CoverageReport,
    MechanismConfig,
    MechanismKind,
    PopulationShape,
    SampleDesign,
    SyntheticPopulation,
    TruthReport,
    census_design,
    census_truth,
    draw_sample,
    generate_population,
    verify_coverage,
)
from .weighting import (
    ParticipationEstimates,
    WeightedSample,
    participation_rate,
    school_adjustment_factor,
    school_participation_rate,
    stratum_adjustment_factor,
    student_participation_rate,
    weighted_mean,
    weighted_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionSet",
    "BoundsKitError",
    "CellIngredients",
    "ConfigError",
    "CoverageReport",
    "DataValidationError",
    "Dataset",
    "EstimationUndefinedError",
    "EstimationWarning",
    "IdentificationRegion",
    "MeanBoundsEstimator",
    "MechanismConfig",
    "MechanismKind",
    "ParticipationEstimates",
    "PopulationShape",
    "PvAggregate",
    "Regime",
    "SampleDesign",
    "SchoolRecord",
    "StratumComponent",
    "StratumRecord",
    "StudentRecord",
    "SyntheticPopulation",
    "TruthReport",
    "ValidationReport",
    "Violation",
    "WeightedSample",
    "aggregate_over_pvs",
    "bounds_a1",
    "bounds_a1_stratified",
    "bounds_a12_a2",
    "bounds_monotone",
    "bounds_monotone_stratified",
    "bounds_worst_case",
    "build_dataset",
    "census_design",
    "census_truth",
    "compute_region",
    "derive_shares",
    "draw_sample",
    "generate_population",
    "link_replacements",
    "load_dataset",
    "parse_regime",
    "participation_rate",
    "point_standard",
    "region_width",
    "school_adjustment_factor",
    "school_participation_rate",
    "stratum_adjustment_factor",
    "student_participation_rate",
    "validate",
    "verify_coverage",
    "weighted_mean",
    "weighted_quantile",
    "write_dataset",
]

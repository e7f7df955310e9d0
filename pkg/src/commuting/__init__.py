"""Stochastic gravity-kernel generation of commuting networks."""

from .core import (
    CommutingError,
    DataInconsistencyError,
    FeasibilityReport,
    FlowMatrix,
    InfeasibleMarginsError,
    InputError,
    NoCapacityError,
    SpatialUnit,
    StudyArea,
    build_distance_matrix,
    mean_unit_area,
    validate_margins,
)
from .generator import (
    GenerationConfig,
    destination_probabilities,
    generate_network,
    run_replicas,
)
from .calibration import (
    CalibrationResult,
    DistanceHistogram,
    calibrate_beta,
    distance_distribution,
    ks_distance,
)
from .validation import build_comparison_table, cpc, nc, ncc
from .universal_law import (
    CaseStudySummary,
    PowerLawFit,
    cross_validate,
    evaluate_estimated_beta,
    fit_power_law,
    predict_beta,
)
from .radiation import RadiationInputs, circle_population, compare_models, radiation_flows

__version__ = "0.1.0"

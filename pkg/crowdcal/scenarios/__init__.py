"""Calibration scenarios, their objectives and reference targets."""
from crowdcal.scenarios.histogram import Histogram20, sample_coefficient, wasserstein_1d
from crowdcal.scenarios.reference import ReferenceRecord, load_reference, save_reference
from crowdcal.scenarios.bottleneck import (
    EVAC_COUNT_FIT,
    POSITION_FIT,
    bottleneck_program,
    bottleneck_statistic,
    run_bottleneck,
)
from crowdcal.scenarios.exit_selection import (
    ExitSelectionRun,
    exit_selection_histogram,
    exit_selection_program,
    run_exit_selection,
    simulate_exit_selection,
)
from crowdcal.scenarios.synthetic import SYNTHETIC_PROGRAMS, exact_gradient, shifted_sphere
from crowdcal.scenarios.targets import BOTTLENECK_TRUTH, identifiability_gap, make_reference, triangular_weights

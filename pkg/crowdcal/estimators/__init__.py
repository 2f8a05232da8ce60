"""Gradient estimators: IPA, DGO (and its IPA/DGO hybrid), PGO."""
from crowdcal.estimators.types import (
    EstimatorKind,
    ProgramHandle,
    EstimatorConfig,
    BranchContribution,
    GradientEstimate,
)
from crowdcal.estimators.kde import kde_at_zero, silverman_bandwidth
from crowdcal.estimators.oracles import (
    estimate,
    estimate_ipa,
    estimate_dgo,
    estimate_pgo,
    branch_contributions,
    reference_gradient,
    gradient_mae,
    sample_seeds,
)

"""Shared types for the gradient estimators."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Union

import numpy as np

from crowdcal.ad import DualReal, TraceContext
from crowdcal.exceptions import InvalidConfigError

# fn(parameters, seed, ctx) -> output
ProgramFn = Callable[[DualReal, int, TraceContext], Union[DualReal, float]]


class EstimatorKind(str, Enum):
    IPA = "ipa"
    DGO = "dgo"
    HYBRID = "hybrid"
    PGO = "pgo"


@dataclass(frozen=True)
class ProgramHandle:
    """A stochastic program P(omega; theta) written against DualReal parameters.

    For fixed (theta, seed) the output value must not depend on the trace mode.
    """
    fn: ProgramFn
    n: int
    name: str = "program"

    def __call__(self, params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        out = self.fn(params, seed, ctx)
        if not isinstance(out, DualReal):
            out = DualReal.constant(out, self.n)
        return out


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator hyperparameters (immutable once built)."""
    samples: int = 10
    sigma: float = 0.0
    mode: EstimatorKind = EstimatorKind.DGO
    bandwidth: Union[str, float] = "silverman"
    seed: int = 0
    registry_cap: int = 10000

    def __post_init__(self):
        object.__setattr__(self, "mode", EstimatorKind(self.mode))
        if self.samples < 1:
            raise InvalidConfigError(f"samples must be >= 1, got {self.samples}")
        if self.sigma < 0:
            raise InvalidConfigError(f"sigma must be >= 0, got {self.sigma}")
        if not (self.bandwidth == "silverman" or (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0)):
            raise InvalidConfigError(f"bandwidth must be 'silverman' or a positive number, got {self.bandwidth!r}")

    @property
    def evaluations_per_estimate(self) -> int:
        """Simulated trajectories consumed by one estimate."""
        return 2 * self.samples if self.mode == EstimatorKind.PGO else self.samples


@dataclass(frozen=True)
class BranchContribution:
    """One jump term of the DGO estimate."""
    key: str
    site: str
    delta: float
    reach_fraction: float
    density: float
    condition_gradient: np.ndarray
    contribution: np.ndarray


@dataclass
class GradientEstimate:
    """Estimated gradient with diagnostics."""
    gradient: np.ndarray
    mean_output: float
    samples: int
    evaluations: int
    kind: EstimatorKind
    pathwise: Optional[np.ndarray] = None
    contributions: List[BranchContribution] = field(default_factory=list)
    branch_keys: int = 0
    truncated: bool = False
    # keys seen with one condition sign only, so no jump term
    skipped_keys: int = 0
    # jump terms whose density estimate came out as 0
    degenerate_kde: int = 0

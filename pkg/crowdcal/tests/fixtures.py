"""
Test fixtures for the crowd calibration toolkit.
Small scenario configs, programs and numeric helpers shared by the tests.
"""

import shutil
import tempfile
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np

from crowdcal.ad import BranchSite, DualReal, TraceContext, traced_less_than
from crowdcal.config import BottleneckConfig, ExitSelectionConfig, ForceConstants
from crowdcal.estimators import ProgramHandle
from crowdcal.exceptions import SimulationError
from crowdcal.scenarios import Histogram20

# Force weights used to generate synthetic bottleneck references
TRUTH_WEIGHTS = (0.6, 5.5, 5.5)

DEFAULT_CONSTANTS = ForceConstants()

# Bottleneck small enough for unit tests
SMALL_BOTTLENECK = BottleneckConfig(agents=3, duration=5.0)

# Exit selection with few agents and a short horizon
SMALL_EXIT_SELECTION = ExitSelectionConfig(
    agents=5,
    warm_up=5.0,
    arrival_window=10.0,
    output_low=1.0,
    output_high=40.0,
    horizon_margin=5.0,
)

# Desk-scale exit selection used by the slow zero-pathwise checks
DESK_EXIT_SELECTION = ExitSelectionConfig(
    agents=50, warm_up=20.0, arrival_window=40.0, output_high=75.0, horizon_margin=5.0
)

UNTRACKED_SITE = BranchSite("test.untracked", tracked=False)
TRACKED_SITE = BranchSite("test.tracked")

HEAVISIDE_THETAS = (-1.0, 0.0, 1.0)


def temp_dir() -> str:
    """Create a temporary directory; callers remove it with ``remove_dir``."""
    return tempfile.mkdtemp(prefix="crowdcal-test-")


def remove_dir(path: str) -> None:
    shutil.rmtree(path, ignore_errors=True)


def central_difference(f: Callable[[np.ndarray], float], theta: Sequence[float], h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a plain function."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty(theta.size)
    for i in range(theta.size):
        step = np.zeros(theta.size)
        step[i] = h
        grad[i] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return grad


def uniform_reference(cfg: ExitSelectionConfig, n: int) -> Histogram20:
    """Flat evacuation-time histogram on the configured output range."""
    return Histogram20.evacuation_times(
        DualReal.constant(np.ones(cfg.bins), n), cfg.output_low, cfg.output_high
    )


def point_mass_weights(bins: int, index: int) -> np.ndarray:
    weights = np.zeros(bins)
    weights[index] = 1.0
    return weights


def mixed_site_program() -> ProgramHandle:
    """A tracked and an untracked step on theta plus independent noise."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        omega, other = np.random.default_rng(seed).standard_normal(2)
        total = params[0] * 0.5
        if traced_less_than(ctx, params[0] + float(omega), TRACKED_SITE):
            total = total + 1.0
        if traced_less_than(ctx, params[0] + float(other), UNTRACKED_SITE):
            total = total + 3.0
        return total

    return ProgramHandle(program, 1, name="mixed-sites")


def failing_program(n: int = 2) -> ProgramHandle:
    """A program whose simulation always diverges."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        raise SimulationError("Non-finite position", agent=0, step=0)

    return ProgramHandle(program, n, name="failing")


def nan_program(n: int = 1) -> ProgramHandle:
    """A program with a non-finite output."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        return params.sum() * np.nan

    return ProgramHandle(program, n, name="nan")


def with_agents(cfg, agents: int):
    return replace(cfg, agents=agents)

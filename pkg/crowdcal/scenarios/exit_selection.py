"""Four-exit selection scenario with a histogram of decision coefficients as input.

Agents enter one by one at the left edge of a rectangular room with one
exit in the top wall, one in the bottom wall and two in the right wall.
Each agent draws a coefficient c from the input histogram and, at spawn and
then periodically, picks the exit minimizing

    c * distance / room diagonal + (1 - c) * crowd near exit / agent count

The model output is the histogram of spawn-relative evacuation times.
"""
import logging
from contextlib import nullcontext
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from crowdcal.ad import BranchSite, DualReal, TraceContext, traced_less_than
from crowdcal.config import ExitSelectionConfig, ForceConstants
from crowdcal.estimators.types import ProgramHandle
from crowdcal.exceptions import InvalidConfigError, MissingReferenceError
from crowdcal.scenarios.histogram import Histogram20, sample_coefficient, wasserstein_1d
from crowdcal.scenarios.reference import load_reference
from crowdcal.social_force import ForceWeights, Wall, WorldState, simulate, step_count

logger = logging.getLogger(__name__)

EXIT_CHOICE_SITE = BranchSite("exit_selection.choice")

SPAWN_X = 1.0        # m from the left wall
SPAWN_MARGIN = 1.0   # m from top and bottom walls
EXIT_DEPTH = 1.0     # m, agents aim this far beyond the door


@dataclass(frozen=True)
class Exit:
    """A door: its centre on the boundary and the outward unit normal."""
    center: np.ndarray
    outward: np.ndarray

    @property
    def target(self) -> np.ndarray:
        return self.center + EXIT_DEPTH * self.outward


@dataclass
class ExitSelectionRun:
    """Outcome of one exit-selection simulation."""
    histogram: Histogram20
    evacuation_times: np.ndarray
    coefficients: np.ndarray
    decisions: pd.DataFrame
    world: WorldState
    # agents whose evacuation time enters the histogram
    measured: np.ndarray


def room_exits(cfg: ExitSelectionConfig) -> List[Exit]:
    w, h = cfg.arena_width, cfg.arena_height
    return [
        Exit(np.array([w / 2.0, h]), np.array([0.0, 1.0])),
        Exit(np.array([w / 2.0, 0.0]), np.array([0.0, -1.0])),
        Exit(np.array([w, h / 3.0]), np.array([1.0, 0.0])),
        Exit(np.array([w, 2.0 * h / 3.0]), np.array([1.0, 0.0])),
    ]


def room_walls(cfg: ExitSelectionConfig) -> List[Wall]:
    """Boundary walls with a gap of ``exit_width`` at every exit."""
    w, h = cfg.arena_width, cfg.arena_height
    gap = cfg.exit_width / 2.0
    if cfg.exit_width <= 0 or gap >= h / 6.0 or gap >= w / 2.0:
        raise InvalidConfigError(f"Exit width {cfg.exit_width} does not fit the {w}x{h} room")
    return [
        Wall((0.0, 0.0), (w / 2.0 - gap, 0.0)),
        Wall((w / 2.0 + gap, 0.0), (w, 0.0)),
        Wall((w, 0.0), (w, h / 3.0 - gap)),
        Wall((w, h / 3.0 + gap), (w, 2.0 * h / 3.0 - gap)),
        Wall((w, 2.0 * h / 3.0 + gap), (w, h)),
        Wall((w, h), (w / 2.0 + gap, h)),
        Wall((w / 2.0 - gap, h), (0.0, h)),
        Wall((0.0, h), (0.0, 0.0)),
    ]


def _validate(cfg: ExitSelectionConfig, constants: ForceConstants) -> None:
    if cfg.agents < 0:
        raise InvalidConfigError(f"Agent count must be >= 0, got {cfg.agents}")
    if cfg.bins < 2:
        raise InvalidConfigError(f"Need at least 2 bins, got {cfg.bins}")
    if cfg.output_high <= cfg.output_low:
        raise InvalidConfigError("Output histogram range is empty")
    if cfg.agents and not cfg.count_warm_up and cfg.arrival_window <= cfg.warm_up:
        raise InvalidConfigError(
            f"Arrival window {cfg.arrival_window}s ends before warm-up {cfg.warm_up}s; no agent would be measured"
        )
    step_count(cfg.reconsider_period, constants.dt)


def _scope(ctx: Optional[TraceContext], label: str):
    return ctx.scope(label) if ctx is not None else nullcontext()


def choose_exit(
    position: np.ndarray,
    coefficient: float,
    exits: List[Exit],
    crowd: np.ndarray,
    cfg: ExitSelectionConfig,
    ctx: Optional[TraceContext] = None,
) -> int:
    """Index of the exit with the lowest weighted distance-plus-congestion cost.

    Args:
        position: Agent position
        coefficient: Weight of distance against congestion, in [0, 1]
        exits: Candidate exits
        crowd: Number of agents near each exit
        cfg: Scenario config (normalizers)
        ctx: Trace context; comparisons are traced when ``cfg.track_exit_choice``
    """
    diagonal = float(np.hypot(cfg.arena_width, cfg.arena_height))
    distance = np.array([np.linalg.norm(e.center - position) for e in exits])
    cost = coefficient * distance / diagonal + (1.0 - coefficient) * crowd / max(cfg.agents, 1)
    if not (cfg.track_exit_choice and ctx is not None):
        return int(np.argmin(cost))
    best = 0
    for e in range(1, len(exits)):
        if traced_less_than(ctx, cost[e] - cost[best], EXIT_CHOICE_SITE):
            best = e
    return best


def simulate_exit_selection(
    cfg: ExitSelectionConfig,
    bins: Histogram20,
    ctx: Optional[TraceContext],
    seed: int,
    constants: Optional[ForceConstants] = None,
    weights: Optional[ForceWeights] = None,
) -> ExitSelectionRun:
    """Run the scenario and collect evacuation times and exit decisions.

    Agents arrive evenly over ``cfg.arrival_window``. Only agents spawned at
    or after ``cfg.warm_up`` enter the histogram unless ``cfg.count_warm_up``
    is set; earlier arrivals still walk and crowd the exits. Measured agents
    still inside at the horizon (arrivals + output range + margin) are
    counted in the last output bin.
    """
    constants = constants or ForceConstants()
    _validate(cfg, constants)
    n = bins.n
    weights = weights or ForceWeights.constant((1.0, 1.0, 1.0), n)

    rng = np.random.default_rng(seed)
    count = cfg.agents
    interval = cfg.arrival_window / count if count else 0.0
    spawn_times = np.arange(count) * interval
    spawn_y = rng.uniform(SPAWN_MARGIN, cfg.arena_height - SPAWN_MARGIN, size=count)
    draws = rng.random(count)

    coefficients = np.empty(count)
    for i in range(count):
        with _scope(ctx, f"agent{i}"):
            coefficients[i] = float(sample_coefficient(ctx, float(draws[i]), bins, cfg.min_weight).value)

    exits = room_exits(cfg)
    centers = np.array([e.center for e in exits])
    positions = np.column_stack([np.full(count, SPAWN_X), spawn_y])
    world = WorldState.create(positions, [[exits[0].target]] * count, n, walls=room_walls(cfg), constants=constants)
    world.active = np.zeros(count, dtype=bool)
    world.spawn_time = spawn_times
    world.coefficient = coefficients

    spawned = np.zeros(count, dtype=bool)
    next_decision = spawn_times.copy()
    decisions = []
    eps = 1e-9

    def before_step(w: WorldState) -> None:
        nonlocal spawned
        arriving = ~spawned & (spawn_times <= w.time + eps)
        if arriving.any():
            spawned = spawned | arriving
            w.active = w.active | arriving

        due = np.flatnonzero(w.active & (next_decision <= w.time + eps))
        if due.size == 0:
            return
        pos = np.asarray(w.positions.value)
        active_pos = pos[w.active]
        crowd = (
            np.linalg.norm(active_pos[:, None, :] - centers[None], axis=-1) < cfg.congestion_radius
        ).sum(axis=0)
        for i in due:
            with _scope(ctx, f"agent{i}.decision{w.steps}"):
                choice = choose_exit(pos[i], coefficients[i], exits, crowd, cfg, ctx)
            distance = np.linalg.norm(centers - pos[i], axis=1)
            decisions.append((w.time, int(i), coefficients[i], choice, int(np.argmin(distance)), distance[choice]))
            w.set_route(i, [exits[choice].target])
            next_decision[i] += cfg.reconsider_period

    def after_step(w: WorldState) -> None:
        pos = np.asarray(w.positions.value)
        outside = (
            (pos[:, 0] < 0.0) | (pos[:, 0] > cfg.arena_width) | (pos[:, 1] < 0.0) | (pos[:, 1] > cfg.arena_height)
        )
        w.mark_evacuated(outside)

    horizon = max(cfg.warm_up, cfg.arrival_window) + cfg.output_high + cfg.horizon_margin
    steps = int(np.ceil(horizon / constants.dt - 1e-9))
    simulate(world, weights, steps * constants.dt, ctx, before_step=before_step, after_step=after_step)

    times = world.evacuated_at - spawn_times
    remaining = int((~world.evacuated).sum())
    if remaining:
        logger.debug(f"{remaining} of {count} agents still inside at t={world.time:.1f}s (seed {seed})")

    measured = np.ones(count, dtype=bool) if cfg.count_warm_up else spawn_times >= cfg.warm_up - eps
    histogram = Histogram20.from_samples(times[measured], n, bins=cfg.bins, low=cfg.output_low, high=cfg.output_high)
    frame = pd.DataFrame(decisions, columns=["time", "agent", "coefficient", "exit", "nearest_exit", "distance"])
    return ExitSelectionRun(histogram, times, coefficients, frame, world, measured)


def exit_selection_histogram(
    cfg: ExitSelectionConfig,
    bins: Histogram20,
    ctx: Optional[TraceContext],
    seed: int,
    constants: Optional[ForceConstants] = None,
) -> Histogram20:
    """Histogram of evacuation times for one run."""
    return simulate_exit_selection(cfg, bins, ctx, seed, constants).histogram


def _resolve_reference(cfg: ExitSelectionConfig, reference: Optional[Histogram20], n: int) -> Histogram20:
    if reference is not None:
        return reference
    if not cfg.reference_path:
        raise MissingReferenceError("No reference histogram given and exit_selection.reference_path is unset")
    return load_reference(cfg.reference_path).histogram(n)


def run_exit_selection(
    cfg: ExitSelectionConfig,
    bins: Histogram20,
    ctx: Optional[TraceContext],
    seed: int,
    reference: Optional[Histogram20] = None,
    constants: Optional[ForceConstants] = None,
) -> DualReal:
    """Wasserstein distance between the observed and the reference evacuation-time histograms.

    Raises:
        MissingReferenceError: If no reference is given or configured
    """
    reference = _resolve_reference(cfg, reference, bins.n)
    observed = exit_selection_histogram(cfg, bins, ctx, seed, constants)
    target = Histogram20(DualReal.constant(reference.weights.value, observed.n), reference.support)
    return wasserstein_1d(observed, target)


def exit_selection_program(
    cfg: ExitSelectionConfig,
    reference: Optional[Histogram20] = None,
    constants: Optional[ForceConstants] = None,
) -> ProgramHandle:
    """Calibration program over the raw input-histogram weights."""
    reference = _resolve_reference(cfg, reference, cfg.bins)

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        bins = Histogram20.coefficients(params, cfg.coefficient_low, cfg.coefficient_high)
        return run_exit_selection(cfg, bins, ctx, seed, reference, constants)

    return ProgramHandle(program, cfg.bins, name="exit-selection")

"""Bottleneck scenario: a square arena split by a wall with a single door.

Agents start in the left half and walk through the door towards a target
point on the right. Calibration targets either the average final horizontal
position or the number of agents past the door.
"""
import logging
from typing import List, Optional

import numpy as np

from crowdcal.ad import BranchSite, DualReal, TraceContext, traced_less_than
from crowdcal.config import BottleneckConfig, ForceConstants
from crowdcal.estimators.types import ProgramHandle
from crowdcal.exceptions import InvalidConfigError, SimulationError
from crowdcal.social_force import ForceWeights, Trajectory, Wall, WorldState, simulate

logger = logging.getLogger(__name__)

POSITION_FIT = "position"
EVAC_COUNT_FIT = "evac"
OBJECTIVES = (POSITION_FIT, EVAC_COUNT_FIT)

EVACUATED_SITE = BranchSite("bottleneck.evacuated")


def arena_walls(cfg: BottleneckConfig) -> List[Wall]:
    """Outer square plus the centre wall with its door."""
    size = cfg.arena_size
    mid = size / 2.0
    door_low = mid - cfg.door_width / 2.0
    door_high = mid + cfg.door_width / 2.0
    return [
        Wall((0.0, 0.0), (size, 0.0)),
        Wall((size, 0.0), (size, size)),
        Wall((size, size), (0.0, size)),
        Wall((0.0, size), (0.0, 0.0)),
        Wall((mid, 0.0), (mid, door_low)),
        Wall((mid, door_high), (mid, size)),
    ]


def build_world(cfg: BottleneckConfig, n: int, seed: int, constants: Optional[ForceConstants] = None) -> WorldState:
    """Place ``cfg.agents`` agents uniformly in the left half, routed through the door."""
    if cfg.objective not in OBJECTIVES:
        raise InvalidConfigError(f"Unknown bottleneck objective: {cfg.objective}")
    if cfg.door_width <= 0 or cfg.door_width >= cfg.arena_size:
        raise InvalidConfigError(f"Door width must be in (0, {cfg.arena_size}), got {cfg.door_width}")

    rng = np.random.default_rng(seed)
    mid = cfg.arena_size / 2.0
    margin = cfg.spawn_margin
    positions = np.column_stack([
        rng.uniform(margin, mid - margin, size=cfg.agents),
        rng.uniform(margin, cfg.arena_size - margin, size=cfg.agents),
    ])
    route = [(mid, mid), (cfg.target_x, mid)]
    return WorldState.create(
        positions,
        [route] * cfg.agents,
        n,
        walls=arena_walls(cfg),
        constants=constants,
    )


def bottleneck_statistic(
    cfg: BottleneckConfig,
    weights: ForceWeights,
    ctx: Optional[TraceContext],
    seed: int,
    constants: Optional[ForceConstants] = None,
    trajectory: Optional[Trajectory] = None,
) -> DualReal:
    """Raw model output: mean final x position, or the evacuated count.

    Each agent's evacuation test is a tracked branch on ``door_x - x``,
    evaluated under a per-agent scope. An empty crowd yields 0.
    """
    world = build_world(cfg, weights.n, seed, constants)
    try:
        simulate(world, weights, cfg.duration, ctx, trajectory=trajectory)
    except SimulationError as e:
        logger.error(f"Bottleneck run failed (seed {seed}): {e}")
        raise

    if world.size == 0:
        return DualReal.constant(0.0, weights.n)

    x = world.positions[:, 0]
    if cfg.objective == POSITION_FIT:
        return x.mean()

    door_x = cfg.arena_size / 2.0
    count = 0
    for i in range(world.size):
        if ctx is None:
            count += bool(x[i].value > door_x)
            continue
        with ctx.scope(f"agent{i}"):
            count += traced_less_than(ctx, door_x - x[i], EVACUATED_SITE)
    return DualReal.constant(float(count), weights.n)


def run_bottleneck(
    cfg: BottleneckConfig,
    weights: ForceWeights,
    ctx: Optional[TraceContext],
    seed: int,
    constants: Optional[ForceConstants] = None,
) -> DualReal:
    """Squared error of the bottleneck statistic against ``cfg.reference``."""
    diff = bottleneck_statistic(cfg, weights, ctx, seed, constants) - cfg.reference
    return diff * diff


def bottleneck_program(cfg: BottleneckConfig, constants: Optional[ForceConstants] = None) -> ProgramHandle:
    """Calibration program over the force weights (w0, w1, w2)."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        return run_bottleneck(cfg, ForceWeights.from_vector(params), ctx, seed, constants)

    return ProgramHandle(program, 3, name=f"bottleneck-{cfg.objective}")

"""Kick-drift-kick leapfrog integration of the Social Force model."""
import logging
from typing import Callable, Optional

import numpy as np

from crowdcal.ad import DualReal, TraceContext, norm, where
from crowdcal.exceptions import InvalidConfigError, SimulationError
from crowdcal.social_force.forces import accelerations
from crowdcal.social_force.model import ForceWeights, Trajectory, WorldState

logger = logging.getLogger(__name__)

StepHook = Callable[[WorldState], None]


def clamp_speed(velocities: DualReal, max_speed: np.ndarray) -> DualReal:
    """Rescale rows whose speed exceeds the per-agent maximum."""
    speed = norm(velocities)
    over = np.asarray(speed.value) > max_speed
    if not over.any():
        return velocities
    factor = where(over, max_speed / where(over, speed, 1.0), 1.0)
    return velocities * factor.reshape(-1, 1)


def _check_finite(world: WorldState) -> None:
    for name, state in (("position", world.positions), ("velocity", world.velocities)):
        bad = ~np.isfinite(np.asarray(state.value)).all(axis=-1)
        if not state.is_constant:
            bad |= ~np.isfinite(state.tangent).all(axis=(-2, -1))
        if bad.any():
            agent = int(np.flatnonzero(bad)[0])
            raise SimulationError(f"Non-finite {name}", agent=agent, step=world.steps)


def step(world: WorldState, weights: ForceWeights, ctx: Optional[TraceContext] = None) -> WorldState:
    """Advance the world by one time step.

    The acceleration is re-evaluated after the drift, so a velocity-dependent
    force sees the half-step velocity:
    v_half = v + a dt/2; x' = x + v_half dt; v' = v_half + a(x', v_half) dt/2.
    Speeds are then clamped to ``speed_factor * v0``.

    Args:
        world: State to advance (updated in place)
        weights: Force weights
        ctx: Trace context of the running sample

    Returns:
        The advanced world

    Raises:
        SimulationError: If a position or velocity becomes non-finite
    """
    if world.size == 0:
        world.steps += 1
        world.time = world.steps * world.dt
        return world

    half = 0.5 * world.dt
    acc = accelerations(world, weights, world.positions, world.velocities, ctx)
    v_half = world.velocities + acc * half
    positions = world.positions + v_half * world.dt
    acc = accelerations(world, weights, positions, v_half, ctx)
    velocities = v_half + acc * half

    world.positions = positions
    world.velocities = clamp_speed(velocities, world.desired_speed * world.constants.speed_factor)
    world.steps += 1
    world.time = world.steps * world.dt
    _check_finite(world)
    world.advance_waypoints()
    return world


def step_count(duration: float, dt: float) -> int:
    """Number of steps covering ``duration``; it must be a whole multiple of dt."""
    steps = int(round(duration / dt))
    if steps < 0 or not np.isclose(steps * dt, duration, rtol=0.0, atol=1e-9):
        raise InvalidConfigError(f"Duration {duration}s is not a whole number of {dt}s steps")
    return steps


def simulate(
    world: WorldState,
    weights: ForceWeights,
    duration: float,
    ctx: Optional[TraceContext] = None,
    before_step: Optional[StepHook] = None,
    after_step: Optional[StepHook] = None,
    trajectory: Optional[Trajectory] = None,
) -> WorldState:
    """Run the world for ``duration`` seconds.

    Args:
        world: Initial state (updated in place)
        weights: Force weights
        duration: Simulated time; a whole multiple of the time step
        ctx: Trace context of the running sample
        before_step: Called before every step (spawning, route choice)
        after_step: Called after every step (evacuation checks)
        trajectory: Optional recorder, filled with the initial and every later state

    Returns:
        The final world
    """
    steps = step_count(duration, world.dt)
    if trajectory is not None:
        trajectory.record(world)

    for _ in range(steps):
        if before_step is not None:
            before_step(world)
        step(world, weights, ctx)
        if after_step is not None:
            after_step(world)
        if trajectory is not None:
            trajectory.record(world)

    if world.cap_events:
        logger.warning(f"{world.cap_events} force terms capped at {world.constants.max_force} N over {steps} steps")
    return world

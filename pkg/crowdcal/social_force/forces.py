"""Force kernels of the Social Force model.

Every kernel works on arrays of agents (or agent pairs) in DualReal
arithmetic. Pairwise terms use the exponential repulsion

    m_a * A * exp((r_ab - d_ab) / B) * n_ab

with the anisotropic weight lambda + (1 - lambda) * (1 + cos(phi)) / 2 for
agent interactions, where phi is the angle between a's heading and the
direction towards b. Single terms are capped at ``max_force``.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from crowdcal.ad import (
    BranchSite,
    DualReal,
    TraceContext,
    clip,
    dot,
    exp,
    norm,
    scatter_add,
    stack,
    traced_less_than,
    where,
    zeros,
)
from crowdcal.config import ForceConstants
from crowdcal.social_force.model import AgentState, ForceWeights, Wall, WorldState

logger = logging.getLogger(__name__)

# Passthrough sites, only recorded with ForceConstants.full_dgo in DGO mode
FIELD_OF_VIEW_SITE = BranchSite("force.field_of_view", tracked=False)
SEGMENT_START_SITE = BranchSite("force.segment_start", tracked=False)
SEGMENT_END_SITE = BranchSite("force.segment_end", tracked=False)


@dataclass
class ForceTerms:
    """Summed force components on each active agent, shape (A, 2) each."""
    internal: DualReal
    interaction: DualReal
    obstacle: DualReal
    capped: int = 0


def _safe_unit(vectors: DualReal, fallback: np.ndarray) -> Tuple[DualReal, np.ndarray]:
    """Normalize rows; zero-length rows take the fallback direction."""
    length = norm(vectors)
    nonzero = np.asarray(length.value) > 0.0
    unit = vectors / where(nonzero, length, 1.0).reshape(np.shape(length.value) + (1,))
    return where(nonzero[..., None], unit, fallback), nonzero


def desired_directions(positions: DualReal, goals: np.ndarray) -> DualReal:
    """Unit vectors towards each goal; zero for agents standing on their goal."""
    unit, _ = _safe_unit(goals - positions, 0.0)
    return unit


def internal_forces(
    positions: DualReal,
    velocities: DualReal,
    goals: np.ndarray,
    desired_speed: np.ndarray,
    mass: np.ndarray,
    tau: np.ndarray,
) -> DualReal:
    """Goal-seeking force m (v0 e0 - v) / tau, before weighting."""
    e0 = desired_directions(positions, goals)
    return (e0 * desired_speed[:, None] - velocities) * (mass / tau)[:, None]


def neighbor_pairs(points: np.ndarray, constants: ForceConstants) -> Tuple[np.ndarray, np.ndarray]:
    """Ordered (a, b) index pairs of interacting agents.

    All pairs up to ``grid_threshold`` agents, otherwise pairs within
    ``neighbor_cutoff`` found by a k-d tree. Pairs are sorted by (a, b).
    """
    count = len(points)
    if count < 2:
        empty = np.zeros(0, dtype=int)
        return empty, empty
    if count <= constants.grid_threshold:
        a, b = np.nonzero(~np.eye(count, dtype=bool))
        return a, b

    pairs = cKDTree(points).query_pairs(r=constants.neighbor_cutoff, output_type="ndarray")
    a = np.concatenate([pairs[:, 0], pairs[:, 1]])
    b = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((b, a))
    return a[order], b[order]


def pair_forces(
    positions: DualReal,
    velocities: DualReal,
    headings: DualReal,
    mass: np.ndarray,
    a_idx: np.ndarray,
    b_idx: np.ndarray,
    constants: ForceConstants,
    ctx: Optional[TraceContext] = None,
) -> Tuple[DualReal, int]:
    """Repulsion of agent b on agent a for each pair.

    Args:
        positions: Agent positions, shape (A, 2)
        velocities: Agent velocities, shape (A, 2)
        headings: Fallback unit headings for agents at rest, shape (A, 2)
        mass: Agent masses, shape (A,)
        a_idx: Receiving agent of each pair
        b_idx: Acting agent of each pair
        constants: Force constants
        ctx: Trace context for the optional field-of-view branch

    Returns:
        (forces of shape (P, 2), number of capped terms)
    """
    fallback = np.where((a_idx < b_idx)[:, None], [[1.0, 0.0]], [[-1.0, 0.0]])
    n_ab, apart = _safe_unit(positions[a_idx] - positions[b_idx], fallback)
    if not apart.all():
        logger.warning(f"{int((~apart).sum())} coincident agent pairs; using capped force")

    distance = norm(positions[a_idx] - positions[b_idx])
    magnitude = exp((2.0 * constants.radius - distance) * (1.0 / constants.b_agent)) * (mass[a_idx] * constants.a_agent)
    capped = (np.asarray(magnitude.value) > constants.max_force) | ~apart
    magnitude = where(capped, constants.max_force, magnitude)

    heading, _ = _safe_unit(velocities[a_idx], headings[a_idx].value)
    cos_phi = -dot(heading, n_ab)
    if constants.full_dgo:
        traced_less_than(ctx, -cos_phi, FIELD_OF_VIEW_SITE)
    lam = constants.lambda_fov
    anisotropy = lam + (1.0 - lam) * (1.0 + cos_phi) * 0.5

    return n_ab * (magnitude * anisotropy).reshape(-1, 1), int(capped.sum())


def wall_forces(
    positions: DualReal,
    mass: np.ndarray,
    walls: List[Wall],
    constants: ForceConstants,
    ctx: Optional[TraceContext] = None,
) -> Tuple[DualReal, int]:
    """Summed wall repulsion on each agent, from the closest point of each segment.

    Returns:
        (forces of shape (A, 2), number of capped terms)
    """
    count = np.shape(positions.value)[0]
    if not walls or count == 0:
        return zeros((count, 2), positions.n), 0

    starts = np.array([w.start for w in walls])
    segments = np.array([w.end - w.start for w in walls])
    lengths = np.linalg.norm(segments, axis=1)
    normals = np.stack([-segments[:, 1], segments[:, 0]], axis=-1) / lengths[:, None]

    expanded = positions[:, None, :]
    t = dot(expanded - starts[None], segments[None]) / (lengths ** 2)[None]
    if constants.full_dgo:
        traced_less_than(ctx, t, SEGMENT_START_SITE)
        traced_less_than(ctx, 1.0 - t, SEGMENT_END_SITE)
    t = clip(t, 0.0, 1.0)

    closest = t.reshape(count, len(walls), 1) * segments[None] + starts[None]
    direction, off_line = _safe_unit(expanded - closest, np.broadcast_to(normals[None], (count, len(walls), 2)))
    if not off_line.all():
        logger.warning(f"{int((~off_line).sum())} agents on a wall line; using capped force")

    distance = norm(expanded - closest)
    magnitude = exp((constants.radius - distance) * (1.0 / constants.b_wall)) * (mass[:, None] * constants.a_wall)
    capped = (np.asarray(magnitude.value) > constants.max_force) | ~off_line
    magnitude = where(capped, constants.max_force, magnitude)

    forces = direction * magnitude.reshape(count, len(walls), 1)
    return forces.sum(axis=1), int(capped.sum())


def force_terms(
    world: WorldState,
    positions: DualReal,
    velocities: DualReal,
    ctx: Optional[TraceContext] = None,
) -> Tuple[np.ndarray, ForceTerms]:
    """Unweighted force components on the active agents at the given state.

    Returns:
        (indices of the active agents, their force terms)
    """
    active = np.flatnonzero(world.active)
    n = positions.n
    if active.size == 0:
        empty = zeros((0, 2), n)
        return active, ForceTerms(empty, empty, empty)

    consts = world.constants
    x = positions[active]
    v = velocities[active]
    goals = world.goals[active]
    mass = world.mass[active]

    internal = internal_forces(x, v, goals, world.desired_speed[active], mass, world.tau[active])

    a_idx, b_idx = neighbor_pairs(np.asarray(x.value), consts)
    if a_idx.size:
        pairs, pair_capped = pair_forces(x, v, desired_directions(x, goals), mass, a_idx, b_idx, consts, ctx)
        interaction = scatter_add((active.size, 2), a_idx, pairs)
    else:
        interaction, pair_capped = zeros((active.size, 2), n), 0

    obstacle, wall_capped = wall_forces(x, mass, world.walls, consts, ctx)
    return active, ForceTerms(internal, interaction, obstacle, pair_capped + wall_capped)


def accelerations(
    world: WorldState,
    weights: ForceWeights,
    positions: DualReal,
    velocities: DualReal,
    ctx: Optional[TraceContext] = None,
) -> DualReal:
    """(w1 internal + w2 interaction + w3 obstacle) / m for every agent, zero when inactive."""
    active, terms = force_terms(world, positions, velocities, ctx)
    world.cap_events += terms.capped
    if active.size == 0:
        return zeros((world.size, 2), positions.n)
    total = (
        terms.internal * weights.internal
        + terms.interaction * weights.interaction
        + terms.obstacle * weights.obstacle
    )
    return scatter_add((world.size, 2), active, total / world.mass[active][:, None])


# -- single-agent operations -------------------------------------------------

def _as_row(value: DualReal) -> DualReal:
    return value.reshape(1, 2)


def internal_force(a: AgentState) -> DualReal:
    """Goal-seeking force on one agent; pure braking when the goal is reached or unset."""
    goal = a.position.value if a.goal is None else a.goal
    force = internal_forces(
        _as_row(a.position),
        _as_row(a.velocity),
        np.asarray(goal, dtype=float).reshape(1, 2),
        np.array([a.desired_speed]),
        np.array([a.mass]),
        np.array([a.tau]),
    )
    return force[0]


def interaction_force(a: AgentState, b: AgentState, constants: Optional[ForceConstants] = None) -> DualReal:
    """Repulsion exerted by agent b on agent a."""
    constants = constants or ForceConstants()
    positions = stack([a.position, b.position])
    velocities = stack([a.velocity, b.velocity])
    goal = a.position.value if a.goal is None else a.goal
    heading = desired_directions(_as_row(a.position), np.asarray(goal, dtype=float).reshape(1, 2))
    headings = stack([heading[0], heading[0]])
    force, _ = pair_forces(
        positions, velocities, headings, np.array([a.mass, b.mass]), np.array([0]), np.array([1]), constants
    )
    return force[0]


def obstacle_force(a: AgentState, wall: Wall, constants: Optional[ForceConstants] = None) -> DualReal:
    """Repulsion of one wall on one agent."""
    constants = constants or ForceConstants()
    force, _ = wall_forces(_as_row(a.position), np.array([a.mass]), [wall], constants)
    return force[0]

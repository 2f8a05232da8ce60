"""Domain types of the Social Force crowd model.

The world holds agent state as arrays so the force kernels run over all
agents at once; ``AgentState`` is a per-agent view used by the single-agent
force operations and by tests.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from crowdcal.ad import DualReal, where, zeros
from crowdcal.config import ForceConstants
from crowdcal.exceptions import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Wall:
    """A wall segment between two distinct endpoints."""
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).reshape(2)
        end = np.asarray(self.end, dtype=float).reshape(2)
        if np.allclose(start, end):
            raise InvalidInputError(f"Wall endpoints must differ, got {start.tolist()} twice")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


@dataclass
class ForceWeights:
    """Scaling coefficients of the internal, interaction and obstacle forces."""
    internal: DualReal
    interaction: DualReal
    obstacle: DualReal

    @classmethod
    def from_vector(cls, w: DualReal) -> "ForceWeights":
        """Split a length-3 parameter vector (w0, w1, w2) into the three weights."""
        if w.shape != (3,):
            raise InvalidInputError(f"Force weights need 3 coefficients, got shape {w.shape}")
        return cls(internal=w[0], interaction=w[1], obstacle=w[2])

    @classmethod
    def constant(cls, values: Sequence[float], n: int = 3) -> "ForceWeights":
        """Weights without derivatives, for plain runs and tests."""
        if len(values) != 3:
            raise InvalidInputError(f"Force weights need 3 coefficients, got {len(values)}")
        return cls(*(DualReal.constant(float(v), n) for v in values))

    @property
    def n(self) -> int:
        return self.internal.n


@dataclass
class AgentState:
    """State of one pedestrian."""
    position: DualReal
    velocity: DualReal
    desired_speed: float
    goal: Optional[np.ndarray]
    mass: float = 80.0
    tau: float = 0.5
    coefficient: float = 1.0
    spawn_time: float = 0.0
    evacuated_at: Optional[float] = None


@dataclass
class WorldState:
    """All agents, walls and the simulation clock.

    Positions and velocities are DualReal arrays of shape (N, 2). Each agent
    follows a list of waypoints; ``goals`` is the waypoint currently targeted.
    Inactive agents (not yet spawned or already evacuated) exert and feel no
    force and do not move.
    """
    positions: DualReal
    velocities: DualReal
    goals: np.ndarray
    desired_speed: np.ndarray
    mass: np.ndarray
    tau: np.ndarray
    walls: List[Wall] = field(default_factory=list)
    constants: ForceConstants = field(default_factory=ForceConstants)
    time: float = 0.0
    steps: int = 0
    waypoints: List[List[np.ndarray]] = field(default_factory=list)
    waypoint_index: Optional[np.ndarray] = None
    active: Optional[np.ndarray] = None
    evacuated: Optional[np.ndarray] = None
    spawn_time: Optional[np.ndarray] = None
    evacuated_at: Optional[np.ndarray] = None
    coefficient: Optional[np.ndarray] = None
    cap_events: int = 0

    def __post_init__(self):
        count = self.size
        if self.waypoint_index is None:
            self.waypoint_index = np.zeros(count, dtype=int)
        if self.active is None:
            self.active = np.ones(count, dtype=bool)
        if self.evacuated is None:
            self.evacuated = np.zeros(count, dtype=bool)
        if self.spawn_time is None:
            self.spawn_time = np.zeros(count)
        if self.evacuated_at is None:
            self.evacuated_at = np.full(count, np.nan)
        if self.coefficient is None:
            self.coefficient = np.ones(count)
        if not self.waypoints:
            self.waypoints = [[g.copy()] for g in np.asarray(self.goals, dtype=float).reshape(count, 2)]

    @classmethod
    def create(
        cls,
        positions: np.ndarray,
        waypoints: Sequence[Sequence[Sequence[float]]],
        n: int,
        walls: Optional[List[Wall]] = None,
        constants: Optional[ForceConstants] = None,
        velocities: Optional[np.ndarray] = None,
    ) -> "WorldState":
        """Build a world with homogeneous agents taking defaults from the force constants.

        Args:
            positions: Initial positions, shape (N, 2)
            waypoints: Per-agent waypoint lists (at least one point each)
            n: Tangent dimension (number of calibration parameters)
            walls: Wall segments
            constants: Force constants
            velocities: Initial velocities (default zero)
        """
        constants = constants or ForceConstants()
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        count = positions.shape[0]
        if len(waypoints) != count:
            raise InvalidInputError(f"Need one waypoint list per agent: {len(waypoints)} for {count} agents")
        routes = [[np.asarray(p, dtype=float) for p in route] for route in waypoints]
        if any(len(route) == 0 for route in routes):
            raise InvalidInputError("Every agent needs at least one waypoint")
        if velocities is None:
            vel = zeros((count, 2), n)
        else:
            vel = DualReal.constant(np.asarray(velocities, dtype=float).reshape(count, 2), n)
        goals = np.array([route[0] for route in routes]).reshape(count, 2)
        return cls(
            positions=DualReal.constant(positions, n),
            velocities=vel,
            goals=goals,
            desired_speed=np.full(count, constants.desired_speed),
            mass=np.full(count, constants.mass),
            tau=np.full(count, constants.tau),
            walls=list(walls or []),
            constants=constants,
            waypoints=routes,
        )

    @property
    def size(self) -> int:
        return int(np.shape(self.positions.value)[0])

    @property
    def n(self) -> int:
        return self.positions.n

    @property
    def dt(self) -> float:
        return self.constants.dt

    def agent(self, i: int) -> AgentState:
        """Per-agent view of the arrays."""
        evacuated_at = None if np.isnan(self.evacuated_at[i]) else float(self.evacuated_at[i])
        return AgentState(
            position=self.positions[i],
            velocity=self.velocities[i],
            desired_speed=float(self.desired_speed[i]),
            goal=self.goals[i].copy(),
            mass=float(self.mass[i]),
            tau=float(self.tau[i]),
            coefficient=float(self.coefficient[i]),
            spawn_time=float(self.spawn_time[i]),
            evacuated_at=evacuated_at,
        )

    @property
    def agents(self) -> List[AgentState]:
        return [self.agent(i) for i in range(self.size)]

    def set_route(self, i: int, waypoints: Sequence[Sequence[float]]) -> None:
        """Replace agent i's remaining route and target its first point."""
        route = [np.asarray(p, dtype=float) for p in waypoints]
        if not route:
            raise InvalidInputError(f"Agent {i} needs at least one waypoint")
        self.waypoints[i] = route
        self.waypoint_index[i] = 0
        self.goals[i] = route[0]

    def advance_waypoints(self) -> None:
        """Move agents that reached an intermediate waypoint on to the next one."""
        pos = np.asarray(self.positions.value)
        radius = self.constants.waypoint_radius
        for i in np.flatnonzero(self.active):
            idx = self.waypoint_index[i]
            if idx + 1 >= len(self.waypoints[i]):
                continue
            if np.linalg.norm(self.goals[i] - pos[i]) < radius:
                self.waypoint_index[i] = idx + 1
                self.goals[i] = self.waypoints[i][idx + 1]
                logger.debug(f"Agent {i} reached waypoint {idx} at t={self.time:.1f}s")

    def mark_evacuated(self, mask: np.ndarray) -> None:
        """Remove agents from the simulation and stamp their evacuation time."""
        mask = np.asarray(mask, dtype=bool) & self.active
        if not mask.any():
            return
        self.active = self.active & ~mask
        self.evacuated = self.evacuated | mask
        self.evacuated_at = np.where(mask, self.time, self.evacuated_at)
        self.velocities = where(mask[:, None], 0.0, self.velocities)


class Trajectory:
    """Per-step record of positions and velocities (values only)."""

    COLUMNS = ["step", "agent", "x", "y", "vx", "vy"]

    def __init__(self):
        self._frames: List[pd.DataFrame] = []

    def record(self, world: WorldState) -> None:
        pos = np.asarray(world.positions.value).reshape(-1, 2)
        vel = np.asarray(world.velocities.value).reshape(-1, 2)
        self._frames.append(
            pd.DataFrame({
                "step": world.steps,
                "agent": np.arange(world.size),
                "x": pos[:, 0],
                "y": pos[:, 1],
                "vx": vel[:, 0],
                "vy": vel[:, 1],
            })
        )

    def __len__(self) -> int:
        return len(self._frames)

    def to_frame(self) -> pd.DataFrame:
        if not self._frames:
            return pd.DataFrame(columns=self.COLUMNS)
        return pd.concat(self._frames, ignore_index=True)

    def to_csv(self, path: str) -> None:
        """Write the trajectory as (step, agent, x, y, vx, vy) rows."""
        self.to_frame().to_csv(path, index=False)
        logger.info(f"Wrote trajectory with {len(self)} steps to {path}")

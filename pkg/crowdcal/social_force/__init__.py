"""Social Force pedestrian model in dual-number arithmetic."""
from crowdcal.social_force.model import AgentState, ForceWeights, Trajectory, Wall, WorldState
from crowdcal.social_force.forces import (
    FIELD_OF_VIEW_SITE,
    SEGMENT_START_SITE,
    SEGMENT_END_SITE,
    accelerations,
    desired_directions,
    interaction_force,
    internal_force,
    neighbor_pairs,
    obstacle_force,
)
from crowdcal.social_force.integrator import clamp_speed, simulate, step, step_count

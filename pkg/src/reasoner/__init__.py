"""Parameter reasoning: location heuristics, grasp catalog, candidate streams and projection"""

from .distributions import PoseDistribution, PoseGrid
from .heuristics import HeuristicConfig, LocationGrounder, ground_location, occupancy, target_point
from .grasps import GraspCatalog, GraspPoses, GraspSpec, grasp_poses, handle_grasp_poses, load_reasoner_config
from .engine import (
    APPLICABLE,
    PARAMETERS,
    HeuristicReasoner,
    ParameterQuery,
    ParameterReasoner,
    StreamConfig,
    load_heuristic_reasoner,
    mobile_pick_bindings,
    shoulder_position,
    tiered
)
from .projection import ProjectionImpure, Projector, validate_by_projection

__all__ = [
    "PoseDistribution",
    "PoseGrid",
    "HeuristicConfig",
    "LocationGrounder",
    "ground_location",
    "occupancy",
    "target_point",
    "GraspCatalog",
    "GraspPoses",
    "GraspSpec",
    "grasp_poses",
    "handle_grasp_poses",
    "load_reasoner_config",
    "APPLICABLE",
    "PARAMETERS",
    "HeuristicReasoner",
    "ParameterQuery",
    "ParameterReasoner",
    "StreamConfig",
    "load_heuristic_reasoner",
    "mobile_pick_bindings",
    "shoulder_position",
    "tiered",
    "ProjectionImpure",
    "Projector",
    "validate_by_projection"
]

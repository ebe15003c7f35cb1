"""Kinematic world model: trees, geometry, objects, containers and settling"""

from .geometry import Shape, ShapeKind, Contact, closest_points
from .kinematics import Joint, JointType, KinematicTree, Link
from .world import (
    ArmInfo,
    ArticulatedContainer,
    Body,
    EnvironmentModel,
    Location,
    ObjectType,
    RobotModel,
    SceneObject,
    WorldAuditor,
    WorldState,
    attach,
    detach,
    forward_kinematics,
    jacobian
)
from .settle import SettleConfig, Settler, settle
from .loader import load_environment, load_robot, load_scene

__all__ = [
    "Shape",
    "ShapeKind",
    "Contact",
    "closest_points",
    "Joint",
    "JointType",
    "KinematicTree",
    "Link",
    "ArmInfo",
    "ArticulatedContainer",
    "Body",
    "EnvironmentModel",
    "Location",
    "ObjectType",
    "RobotModel",
    "SceneObject",
    "WorldAuditor",
    "WorldState",
    "attach",
    "detach",
    "forward_kinematics",
    "jacobian",
    "SettleConfig",
    "Settler",
    "settle",
    "load_environment",
    "load_robot",
    "load_scene"
]

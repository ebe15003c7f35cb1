"""Whole-body motion control: task functions, per-tick QP and trajectory integration"""

from .qp import ActiveSetQP, QPSolution
from .problem import (
    COLLISION_MODES,
    CONSTRAINTS,
    MOTION_TYPES,
    ControlConfig,
    ControlProblem,
    MotionGoalSpec,
    MotionResult,
    ObservableLayout,
    Trajectory
)
from .goals import (
    CartesianPoseGoal,
    CollisionRows,
    JointPositionGoal,
    KeepVertical,
    LookAt,
    TaskFunction,
    inverse_left_jacobian
)
from .controller import MotionPlanner

__all__ = [
    "ActiveSetQP",
    "QPSolution",
    "COLLISION_MODES",
    "CONSTRAINTS",
    "MOTION_TYPES",
    "ControlConfig",
    "ControlProblem",
    "MotionGoalSpec",
    "MotionResult",
    "ObservableLayout",
    "Trajectory",
    "CartesianPoseGoal",
    "CollisionRows",
    "JointPositionGoal",
    "KeepVertical",
    "LookAt",
    "TaskFunction",
    "inverse_left_jacobian",
    "MotionPlanner"
]

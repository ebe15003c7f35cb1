"""Control problem structures: goal specs, observables, kinematic views and trajectories"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..models.domain import Pose
from ..worldmodel.geometry import closest_points
from ..worldmodel.world import Body, WorldState

MOTION_TYPES = ("moving-arm", "moving-base", "opening", "closing", "looking")
COLLISION_MODES = (
    "avoid-all",
    "allow-all",
    "allow-arm",
    "allow-hand",
    "allow-fingers",
    "allow-fingers-and-object",
)
CONSTRAINTS = ("keep-vertical-orientation", "look-at-hand", "joint-centering")


@dataclass
class ControlConfig:
    """Gains, weights and thresholds of the motion controller"""
    dt: float = 0.02
    max_ticks: int = 3000
    stall_ticks: int = 250
    epsilon: float = 1e-4
    translation_gain: float = 2.0
    rotation_gain: float = 2.0
    joint_gain: float = 2.0
    max_linear_velocity: float = 0.4
    max_angular_velocity: float = 1.0
    translation_tolerance: float = 0.003
    rotation_tolerance: float = 0.02
    joint_tolerance: float = 0.01
    # weight tiers: base goals < collision standoff < interaction goals
    weight_base: float = 1.0
    weight_collision: float = 10.0
    weight_interaction: float = 100.0
    hard_distance: float = 0.0
    soft_distance: float = 0.05
    activation_distance: float = 0.25
    damper_gain: float = 0.5
    soft_collision_gain: float = 2.0
    broadphase_radius: float = 0.3
    limit_margin: float = 0.05
    centering_gain: float = 0.2
    centering_weight_scale: float = 0.001
    keep_vertical_tolerance: float = 0.03
    articulation_gain: float = 1.0
    articulation_rotation_band: float = 0.3
    articulation_tolerance: float = 0.002

    def __post_init__(self):
        """Validate timing and weight ordering"""
        if self.dt <= 0 or self.max_ticks <= 0:
            raise ValueError(f"Control period and tick budget must be positive, got {self.dt}, {self.max_ticks}")
        if not self.weight_base < self.weight_collision < self.weight_interaction:
            raise ValueError("Weights must satisfy base < collision < interaction")
        if self.hard_distance > self.soft_distance:
            raise ValueError("Hard collision distance must not exceed the soft standoff")
        if not 0 < self.articulation_tolerance <= self.joint_tolerance:
            raise ValueError(f"Articulation tolerance must lie in (0, joint_tolerance], got {self.articulation_tolerance}")


@dataclass
class MotionGoalSpec:
    """Declarative description of a motion, compiled into a ControlProblem"""
    type: str
    goal_poses: Dict[str, Pose] = field(default_factory=dict)
    joint_goals: Dict[str, float] = field(default_factory=dict)
    collision_mode: str = "avoid-all"
    collision_object: Optional[str] = None
    collision_object_part: Optional[str] = None
    constraints: Tuple[str, ...] = ()
    arm: Optional[str] = None
    container: Optional[str] = None
    target_position: Optional[float] = None
    look_target: Optional[Sequence[float]] = None
    rotation_tolerance: float = 0.0
    interaction: bool = False

    def __post_init__(self):
        """Validate motion type, collision mode and constraints"""
        if self.type not in MOTION_TYPES:
            raise ValueError(f"Unknown motion type {self.type}, expected one of {MOTION_TYPES}")
        if self.collision_mode not in COLLISION_MODES:
            raise ValueError(f"Unknown collision mode {self.collision_mode}")
        unknown = set(self.constraints) - set(CONSTRAINTS)
        if unknown:
            raise ValueError(f"Unknown motion constraints {sorted(unknown)}")
        if self.type in ("opening", "closing") and self.container is None:
            raise ValueError(f"{self.type} motion needs a container")
        if self.collision_object_part is not None and self.collision_object is None:
            raise ValueError("collision-object-part needs a collision-object")
        if self.type == "looking" and self.look_target is None:
            raise ValueError("looking motion needs a look target")
        if self.type in ("moving-arm", "moving-base") and not self.goal_poses and not self.joint_goals:
            raise ValueError(f"{self.type} motion needs goal poses or joint goals")


class ObservableLayout:
    """Named slices of the observable vector, fixed at compile time"""

    def __init__(self):
        self._slices: Dict[str, slice] = {}
        self.size = 0

    def add(self, name: str, width: int) -> slice:
        if name in self._slices:
            raise ValueError(f"Observable {name} already declared")
        s = slice(self.size, self.size + width)
        self._slices[name] = s
        self.size += width
        return s

    def __getitem__(self, name: str) -> slice:
        return self._slices[name]

    def __contains__(self, name: str) -> bool:
        return name in self._slices

    def names(self) -> List[str]:
        return list(self._slices)


class KinematicModel:
    """Robot and environment trees viewed through the controlled variables"""

    def __init__(self, world: WorldState, controlled: Sequence[str]):
        self.robot_tree = world.robot.tree
        self.env_tree = world.environment.tree
        self.dof_names = list(self.robot_tree.dof_names) + list(self.env_tree.dof_names)
        self.dof_index = {n: i for i, n in enumerate(self.dof_names)}
        self.controlled = list(controlled)
        for name in self.controlled:
            if name not in self.dof_index:
                raise ValueError(f"Controlled DOF {name} is not part of the world")
        self.var_index = {n: i for i, n in enumerate(self.controlled)}
        self.controlled_positions = np.array([self.dof_index[n] for n in self.controlled], dtype=int)
        n_robot = self.robot_tree.dof_count
        self._robot_map = [(self.robot_tree.dof_index(n), i) for i, n in enumerate(self.controlled) if self.dof_index[n] < n_robot]
        self._env_map = [(self.env_tree.dof_index(n), i) for i, n in enumerate(self.controlled) if self.dof_index[n] >= n_robot]
        self.n_robot = n_robot

    @property
    def n_vars(self) -> int:
        return len(self.controlled)

    def frames(self, q_all: np.ndarray) -> "Frames":
        return Frames(self, q_all)


class Frames:
    """Link transforms of both trees and Jacobians over the controlled variables"""

    def __init__(self, model: KinematicModel, q_all: np.ndarray):
        self.model = model
        self.q_robot = q_all[: model.n_robot]
        self.q_env = q_all[model.n_robot:]
        self.robot = model.robot_tree.link_transforms(self.q_robot)
        self.env = model.env_tree.link_transforms(self.q_env)

    def transform(self, link: str) -> np.ndarray:
        if link in self.robot:
            return self.robot[link]
        return self.env[link]

    def jacobian(self, link: str, point: Optional[np.ndarray] = None) -> np.ndarray:
        """6 x n_vars Jacobian of a point on a link (zeros for uncontrolled trees)"""
        model = self.model
        jac = np.zeros((6, model.n_vars))
        if link in self.robot:
            if model._robot_map:
                full = model.robot_tree.jacobian(self.q_robot, link, point, self.robot)
                for tree_i, var_i in model._robot_map:
                    jac[:, var_i] = full[:, tree_i]
        elif model._env_map:
            full = model.env_tree.jacobian(self.q_env, link, point, self.env)
            for tree_i, var_i in model._env_map:
                jac[:, var_i] = full[:, tree_i]
        return jac


@dataclass
class CollisionPair:
    """Monitored pair: a robot body against an obstacle"""
    index: int
    robot_body: Body
    obstacle: Body

    @property
    def name(self) -> str:
        return f"{self.robot_body.name}|{self.obstacle.name}"


PAIR_WIDTH = 10


def body_transform(body: Body, frames: Frames) -> np.ndarray:
    if body.link is None:
        return body.transform
    return frames.transform(body.link) @ body.local


class PairSet:
    """Robot bodies, obstacles and the monitored pairs between them"""

    def __init__(self, robot_bodies: Sequence[Body], obstacles: Sequence[Body], pairs: Sequence[Tuple[int, int]]):
        self.robot_bodies = list(robot_bodies)
        self.obstacles = list(obstacles)
        self.ia = np.array([i for i, _ in pairs], dtype=int)
        self.ib = np.array([j for _, j in pairs], dtype=int)
        self.pairs = [
            CollisionPair(k, self.robot_bodies[i], self.obstacles[j]) for k, (i, j) in enumerate(pairs)
        ]
        radius_a = np.array([b.shape.bounding_radius() for b in self.robot_bodies])
        radius_b = np.array([b.shape.bounding_radius() for b in self.obstacles])
        self.radii = radius_a[self.ia] + radius_b[self.ib] if self.pairs else np.zeros(0)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, index: int) -> CollisionPair:
        return self.pairs[index]

    def evaluate(self, frames: Frames, out: np.ndarray, cutoff: float) -> None:
        """Fill closest-point data (pa, pb, d, n) for each pair; far pairs get d = inf"""
        if not self.pairs:
            return
        ta = [body_transform(b, frames) for b in self.robot_bodies]
        tb = [body_transform(b, frames) for b in self.obstacles]
        centers_a = np.array([t[:3, 3] for t in ta])
        centers_b = np.array([t[:3, 3] for t in tb])
        gaps = np.linalg.norm(centers_a[self.ia] - centers_b[self.ib], axis=1) - self.radii
        rows = out.reshape(len(self.pairs), PAIR_WIDTH)
        rows[:] = 0.0
        rows[:, 6] = np.inf
        for k in np.nonzero(gaps <= cutoff)[0]:
            pair = self.pairs[k]
            i, j = self.ia[k], self.ib[k]
            contact = closest_points(pair.robot_body.shape, ta[i], pair.obstacle.shape, tb[j])
            rows[k, 0:3] = contact.point_a
            rows[k, 3:6] = contact.point_b
            rows[k, 6] = contact.distance
            rows[k, 7:10] = contact.normal


@dataclass
class ControlProblem:
    """Compiled motion: task functions over a fixed observable layout"""
    spec: MotionGoalSpec
    model: KinematicModel
    layout: ObservableLayout
    tasks: list
    pairs: PairSet
    lower_position: np.ndarray
    upper_position: np.ndarray
    velocity_limits: np.ndarray
    config: ControlConfig
    initial_observables: np.ndarray

    def observe(self, q_all: np.ndarray) -> Tuple[np.ndarray, Frames]:
        """Observable vector and frames for the given positions of all DOFs"""
        o = self.initial_observables.copy()
        o[self.layout["joints"]] = q_all
        frames = self.model.frames(q_all)
        if len(self.pairs):
            self.pairs.evaluate(frames, o[self.layout["pairs"]], self.config.activation_distance)
        return o, frames


@dataclass
class Trajectory:
    """Controlled-DOF positions sampled at every control tick"""
    dof_names: List[str]
    times: np.ndarray
    positions: np.ndarray  # ticks x dofs

    def __len__(self) -> int:
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0

    def at(self, index: int) -> Dict[str, float]:
        return dict(zip(self.dof_names, (float(v) for v in self.positions[index])))

    def final(self) -> Dict[str, float]:
        return self.at(len(self.times) - 1)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.positions, columns=self.dof_names)
        df.insert(0, "time", self.times)
        df.insert(0, "tick", np.arange(len(self.times)))
        return df

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass
class MotionResult:
    """Outcome of executing a control problem"""
    trajectory: Trajectory
    converged: bool
    world: WorldState
    ticks: int
    min_distance: float
    reason: str = ""
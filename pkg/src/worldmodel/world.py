"""World state: robot, environment, objects, containers and named locations"""

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Tuple
import hashlib
import math

import numpy as np

from ..models.domain import FailureCategory, KinematicsError, PlanFailure, Pose
from ..utils.logger import logger
from .geometry import Shape, closest_points
from .kinematics import KinematicTree

# Default tolerance between the actual and the nominal object offset when attaching
GRASP_TOLERANCE = 0.05


@dataclass(frozen=True)
class ObjectType:
    """Kind of manipulable object, e.g. cup or cereal"""
    name: str
    shape: Shape
    mass: float = 0.2
    color: str = "white"

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"Object type {self.name} needs a positive mass, got {self.mass}")


@dataclass(frozen=True)
class SceneObject:
    """Manipulable object. ``pose`` is always the world pose; when attached,
    ``attach_offset`` is the object pose relative to the attachment link."""
    id: str
    object_type: str
    shape: Shape
    pose: Pose
    mass: float = 0.2
    color: str = "white"
    attachment: Optional[str] = None
    attach_offset: Optional[Pose] = None

    def __post_init__(self):
        if (self.attachment is None) != (self.attach_offset is None):
            raise ValueError(f"Object {self.id}: attachment and offset must be set together")


# Container kinds and the joint type that drives each
CONTAINER_KINDS = {"drawer": "prismatic", "door": "revolute", "dishwasher-door": "revolute"}


@dataclass(frozen=True)
class ArticulatedContainer:
    """Drawer, door or dishwasher door driven by one environment DOF"""
    id: str
    joint: str
    kind: str
    handle_link: str
    handle_offset: Pose
    open_position: float
    closed_position: float = 0.0
    state_tolerance: float = 0.03

    def __post_init__(self):
        if self.kind not in CONTAINER_KINDS:
            raise ValueError(f"Container {self.id} kind must be one of {sorted(CONTAINER_KINDS)}, got {self.kind}")
        if self.open_position == self.closed_position:
            raise ValueError(f"Container {self.id} open and closed positions coincide")

    def state(self, position: float) -> str:
        tol = self.state_tolerance * abs(self.open_position - self.closed_position)
        if abs(position - self.closed_position) <= tol:
            return "closed"
        if abs(position - self.open_position) <= tol:
            return "open"
        return "ajar"


@dataclass(frozen=True)
class Location:
    """Named region: a supporting surface or the inside of a container.

    The region frame sits at the center of the supporting plane, z up.
    """
    name: str
    kind: str
    link: str
    origin: Pose
    half_extents: Tuple[float, float]
    height: float = 0.0
    container: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("surface", "container"):
            raise ValueError(f"Location {self.name} kind must be surface or container, got {self.kind}")
        if min(self.half_extents) <= 0:
            raise ValueError(f"Location {self.name} needs a positive extent")


@dataclass
class ArmInfo:
    """Links and DOFs of one arm of the robot"""
    name: str
    tool_frame: str
    shoulder_link: str
    dofs: List[str]
    gripper_dof: str
    gripper_range: Tuple[float, float]
    arm_links: List[str]
    hand_links: List[str]
    finger_links: List[str]


@dataclass
class RobotModel:
    """Robot kinematic tree plus the semantic groups plans refer to"""
    name: str
    tree: KinematicTree
    arms: Dict[str, ArmInfo]
    base_link: str
    base_joint: str
    camera_frame: str
    torso_dofs: List[str]
    head_dofs: List[str]
    park: Dict[str, float] = field(default_factory=dict)

    @property
    def base_dofs(self) -> List[str]:
        return self.tree.joints[self.base_joint].dof_names


@dataclass
class EnvironmentModel:
    """Static environment tree with articulated containers and locations"""
    name: str
    tree: KinematicTree
    containers: Dict[str, ArticulatedContainer]
    locations: Dict[str, Location]
    object_types: Dict[str, ObjectType]
    footprint: Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass
class Body:
    """Posed collision shape with its owner, used by collision queries"""
    name: str
    owner: str  # robot, environment or object
    link: Optional[str]
    shape: Shape
    transform: np.ndarray
    local: np.ndarray  # shape pose relative to the link (identity for free objects)
    object_id: Optional[str] = None


class WorldState:
    """Snapshot of the simulated world.

    Mutating operations return a new state; the robot and environment
    models are shared between snapshots.
    """

    def __init__(
        self,
        robot: RobotModel,
        environment: EnvironmentModel,
        positions: Optional[Mapping[str, float]] = None,
        objects: Optional[Mapping[str, SceneObject]] = None,
        sim_time: float = 0.0
    ):
        self.robot = robot
        self.environment = environment
        overlap = set(robot.tree.dof_names) & set(environment.tree.dof_names)
        if overlap:
            raise KinematicsError(f"Robot and environment share DOF names {sorted(overlap)}")
        defaults = {}
        for tree in (robot.tree, environment.tree):
            for i, name in enumerate(tree.dof_names):
                defaults[name] = float(np.clip(0.0, tree.lower[i], tree.upper[i]))
        for name in (positions or {}):
            if name not in defaults:
                raise KinematicsError(f"Unknown DOF {name}")
        defaults.update({k: float(v) for k, v in (positions or {}).items()})
        self.positions: Dict[str, float] = defaults
        self.objects: Dict[str, SceneObject] = dict(objects or {})
        self.sim_time = float(sim_time)
        self._cache: Dict[str, object] = {}
        for tree in (robot.tree, environment.tree):
            q = self.tree_vector(tree)
            if not tree.within_limits(q, 1e-6):
                bad = [n for i, n in enumerate(tree.dof_names) if not tree.lower[i] - 1e-6 <= q[i] <= tree.upper[i] + 1e-6]
                raise ValueError(f"Joint positions outside limits: {bad}")

    # ------------------------------------------------------------------
    # Kinematics
    # ------------------------------------------------------------------

    @property
    def robot_tree(self) -> KinematicTree:
        return self.robot.tree

    @property
    def environment_tree(self) -> KinematicTree:
        return self.environment.tree

    def tree_vector(self, tree: KinematicTree) -> np.ndarray:
        key = "q:" + tree.name
        if key not in self._cache:
            self._cache[key] = tree.vector(self.positions)
        return self._cache[key]

    def tree_transforms(self, tree: KinematicTree) -> Dict[str, np.ndarray]:
        key = "T:" + tree.name
        if key not in self._cache:
            self._cache[key] = tree.link_transforms(self.tree_vector(tree))
        return self._cache[key]

    def tree_of(self, link: str) -> KinematicTree:
        if self.robot.tree.has_link(link):
            return self.robot.tree
        if self.environment.tree.has_link(link):
            return self.environment.tree
        raise KinematicsError(f"Unknown link {link}")

    def link_transform(self, link: str) -> np.ndarray:
        return self.tree_transforms(self.tree_of(link))[link]

    def forward_kinematics(self, link: str) -> Pose:
        return Pose.from_matrix(self.link_transform(link))

    def jacobian(self, link: str, point: Optional[np.ndarray] = None) -> np.ndarray:
        tree = self.tree_of(link)
        return tree.jacobian(self.tree_vector(tree), link, point, self.tree_transforms(tree))

    def base_pose(self) -> Tuple[float, float, float]:
        x, y, theta = (self.positions[n] for n in self.robot.base_dofs)
        return (x, y, theta)

    def with_positions(self, updates: Mapping[str, float], clip: bool = True) -> "WorldState":
        """New state with DOF positions changed; attached objects follow their links"""
        positions = dict(self.positions)
        for name, value in updates.items():
            if name not in positions:
                raise KinematicsError(f"Unknown DOF {name}")
            value = float(value)
            if clip:
                tree = self.robot.tree if name in self.robot.tree.dof_names else self.environment.tree
                i = tree.dof_index(name)
                value = float(np.clip(value, tree.lower[i], tree.upper[i]))
            positions[name] = value
        new = WorldState(self.robot, self.environment, positions, self.objects, self.sim_time)
        moved = {}
        for obj in self.objects.values():
            if obj.attachment is not None:
                pose = Pose.from_matrix(new.link_transform(obj.attachment) @ obj.attach_offset.matrix())
                moved[obj.id] = replace(obj, pose=pose)
        new.objects.update(moved)
        return new

    def with_time(self, sim_time: float) -> "WorldState":
        new = WorldState(self.robot, self.environment, self.positions, self.objects, sim_time)
        new._cache = self._cache
        return new

    # ------------------------------------------------------------------
    # Objects
    # ------------------------------------------------------------------

    def object(self, object_id: str) -> SceneObject:
        try:
            return self.objects[object_id]
        except KeyError:
            raise KeyError(f"Unknown object {object_id}") from None

    def with_object(self, obj: SceneObject) -> "WorldState":
        objects = dict(self.objects)
        objects[obj.id] = obj
        new = WorldState(self.robot, self.environment, self.positions, objects, self.sim_time)
        new._cache = {k: v for k, v in self._cache.items() if k.startswith(("q:", "T:"))}
        return new

    def with_object_pose(self, object_id: str, pose: Pose) -> "WorldState":
        obj = self.object(object_id)
        if obj.attachment is not None:
            offset = Pose.from_matrix(np.linalg.inv(self.link_transform(obj.attachment)) @ pose.matrix())
            return self.with_object(replace(obj, pose=pose, attach_offset=offset))
        return self.with_object(replace(obj, pose=pose))

    def attach(
        self,
        object_id: str,
        link: str,
        nominal_offset: Optional[Pose] = None,
        tolerance: float = GRASP_TOLERANCE
    ) -> "WorldState":
        """Rigidly attach an object to a link.

        Args:
            object_id: Object to attach
            link: Robot or environment link
            nominal_offset: Expected object pose in the link frame (identity if None)
            tolerance: Allowed distance between actual and nominal offset

        Returns:
            New world state with the attachment recorded
        """
        obj = self.object(object_id)
        link_t = self.link_transform(link)
        offset = np.linalg.inv(link_t) @ obj.pose.matrix()
        expected = np.zeros(3) if nominal_offset is None else nominal_offset.translation
        error = float(np.linalg.norm(offset[:3, 3] - expected))
        if error > tolerance:
            raise PlanFailure(
                FailureCategory.GRASP,
                f"{object_id} is {error:.3f} m from the grasp point of {link}",
            )
        logger.debug(f"Attached {object_id} to {link} (offset error {error:.4f} m)")
        return self.with_object(replace(obj, attachment=link, attach_offset=Pose.from_matrix(offset)))

    def detach(self, object_id: str) -> "WorldState":
        obj = self.object(object_id)
        if obj.attachment is None:
            raise ValueError(f"Object {object_id} is not attached")
        return self.with_object(replace(obj, attachment=None, attach_offset=None))

    def attached_to_robot(self, object_id: str) -> bool:
        link = self.object(object_id).attachment
        return link is not None and self.robot.tree.has_link(link)

    # ------------------------------------------------------------------
    # Containers and locations
    # ------------------------------------------------------------------

    def container(self, container_id: str) -> ArticulatedContainer:
        try:
            return self.environment.containers[container_id]
        except KeyError:
            raise KeyError(f"Unknown container {container_id}") from None

    def container_position(self, container_id: str) -> float:
        return self.positions[self.container(container_id).joint]

    def container_state(self, container_id: str) -> str:
        container = self.container(container_id)
        return container.state(self.positions[container.joint])

    def handle_transform(self, container_id: str) -> np.ndarray:
        container = self.container(container_id)
        return self.link_transform(container.handle_link) @ container.handle_offset.matrix()

    def location(self, name: str) -> Location:
        try:
            return self.environment.locations[name]
        except KeyError:
            raise KeyError(f"Unknown location {name}") from None

    def location_transform(self, name: str) -> np.ndarray:
        loc = self.location(name)
        return self.link_transform(loc.link) @ loc.origin.matrix()

    def location_contains(self, name: str, point: np.ndarray, margin: float = 0.0) -> bool:
        """Whether a world point lies over the region (and inside it for containers)"""
        loc = self.location(name)
        local = np.linalg.inv(self.location_transform(name)) @ np.append(point, 1.0)
        hx, hy = loc.half_extents
        inside = abs(local[0]) <= hx + margin and abs(local[1]) <= hy + margin
        if loc.kind == "container":
            inside = inside and -margin <= local[2] <= loc.height + margin
        return bool(inside)

    # ------------------------------------------------------------------
    # Collision bodies
    # ------------------------------------------------------------------

    def link_bodies(self, tree: KinematicTree, owner: str, links: Optional[Iterable[str]] = None) -> List[Body]:
        transforms = self.tree_transforms(tree)
        bodies = []
        for name in (links if links is not None else tree.links):
            for i, (shape, local) in enumerate(tree.links[name].shapes):
                local_m = local.matrix()
                bodies.append(Body(f"{name}#{i}", owner, name, shape, transforms[name] @ local_m, local_m))
        return bodies

    def environment_bodies(self) -> List[Body]:
        key = "bodies:environment"
        if key not in self._cache:
            self._cache[key] = self.link_bodies(self.environment.tree, "environment")
        return self._cache[key]

    def robot_bodies(self, include_attached: bool = True) -> List[Body]:
        bodies = self.link_bodies(self.robot.tree, "robot")
        if include_attached:
            for obj in self.objects.values():
                if obj.attachment is not None and self.robot.tree.has_link(obj.attachment):
                    bodies.append(Body(
                        obj.id, "robot", obj.attachment, obj.shape,
                        obj.pose.matrix(), obj.attach_offset.matrix(), obj.id,
                    ))
        return bodies

    def object_bodies(self, exclude: Iterable[str] = ()) -> List[Body]:
        """Objects not held by the robot"""
        skip = set(exclude)
        bodies = []
        for obj in self.objects.values():
            if obj.id in skip:
                continue
            if obj.attachment is not None and self.robot.tree.has_link(obj.attachment):
                continue
            local = np.eye(4)
            if obj.attachment is not None:
                local = obj.attach_offset.matrix()
            bodies.append(Body(obj.id, "object", obj.attachment, obj.shape, obj.pose.matrix(), local, obj.id))
        return bodies

    # ------------------------------------------------------------------
    # Integrity
    # ------------------------------------------------------------------

    def clone(self) -> "WorldState":
        """Independent snapshot with the same positions, objects and time"""
        return WorldState(self.robot, self.environment, self.positions, self.objects, self.sim_time)

    def state_hash(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.positions):
            digest.update(f"{name}={self.positions[name]:.12e};".encode())
        for object_id in sorted(self.objects):
            obj = self.objects[object_id]
            values = np.concatenate([obj.pose.translation, obj.pose.rotation])
            digest.update(f"{object_id}:{obj.attachment}:{np.round(values, 12).tolist()};".encode())
        return digest.hexdigest()

    def audit(self, penetration_tolerance: float = 0.005) -> List[str]:
        """Check world invariants; returns a list of violations (empty when sound)"""
        problems = []
        for tree in (self.robot.tree, self.environment.tree):
            q = self.tree_vector(tree)
            if not tree.within_limits(q, 1e-6):
                problems.append(f"{tree.name} joint positions outside limits")
        for obj in self.objects.values():
            if obj.attachment is None:
                continue
            expected = self.link_transform(obj.attachment) @ obj.attach_offset.matrix()
            if not np.allclose(expected, obj.pose.matrix(), atol=1e-6):
                problems.append(f"{obj.id} drifted from its attachment {obj.attachment}")
        free = [o for o in self.objects.values() if o.attachment is None]
        for i, a in enumerate(free):
            for b in free[i + 1:]:
                if np.linalg.norm(a.pose.translation - b.pose.translation) > a.shape.bounding_radius() + b.shape.bounding_radius():
                    continue
                contact = closest_points(a.shape, a.pose, b.shape, b.pose)
                if contact.distance < -penetration_tolerance:
                    problems.append(f"{a.id} penetrates {b.id} by {-contact.distance:.4f} m")
        return problems


class WorldAuditor:
    """Checks world invariants after mutations"""

    def __init__(self, penetration_tolerance: float = 0.005):
        self.penetration_tolerance = penetration_tolerance

    def check(self, world: WorldState) -> List[str]:
        problems = world.audit(self.penetration_tolerance)
        for problem in problems:
            logger.warning(f"World audit: {problem}")
        return problems


def forward_kinematics(world: WorldState, link: str) -> Pose:
    """World pose of a link"""
    return world.forward_kinematics(link)


def jacobian(world: WorldState, link: str, point: Optional[np.ndarray] = None) -> np.ndarray:
    """6 x n Jacobian of a point attached to a link, over the DOFs of the link's tree"""
    return world.jacobian(link, point)


def attach(world: WorldState, object_id: str, link: str, **kwargs) -> WorldState:
    return world.attach(object_id, link, **kwargs)


def detach(world: WorldState, object_id: str) -> WorldState:
    return world.detach(object_id)


def yaw_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

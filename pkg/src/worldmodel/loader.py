"""Load robot and environment descriptions (format tag ``kinematic-scene/1``)"""

from pathlib import Path
from typing import Any, Dict, List, Tuple, Union
import math

import yaml

from ..models.domain import ConfigError, KinematicsError, Pose
from ..utils.logger import logger
from .geometry import Shape
from .kinematics import Joint, KinematicTree, Link
from .world import (
    ArmInfo,
    ArticulatedContainer,
    CONTAINER_KINDS,
    EnvironmentModel,
    Location,
    ObjectType,
    RobotModel,
    WorldState,
)

FORMAT_TAG = "kinematic-scene/1"


def _read(path: Union[str, Path], kind: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Description file not found: {path}")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    if data.get("format") != FORMAT_TAG:
        raise ConfigError(f"{path}: unsupported format tag {data.get('format')!r}, expected {FORMAT_TAG}")
    if data.get("kind") != kind:
        raise ConfigError(f"{path}: expected a {kind} description, got {data.get('kind')!r}")
    return data


def parse_pose(data: Dict[str, Any]) -> Pose:
    if not data:
        return Pose.identity()
    return Pose.from_xyz_rpy(data.get("xyz", (0.0, 0.0, 0.0)), data.get("rpy", (0.0, 0.0, 0.0)))


def parse_shape(data: Dict[str, Any]) -> Shape:
    kind = data.get("type")
    try:
        if kind == "sphere":
            return Shape.sphere(float(data["radius"]))
        if kind == "capsule":
            return Shape.capsule(float(data["radius"]), float(data["half_length"]))
        if kind == "box":
            return Shape.box(*[float(v) for v in data["half_extents"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Malformed {kind} shape {data}: {exc}") from exc
    raise ConfigError(f"Unknown shape type {kind!r}")


def _parse_tree(name: str, data: Dict[str, Any]) -> KinematicTree:
    links = []
    for entry in data.get("links", []):
        shapes = [(parse_shape(s), parse_pose(s.get("origin", {}))) for s in entry.get("shapes", [])]
        links.append(Link(entry["name"], shapes))
    joints = []
    for entry in data.get("joints", []):
        limits = entry.get("limits", (-math.inf, math.inf))
        try:
            joints.append(Joint(
                name=entry["name"],
                type=entry.get("type", "fixed"),
                parent=entry["parent"],
                child=entry["child"],
                origin=parse_pose(entry.get("origin", {})),
                axis=entry.get("axis", (0.0, 0.0, 1.0)),
                lower=float(limits[0]),
                upper=float(limits[1]),
                velocity_limit=float(entry.get("velocity", 1.0)),
            ))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"Malformed joint {entry.get('name')}: {exc}") from exc
    try:
        return KinematicTree(name, links, joints)
    except KinematicsError as exc:
        raise ConfigError(str(exc)) from exc


def load_robot(path: Union[str, Path]) -> RobotModel:
    """Parse a robot description into a RobotModel"""
    data = _read(path, "robot")
    tree = _parse_tree(data["name"], data)
    meta = data.get("robot", {})
    arms = {}
    for arm_name, arm in meta.get("arms", {}).items():
        arms[arm_name] = ArmInfo(
            name=arm_name,
            tool_frame=arm["tool_frame"],
            shoulder_link=arm["shoulder_link"],
            dofs=list(arm["dofs"]),
            gripper_dof=arm["gripper"],
            gripper_range=tuple(arm.get("gripper_range", (0.0, 0.1))),
            arm_links=list(arm.get("links", [])),
            hand_links=list(arm.get("hand", [])),
            finger_links=list(arm.get("fingers", [])),
        )
    robot = RobotModel(
        name=data["name"],
        tree=tree,
        arms=arms,
        base_link=meta["base_link"],
        base_joint=meta["base_joint"],
        camera_frame=meta["camera_frame"],
        torso_dofs=list(meta.get("torso", [])),
        head_dofs=list(meta.get("head", [])),
        park={k: float(v) for k, v in meta.get("park", {}).items()},
    )
    _check_robot(robot)
    logger.info(f"Loaded robot {robot.name} with {tree.dof_count} DOFs")
    return robot


def _check_robot(robot: RobotModel) -> None:
    tree = robot.tree
    links = [robot.base_link, robot.camera_frame]
    dofs = robot.torso_dofs + robot.head_dofs + list(robot.park)
    for arm in robot.arms.values():
        links += [arm.tool_frame, arm.shoulder_link] + arm.arm_links + arm.hand_links + arm.finger_links
        dofs += arm.dofs + [arm.gripper_dof]
    for link in links:
        if not tree.has_link(link):
            raise ConfigError(f"Robot {robot.name} refers to unknown link {link}")
    for dof in dofs:
        if dof not in tree.dof_names:
            raise ConfigError(f"Robot {robot.name} refers to unknown DOF {dof}")
    if robot.base_joint not in tree.joints:
        raise ConfigError(f"Robot {robot.name} has no base joint {robot.base_joint}")


def load_environment(path: Union[str, Path]) -> EnvironmentModel:
    """Parse an environment description into an EnvironmentModel"""
    data = _read(path, "environment")
    tree = _parse_tree(data["name"], data)
    containers = {}
    for entry in data.get("containers", []):
        container = ArticulatedContainer(
            id=entry["id"],
            joint=entry["joint"],
            kind=entry["kind"],
            handle_link=entry["handle_link"],
            handle_offset=parse_pose(entry.get("handle", {})),
            open_position=float(entry["open"]),
            closed_position=float(entry.get("closed", 0.0)),
        )
        if container.joint not in tree.joints:
            raise ConfigError(f"Container {container.id} refers to unknown joint {container.joint}")
        joint = tree.joints[container.joint]
        if joint.type.value != CONTAINER_KINDS[container.kind]:
            raise ConfigError(f"Container {container.id}: a {container.kind} needs a {CONTAINER_KINDS[container.kind]} joint, got {joint.type.value}")
        for position in (container.open_position, container.closed_position):
            if not joint.lower <= position <= joint.upper:
                raise ConfigError(f"Container {container.id}: position {position} outside the limits of {joint.name}")
        containers[container.id] = container
    locations = {}
    for entry in data.get("locations", []):
        location = Location(
            name=entry["name"],
            kind=entry["kind"],
            link=entry["link"],
            origin=parse_pose(entry.get("origin", {})),
            half_extents=tuple(entry["half_extents"]),
            height=float(entry.get("height", 0.0)),
            container=entry.get("container"),
        )
        if not tree.has_link(location.link):
            raise ConfigError(f"Location {location.name} refers to unknown link {location.link}")
        if location.container is not None and location.container not in containers:
            raise ConfigError(f"Location {location.name} refers to unknown container {location.container}")
        locations[location.name] = location
    object_types = {}
    for type_name, entry in data.get("object_types", {}).items():
        object_types[type_name] = ObjectType(
            name=type_name,
            shape=parse_shape(entry["shape"]),
            mass=float(entry.get("mass", 0.2)),
            color=entry.get("color", "white"),
        )
    footprint_data = data.get("footprint", {"x": (-5.0, 5.0), "y": (-5.0, 5.0)})
    footprint: Tuple[Tuple[float, float], Tuple[float, float]] = (
        tuple(footprint_data["x"]), tuple(footprint_data["y"])
    )
    env = EnvironmentModel(data["name"], tree, containers, locations, object_types, footprint)
    logger.info(
        f"Loaded environment {env.name}: {len(tree.links)} links, "
        f"{len(containers)} containers, {len(locations)} locations"
    )
    return env


def load_scene(robot_path: Union[str, Path], environment_path: Union[str, Path]) -> WorldState:
    """Build an initial world (no objects) from robot and environment files.

    Robot joints start at the park configuration, containers closed.
    """
    robot = load_robot(robot_path)
    env = load_environment(environment_path)
    positions: Dict[str, float] = dict(robot.park)
    for container in env.containers.values():
        positions[container.joint] = container.closed_position
    return WorldState(robot, env, positions)


def group_links(robot: RobotModel, group: str, arms: List[str]) -> List[str]:
    """Link names of a semantic group (arm, hand, fingers) for the given arms"""
    names: List[str] = []
    for arm in arms:
        info = robot.arms[arm]
        if group == "arm":
            names += info.arm_links + info.hand_links + info.finger_links
        elif group == "hand":
            names += info.hand_links + info.finger_links
        elif group == "fingers":
            names += info.finger_links
        else:
            raise ValueError(f"Unknown link group {group}")
    return names

"""Heuristic parameter inference: lazy, seeded streams of candidate bindings"""

from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, List, Optional, Protocol, Tuple, runtime_checkable
import itertools
import math
import zlib

import numpy as np

from ..models.designator import Designator
from ..models.domain import ConfigError, Pose
from ..utils.logger import logger
from ..worldmodel.geometry import ShapeKind
from ..worldmodel.world import WorldState
from .distributions import PoseDistribution
from .grasps import GraspCatalog, GraspSpec, grasp_poses, load_reasoner_config
from .heuristics import HeuristicConfig, LocationGrounder, target_point

PARAMETERS = (
    "arm",
    "grasp",
    "base-pose",
    "gripper-opening",
    "grasping-force",
    "trajectory-via-points",
    "placement-pose",
)

# Release height of a placed object above its support
PLACEMENT_GAP = 0.005

APPLICABLE = {
    "picking-up": {"arm", "grasp", "base-pose", "gripper-opening", "grasping-force", "trajectory-via-points"},
    "placing": {"arm", "base-pose", "placement-pose", "trajectory-via-points"},
    "opening": {"arm", "base-pose", "grasp"},
    "closing": {"arm", "base-pose", "grasp"},
    "perceiving": {"base-pose"},
    "navigating": {"base-pose"},
}


@dataclass(frozen=True)
class ParameterQuery:
    """Request for candidates of one missing action parameter.

    ``context`` carries the designators the answer depends on (``object``,
    ``location``, ``target``, ``container``, ``grasp``, ``base-pose``), the
    episodic ``task-key`` and the stream ``seed``.
    """
    action_type: str
    parameter: str
    context: Dict[str, Any]
    world: WorldState

    def __post_init__(self):
        """Check the parameter applies to the action type"""
        if self.parameter not in PARAMETERS:
            raise ValueError(f"Unknown parameter {self.parameter}")
        if self.action_type not in APPLICABLE:
            raise ValueError(f"Unknown action type {self.action_type}")
        if self.parameter not in APPLICABLE[self.action_type]:
            raise ValueError(f"{self.parameter} is not a parameter of {self.action_type}")


@runtime_checkable
class ParameterReasoner(Protocol):
    """What the plan executive asks for missing parameters"""

    def ground_location(self, location: Designator, world: WorldState) -> PoseDistribution:
        ...

    def infer(self, query: ParameterQuery) -> Iterator[Any]:
        ...


@dataclass
class StreamConfig:
    """Caps of the candidate streams"""
    base_pose_samples: int = 12
    arms: int = 2
    grasps: int = 3
    seed: int = 0

    def __post_init__(self):
        if min(self.base_pose_samples, self.arms, self.grasps) <= 0:
            raise ValueError("Stream caps must be positive")


def stream_seed(seed: int, key: str) -> np.random.Generator:
    """Generator seeded by the run seed and a stable digest of the stream key"""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(key.encode())])


def object_width(world: WorldState, object_type: str) -> float:
    """Narrowest horizontal width of an object type in its upright pose"""
    shape = world.environment.object_types[object_type].shape
    if shape.kind in (ShapeKind.SPHERE, ShapeKind.CAPSULE):
        return 2.0 * shape.radius
    return 2.0 * float(min(shape.half_extents[0], shape.half_extents[1]))


def shoulder_position(world: WorldState, arm: str, base_pose: Optional[Tuple[float, float, float]] = None) -> np.ndarray:
    """World position of an arm's shoulder pan axis, optionally for another base pose"""
    robot = world.robot
    pan_link = robot.tree.joints[robot.arms[arm].dofs[0]].child
    if base_pose is None:
        return world.link_transform(pan_link)[:3, 3].copy()
    current = Pose.from_xy_theta(*world.base_pose()).matrix()
    target = Pose.from_xy_theta(*base_pose).matrix()
    point = np.append(world.link_transform(pan_link)[:3, 3], 1.0)
    return (target @ np.linalg.inv(current) @ point)[:3]


class HeuristicReasoner:
    """Brute-force parameter search: uniform location heuristics and a fixed grasp catalog.

    Args:
        catalog: Grasps per object type
        heuristics: Location heuristic constants
        streams: Stream caps and the run seed
    """

    def __init__(
        self,
        catalog: GraspCatalog,
        heuristics: Optional[HeuristicConfig] = None,
        streams: Optional[StreamConfig] = None
    ):
        self.catalog = catalog
        self.grounder = LocationGrounder(heuristics)
        self.streams = streams or StreamConfig()
        logger.info(f"HeuristicReasoner initialized ({len(catalog)} grasps)")

    @property
    def mode(self) -> str:
        return "heuristic"

    def ground_location(self, location: Designator, world: WorldState) -> PoseDistribution:
        return self.grounder.ground(location, world)

    def infer(self, query: ParameterQuery) -> Iterator[Any]:
        """Lazy, finite, deterministic stream of candidates for the missing parameter"""
        handler = getattr(self, "_infer_" + query.parameter.replace("-", "_"))
        return iter(handler(query))

    # ------------------------------------------------------------------
    # Streams
    # ------------------------------------------------------------------

    def _seed(self, query: ParameterQuery) -> int:
        return int(query.context.get("seed", self.streams.seed))

    def _infer_arm(self, query: ParameterQuery) -> List[str]:
        world = query.world
        robot = world.robot
        busy = {
            arm for arm, info in robot.arms.items()
            for obj in world.objects.values()
            if obj.attachment is not None and obj.attachment in {info.tool_frame, *info.hand_links, *info.finger_links}
        }
        free = sorted(a for a in robot.arms if a not in busy)
        target = query.context.get("object") or query.context.get("container") or query.context.get("target")
        if target is None or not free:
            return free[: self.streams.arms]
        try:
            point = target_point(target, world)
        except ValueError:
            return free[: self.streams.arms]
        base = query.context.get("base-pose") or world.base_pose()
        if isinstance(base, Pose):
            base = base.xy_theta()
        x, y, theta = base
        lateral = -math.sin(theta) * (point[0] - x) + math.cos(theta) * (point[1] - y)
        # left arm first for targets on the robot's left
        order = sorted(free, key=lambda a: (0 if (a == "left") == (lateral >= 0) else 1, a))
        return order[: self.streams.arms]

    def _grasp_type(self, query: ParameterQuery) -> str:
        if query.action_type in ("opening", "closing"):
            return "handle"
        obj = query.context.get("object")
        if not isinstance(obj, Designator) or "type" not in obj:
            raise ValueError(f"{query.action_type} grasp query needs an object designator with a type")
        return obj["type"]

    def grasp_order(self, query: ParameterQuery) -> List[GraspSpec]:
        return self.catalog.for_type(self._grasp_type(query))

    def _infer_grasp(self, query: ParameterQuery) -> List[str]:
        return [g.id for g in self.grasp_order(query)][: self.streams.grasps]

    def base_pose_distribution(self, query: ParameterQuery) -> PoseDistribution:
        location = query.context.get("location")
        if not isinstance(location, Designator):
            raise ValueError(f"base-pose query for {query.action_type} needs a location designator")
        return self.ground_location(location, query.world)

    def _infer_base_pose(self, query: ParameterQuery) -> Iterator[Tuple[float, float, float]]:
        dist = self.base_pose_distribution(query)
        key = f"{query.context.get('task-key', query.action_type)}:base-pose"
        rng = stream_seed(self._seed(query), key)
        yield from dist.sample(rng, self.streams.base_pose_samples, replace=False)

    def _infer_gripper_opening(self, query: ParameterQuery) -> List[float]:
        if "width" in query.context:
            width = float(query.context["width"])
        else:
            width = object_width(query.world, self._grasp_type(query))
        return [self.catalog.opening(width)]

    def _infer_grasping_force(self, query: ParameterQuery) -> List[float]:
        grasp_id = query.context.get("grasp")
        if grasp_id is not None:
            return [self.catalog.get(grasp_id).grasping_force]
        return [g.grasping_force for g in self.grasp_order(query)][:1] or [30.0]

    def _infer_trajectory_via_points(self, query: ParameterQuery) -> List[Tuple[Pose, Pose, Pose]]:
        ctx = query.context
        obj = ctx.get("object")
        if not isinstance(obj, Designator) or "pose" not in obj or "grasp" not in ctx or "arm" not in ctx:
            raise ValueError("trajectory-via-points needs an object pose, a grasp and an arm")
        spec = self.catalog.get(ctx["grasp"])
        shape = query.world.environment.object_types[obj["type"]].shape
        shoulder = shoulder_position(query.world, ctx["arm"], ctx.get("base-pose"))
        poses = grasp_poses(spec, obj["pose"], shape, shoulder)
        return [(poses.pregrasp, poses.grasp, poses.lift)]

    def _infer_placement_pose(self, query: ParameterQuery) -> Iterator[Pose]:
        ctx = query.context
        target = ctx.get("target")
        if not isinstance(target, Designator):
            raise ValueError("placement-pose needs a target location designator")
        world = query.world
        region = target.get("on") or target.get("in")
        obj = ctx.get("object")
        height = 0.0
        if isinstance(obj, Designator) and obj.get("name") in world.objects:
            held = world.objects[obj["name"]]
            rot = held.pose.rotation_matrix()
            height = float(np.abs(rot[2]) @ held.shape.local_extents())
        surface = float(world.location_transform(region)[2, 3])
        if "pose" in target:
            # a requested spot fixes x and y; the height follows from the held object
            x, y = target["pose"].translation[:2]
            yield Pose.from_xyz_rpy([x, y, surface + height + PLACEMENT_GAP])
            return
        dist = self.ground_location(target.without("pose").extend({"for": obj}), world)
        key = f"{ctx.get('task-key', 'placing')}:placement"
        rng = stream_seed(self._seed(query), key)
        for x, y, _ in dist.sample(rng, self.streams.base_pose_samples, replace=False):
            yield Pose.from_xyz_rpy([x, y, surface + height + PLACEMENT_GAP])


# ----------------------------------------------------------------------
# Joint streams
# ----------------------------------------------------------------------

def mobile_pick_bindings(
    reasoner: ParameterReasoner,
    action_type: str,
    context: Dict[str, Any],
    world: WorldState
) -> Iterator[Dict[str, Any]]:
    """Product of base-pose, arm and grasp streams for a mobile manipulation action.

    Base poses vary slowest; arms are ordered by laterality per base pose.
    Parameters already bound in ``context`` are not inferred.
    """
    if "base-pose" in context:
        bases: Iterable[Any] = [context["base-pose"]]
    else:
        bases = reasoner.infer(ParameterQuery(action_type, "base-pose", context, world))
    if "grasp" in context:
        grasps: List[Optional[str]] = [context["grasp"]]
    elif "grasp" in APPLICABLE[action_type] and action_type not in ("opening", "closing"):
        grasps = list(reasoner.infer(ParameterQuery(action_type, "grasp", context, world)))
    else:
        grasps = [None]
    for base in bases:
        if "arm" in context:
            arms = [context["arm"]]
        else:
            arms = list(reasoner.infer(ParameterQuery(action_type, "arm", {**context, "base-pose": base}, world)))
        for arm, grasp in itertools.product(arms, grasps):
            yield {"base-pose": tuple(base), "arm": arm, "grasp": grasp}


TIERS = ("grasp", "arm", "base-pose")


def tiered(bindings: Iterable[Dict[str, Any]], caps: Dict[str, int]) -> Iterator[Dict[str, Any]]:
    """Limit a binding stream by per-parameter retry budgets.

    Moving to the next binding spends one retry from the slowest-varying
    tier whose value changes; the stream ends when that tier is exhausted.
    """
    spent = {tier: 0 for tier in TIERS}
    previous: Optional[Dict[str, Any]] = None
    for binding in bindings:
        if previous is not None:
            changed = [t for t in reversed(TIERS) if binding.get(t) != previous.get(t)]
            tier = changed[0] if changed else "grasp"
            if spent[tier] >= caps.get(tier, 0):
                if tier == "base-pose":
                    return
                continue
            spent[tier] += 1
        previous = binding
        yield binding


def load_heuristic_reasoner(path: Any, seed: int = 0) -> HeuristicReasoner:
    """Build a HeuristicReasoner from a reasoner configuration file

    Raises:
        ConfigError: malformed heuristic or stream section
    """
    catalog, data = load_reasoner_config(path)
    try:
        heuristics = HeuristicConfig(**data.get("heuristics", {}))
        streams = StreamConfig(**{**data.get("streams", {}), "seed": seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Malformed reasoner configuration {path}: {exc}") from exc
    return HeuristicReasoner(catalog, heuristics, streams)

"""First-order goal formulas over the belief state"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union
import math

import numpy as np

from ..models.designator import Designator
from ..models.domain import FormulaError, Pose, wrap_angle
from ..worldmodel.geometry import world_aabb
from ..worldmodel.world import WorldState

# Support tolerances of object-at on a surface
SURFACE_GAP = 0.02
REGION_MARGIN = 0.01
# robot-at tolerances against a base pose
ROBOT_AT_DISTANCE = 0.05
ROBOT_AT_ANGLE = 0.1
# looking-at: angle between the optical axis and the target direction
LOOKING_AT_ANGLE = 0.15


@dataclass(frozen=True)
class Var:
    """Term bound by the enclosing action designator, e.g. ``Var("object")``"""
    name: str


Term = Union[Var, str, Designator, Pose, Tuple[float, ...]]


class Formula:
    """Base class of goal formulas"""

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        raise NotImplementedError

    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))

    def __invert__(self) -> "Formula":
        return Not(self)


@dataclass(frozen=True)
class Atom(Formula):
    predicate: str
    args: Tuple[Any, ...]

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        try:
            evaluator = PREDICATES[self.predicate]
        except KeyError:
            raise FormulaError(f"Unknown predicate {self.predicate}") from None
        values = [_resolve(arg, bindings) for arg in self.args]
        return evaluator(world, *values)

    def __repr__(self) -> str:
        return f"{self.predicate}({', '.join(map(_label, self.args))})"


@dataclass(frozen=True)
class And(Formula):
    parts: Tuple[Formula, ...]

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        return all(p.evaluate(world, bindings) for p in self.parts)


@dataclass(frozen=True)
class Or(Formula):
    parts: Tuple[Formula, ...]

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        return any(p.evaluate(world, bindings) for p in self.parts)


@dataclass(frozen=True)
class Not(Formula):
    part: Formula

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        return not self.part.evaluate(world, bindings)


@dataclass(frozen=True)
class Exists(Formula):
    """Some scene object of ``object_type`` bound to ``var`` satisfies ``body``"""
    var: str
    object_type: str
    body: Formula

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        for object_id in sorted(world.objects):
            if world.objects[object_id].object_type != self.object_type:
                continue
            if self.body.evaluate(world, {**bindings, self.var: object_id}):
                return True
        return False


@dataclass(frozen=True)
class ForAll(Formula):
    var: str
    object_type: str
    body: Formula

    def evaluate(self, world: WorldState, bindings: Mapping[str, Any]) -> bool:
        for object_id in sorted(world.objects):
            if world.objects[object_id].object_type != self.object_type:
                continue
            if not self.body.evaluate(world, {**bindings, self.var: object_id}):
                return False
        return True


def and_(*parts: Formula) -> Formula:
    return And(tuple(parts))


def or_(*parts: Formula) -> Formula:
    return Or(tuple(parts))


def not_(part: Formula) -> Formula:
    return Not(part)


def object_in_hand(obj: Term, arm: Optional[Term] = None) -> Atom:
    return Atom("object-in-hand", (obj,) if arm is None else (obj, arm))


def object_at(obj: Term, location: Term) -> Atom:
    return Atom("object-at", (obj, location))


def container_state(container: Term, state: str) -> Atom:
    if state not in ("open", "closed"):
        raise ValueError(f"Container state must be open or closed, got {state}")
    return Atom("container-state", (container, state))


def looking_at(target: Term) -> Atom:
    return Atom("looking-at", (target,))


def robot_at(location: Term) -> Atom:
    return Atom("robot-at", (location,))


def holds(goal: Formula, world: WorldState, bindings: Optional[Union[Designator, Mapping[str, Any]]] = None) -> bool:
    """Evaluate a goal formula against a world state.

    Args:
        goal: Formula to check
        world: Belief state
        bindings: Action designator (or mapping) binding the formula's variables

    Raises:
        FormulaError: unbound variable, unknown predicate or unresolvable term
    """
    if isinstance(bindings, Designator):
        bindings = dict(bindings.properties)
    return goal.evaluate(world, bindings or {})


# ---------------------------------------------------------------------------
# Term resolution
# ---------------------------------------------------------------------------

def _label(arg: Any) -> str:
    if isinstance(arg, Var):
        return f"?{arg.name}"
    if isinstance(arg, Designator):
        return arg.describe()
    return str(arg)


def _resolve(arg: Any, bindings: Mapping[str, Any]) -> Any:
    if isinstance(arg, Var):
        key = arg.name.replace("_", "-")
        if key not in bindings or bindings[key] is None:
            raise FormulaError(f"Unbound variable ?{arg.name}")
        return bindings[key]
    return arg


def _object_id(term: Any, world: WorldState) -> str:
    if isinstance(term, Designator):
        name = term.get("name")
        if name is None:
            raise FormulaError(f"Object designator {term.describe()} is not resolved to an object")
        term = name
    if not isinstance(term, str):
        raise FormulaError(f"Cannot interpret {term!r} as an object")
    if term not in world.objects:
        raise FormulaError(f"Unknown object {term}")
    return term


def _location_name(term: Any, world: WorldState) -> str:
    if isinstance(term, Designator):
        for key in ("on", "in", "name"):
            value = term.get(key)
            if value is not None:
                term = value.get("name") if isinstance(value, Designator) else value
                break
        else:
            raise FormulaError(f"Location designator {term.describe()} names no region")
    if not isinstance(term, str) or term not in world.environment.locations:
        raise FormulaError(f"Unknown location {term!r}")
    return term


def _target_point(term: Any, world: WorldState) -> np.ndarray:
    if isinstance(term, Pose):
        return term.translation
    if isinstance(term, Designator):
        if "pose" in term:
            return term["pose"].translation
        if "name" in term and term["name"] in world.objects:
            return world.objects[term["name"]].pose.translation
        return world.location_transform(_location_name(term, world))[:3, 3]
    if isinstance(term, str):
        if term in world.objects:
            return world.objects[term].pose.translation
        if term in world.environment.locations:
            return world.location_transform(term)[:3, 3]
        if world.environment.tree.has_link(term) or world.robot.tree.has_link(term):
            return world.link_transform(term)[:3, 3]
    if isinstance(term, (tuple, list, np.ndarray)) and len(term) == 3:
        return np.asarray(term, dtype=float)
    raise FormulaError(f"Cannot interpret {term!r} as a target")


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------

def _object_in_hand(world: WorldState, obj: Any, arm: Any = None) -> bool:
    object_id = _object_id(obj, world)
    link = world.objects[object_id].attachment
    if link is None or not world.robot.tree.has_link(link):
        return False
    if arm is None:
        return True
    if arm not in world.robot.arms:
        raise FormulaError(f"Unknown arm {arm}")
    info = world.robot.arms[arm]
    return link in {info.tool_frame, *info.hand_links, *info.finger_links}


def _object_at(world: WorldState, obj: Any, location: Any) -> bool:
    object_id = _object_id(obj, world)
    name = _location_name(location, world)
    item = world.objects[object_id]
    if world.attached_to_robot(object_id):
        return False
    center = item.pose.translation
    if not world.location_contains(name, center, REGION_MARGIN):
        return False
    region = world.location(name)
    if region.kind == "container":
        return True
    low, _ = world_aabb(item.shape, item.pose.matrix())
    surface = world.location_transform(name)[2, 3]
    return abs(float(low[2]) - surface) <= SURFACE_GAP


def _container_state(world: WorldState, container: Any, state: str) -> bool:
    if isinstance(container, Designator):
        container = container.get("name")
    if container not in world.environment.containers:
        raise FormulaError(f"Unknown container {container!r}")
    return world.container_state(container) == state


def _looking_at(world: WorldState, target: Any) -> bool:
    point = _target_point(target, world)
    camera = world.link_transform(world.robot.camera_frame)
    direction = point - camera[:3, 3]
    norm = float(np.linalg.norm(direction))
    if norm < 1e-9:
        return True
    cos = float(camera[:3, 0] @ direction) / norm
    return math.acos(max(-1.0, min(1.0, cos))) <= LOOKING_AT_ANGLE


def _robot_at(world: WorldState, location: Any) -> bool:
    x, y, theta = world.base_pose()
    if isinstance(location, Designator) and "pose" in location:
        location = location["pose"]
    if isinstance(location, Pose):
        location = location.xy_theta()
    if isinstance(location, (tuple, list)) and len(location) == 3:
        gx, gy, gt = (float(v) for v in location)
        return (
            math.hypot(x - gx, y - gy) <= ROBOT_AT_DISTANCE
            and abs(wrap_angle(theta - gt)) <= ROBOT_AT_ANGLE
        )
    raise FormulaError(f"robot-at needs a base pose, got {location!r}")


PREDICATES: Dict[str, Callable[..., bool]] = {
    "object-in-hand": _object_in_hand,
    "object-at": _object_at,
    "container-state": _container_state,
    "looking-at": _looking_at,
    "robot-at": _robot_at,
}

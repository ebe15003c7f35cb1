"""Generalized plans for the household activities.

Each plan works for any object, location and container; the parameters it
leaves open (base pose, arm, grasp, placement) are queried from the
executive's reasoner at run time and retried on failure.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Dict, Generator, Iterator, Optional
import itertools

from ..models.designator import Designator, a_location, an_action
from ..models.domain import FailureCategory, PlanFailure
from ..motion.problem import MotionGoalSpec
from ..perception.detector import Detector
from ..reasoner.engine import ParameterQuery, mobile_pick_bindings, shoulder_position, tiered
from ..reasoner.grasps import grasp_poses, handle_grasp_poses
from ..utils.logger import logger
from .formulas import Exists, Formula, Var, container_state, object_at, object_in_hand, robot_at
from .interpreter import RetryPolicy, TaskContext

if TYPE_CHECKING:
    from .executive import PlanExecutive

PlanBody = Callable[["PlanExecutive", TaskContext, Designator], Generator]


@dataclass(frozen=True)
class GeneralizedPlan:
    """Plan body plus the goal it achieves.

    ``goal`` maps the action designator to a formula checked on the belief
    before the body runs (success without acting) and after it (the body
    must have achieved it). ``resolve`` gives the value of a plan whose
    goal already held.
    """
    name: str
    body: PlanBody
    goal: Optional[Callable[[Designator], Optional[Formula]]] = None
    failure_category: FailureCategory = FailureCategory.MANIPULATION
    resolve: Optional[Callable[["PlanExecutive", Designator], Any]] = None


GENERALIZED_PLANS: Dict[str, GeneralizedPlan] = {}


def generalized_plan(
    name: str,
    goal: Optional[Callable[[Designator], Optional[Formula]]] = None,
    failure_category: FailureCategory = FailureCategory.MANIPULATION,
    resolve: Optional[Callable[["PlanExecutive", Designator], Any]] = None
) -> Callable[[PlanBody], PlanBody]:
    """Register a plan body for an action type"""
    def register(body: PlanBody) -> PlanBody:
        GENERALIZED_PLANS[name] = GeneralizedPlan(name, body, goal, failure_category, resolve)
        return body
    return register


# ---------------------------------------------------------------------------
# Goals
# ---------------------------------------------------------------------------

def _at_pose(action: Designator) -> Optional[Formula]:
    return robot_at(action["pose"]) if "pose" in action else None


def _in_hand(action: Designator) -> Optional[Formula]:
    obj = action.get("object")
    if not isinstance(obj, Designator):
        return None
    if "name" in obj:
        return object_in_hand(obj)
    return Exists("held", obj["type"], object_in_hand(Var("held")))


def _delivered(action: Designator) -> Optional[Formula]:
    obj = action.get("object")
    target = action.get("target", action.get("to"))
    if not isinstance(obj, Designator) or not isinstance(target, Designator):
        return None
    if "name" in obj:
        return object_at(obj, target)
    return Exists("item", obj["type"], object_at(Var("item"), target))


def _container_goal(state: str) -> Callable[[Designator], Formula]:
    return lambda action: container_state(action["container"], state)


def _held_object(ex: "PlanExecutive", action: Designator) -> Designator:
    """The held object matching the action's object designator"""
    query = action["object"]
    for oid in ex.held_objects(ex.belief):
        obj = ex.belief.objects[oid]
        if Detector.matches(query, obj):
            return query.extend({"name": oid, "type": obj.object_type, "pose": obj.pose, "color": obj.color})
    return query


def _region(location: Designator) -> str:
    region = location.get("on") or location.get("in")
    if isinstance(region, Designator):
        region = region.get("name")
    if region is None:
        raise ValueError(f"Location {location.describe()} names no region")
    return region


def _bound(action: Designator, *keys: str) -> Dict[str, Any]:
    return {key: action[key] for key in keys if key in action}


# ---------------------------------------------------------------------------
# Navigation and perception
# ---------------------------------------------------------------------------

@generalized_plan("navigating", goal=_at_pose, failure_category=FailureCategory.NAVIGATION)
def navigating(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    if "pose" in action:
        return (yield from ex.navigate(ctx, action["pose"]))
    location = action["location"]
    context = ex.stream_context(f"navigating:{location.describe()}", location=location)
    poses = ex.candidates(lambda: ex.reasoner.infer(ParameterQuery("navigating", "base-pose", context, ex.belief)))
    policy = RetryPolicy(ex.config.retries.base_pose, empty_category=FailureCategory.NAVIGATION)
    return (yield from ctx.with_retry(policy, ex.navigate, poses))


def _watch_held(ex: "PlanExecutive", ctx: TaskContext) -> Generator:
    event = yield from ctx.wait_for("object-slipped")
    object_id = event.payload["object"]
    if ex.on_floor(object_id):
        raise PlanFailure(FailureCategory.UNRECOVERABLE, f"{object_id} dropped to the floor")
    raise PlanFailure(FailureCategory.GRASP, f"{object_id} slipped while carrying")


@generalized_plan("carrying", goal=_at_pose, failure_category=FailureCategory.NAVIGATION)
def carrying(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    """Navigate while a monitor watches the held objects"""
    move = action.without("object").extend({"type": "navigating"})
    if ex.projection or not ex.held_objects(ex.truth):
        return (yield from ex.perform(ctx, move))
    return (yield from ctx.pursue(lambda c: ex.perform(c, move), lambda c: _watch_held(ex, c)))


@generalized_plan("perceiving", failure_category=FailureCategory.PERCEPTION)
def perceiving(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    obj = action["object"]
    if "pose" in obj:
        point = obj["pose"].translation
    elif "location" in action:
        point = ex.belief.location_transform(_region(action["location"]))[:3, 3]
    else:
        raise ValueError(f"Perceiving {obj.describe()} needs a pose or a location to look at")
    yield from ex.look(ctx, point)
    return (yield from ex.detect(ctx, obj))


# ---------------------------------------------------------------------------
# Manipulation
# ---------------------------------------------------------------------------

def _pick(ex: "PlanExecutive", ctx: TaskContext, obj: Designator, binding: Dict[str, Any]) -> Generator:
    arm, grasp_id = binding["arm"], binding["grasp"]
    info = ex.robot.arms[arm]
    yield from ex.perform(ctx, an_action(type="navigating", pose=binding["base-pose"]))
    shape = ex.belief.objects[obj["name"]].shape
    poses = grasp_poses(ex.catalog.get(grasp_id), obj["pose"], shape, shoulder_position(ex.belief, arm))
    context = {"object": obj, "width": poses.width, "grasp": grasp_id}
    opening = next(ex.reasoner.infer(ParameterQuery("picking-up", "gripper-opening", context, ex.belief)))
    if opening > info.gripper_range[1]:
        raise PlanFailure(FailureCategory.GRASP, f"{obj['name']} is too wide for the gripper ({poses.width:.3f} m)")
    tool = info.tool_frame
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: poses.pregrasp}, joint_goals={info.gripper_dof: opening}, arm=arm,
    ))
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: poses.grasp}, collision_mode="allow-fingers", arm=arm, interaction=True,
    ))
    yield from ex.close_gripper(ctx, obj["name"], arm, poses.width, poses.object_in_tool)
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: poses.lift}, collision_mode="allow-fingers-and-object", arm=arm,
    ))
    yield from ex.move(ctx, ex.carry_spec(arm), strict=False)
    held = ex.belief.objects[obj["name"]]
    return obj.extend({"pose": held.pose})


@generalized_plan("picking-up", goal=_in_hand, failure_category=FailureCategory.GRASP, resolve=_held_object)
def picking_up(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    obj = action["object"]
    if "name" not in obj or "pose" not in obj:
        raise PlanFailure(FailureCategory.PERCEPTION, f"{obj.describe()} has not been perceived")
    region = action.get("from") or ex.region_of(obj["name"]) or "floor"
    key = f"picking-up:{obj['type']}@{region}"
    context = ex.stream_context(
        key, object=obj, location=a_location(reachable_for=obj), **_bound(action, "base-pose", "arm", "grasp")
    )
    retries = ex.config.retries
    stream = ex.candidates(lambda: mobile_pick_bindings(ex.reasoner, "picking-up", context, ex.belief))
    bindings = ex.projected(action, tiered(stream, retries.caps()))

    def attempt(c: TaskContext, binding: Dict[str, Any]) -> Generator:
        return (yield from ex.attempt(key, binding, _pick(ex, c, obj, binding)))

    policy = RetryPolicy(retries.total, empty_category=FailureCategory.MANIPULATION)
    return (yield from ctx.with_retry(policy, attempt, bindings))


def _placement_bindings(ex: "PlanExecutive", action: Designator, context: Dict[str, Any], arm: str, name: str) -> Iterator[Dict[str, Any]]:
    """Placement poses, and per placement base poses that reach it"""
    retries = ex.config.retries
    if "placement-pose" in action:
        placements: Any = [action["placement-pose"]]
    else:
        placements = ex.candidates(
            lambda: ex.reasoner.infer(ParameterQuery("placing", "placement-pose", context, ex.belief))
        )
    for placement in itertools.islice(placements, retries.grasp + 1):
        if "base-pose" in action:
            bases: Any = [action["base-pose"]]
        else:
            query = ParameterQuery("placing", "base-pose", {**context, "location": a_location(reachable_for=placement)}, ex.belief)
            bases = ex.candidates(lambda q=query: ex.reasoner.infer(q))
        for base in itertools.islice(bases, retries.base_pose + 1):
            if ex.arm_holding(name) != arm:
                return
            yield {"placement-pose": placement, "base-pose": tuple(base), "arm": arm}


def _place(ex: "PlanExecutive", ctx: TaskContext, obj: Designator, arm: str, region: str, binding: Dict[str, Any]) -> Generator:
    name = obj["name"]
    tool = ex.robot.arms[arm].tool_frame
    yield from ex.perform(ctx, an_action(type="carrying", object=obj, pose=binding["base-pose"]))
    preplace, place, retreat = ex.placement_tool_poses(name, arm, binding["placement-pose"])
    yield from ex.move(ctx, MotionGoalSpec("moving-arm", goal_poses={tool: preplace}, arm=arm))
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: place}, collision_mode="allow-fingers-and-object",
        collision_object=region, arm=arm,
    ))
    yield from ex.release(ctx, name, arm, region)
    ex.check_placed(name, region)
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: retreat}, collision_mode="allow-fingers", arm=arm,
    ), strict=False)
    yield from ex.move(ctx, ex.park_spec(arm), strict=False)
    return obj.extend({"pose": ex.belief.objects[name].pose})


@generalized_plan("placing", goal=_delivered, failure_category=FailureCategory.MANIPULATION)
def placing(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    obj, target = action["object"], action["target"]
    name = obj.get("name")
    arm = ex.arm_holding(name)
    if arm is None:
        raise PlanFailure(FailureCategory.MANIPULATION, f"not holding {obj.describe()}")
    region = _region(target)
    key = f"placing:{obj['type']}@{region}"
    context = ex.stream_context(key, object=obj, target=target, arm=arm)
    bindings = ex.projected(action, _placement_bindings(ex, action, context, arm, name))

    def attempt(c: TaskContext, binding: Dict[str, Any]) -> Generator:
        return (yield from ex.attempt(key, binding, _place(ex, c, obj, arm, region, binding)))

    policy = RetryPolicy(ex.config.retries.total, empty_category=FailureCategory.MANIPULATION)
    return (yield from ctx.with_retry(policy, attempt, bindings))


def _operate(ex: "PlanExecutive", ctx: TaskContext, action_type: str, container: str, binding: Dict[str, Any]) -> Generator:
    arm = binding["arm"]
    info = ex.robot.arms[arm]
    tool = info.tool_frame
    failure = FailureCategory.ENV_MANIPULATION
    yield from ex.perform(ctx, an_action(type="navigating", pose=binding["base-pose"]))
    spec = ex.catalog.for_type("handle")[0]
    poses = handle_grasp_poses(spec, ex.belief.handle_transform(container), shoulder_position(ex.belief, arm))
    if poses is None:
        raise PlanFailure(failure, f"the handle of {container} cannot be approached from here")
    opening = ex.catalog.opening(poses.width)
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: poses.pregrasp}, joint_goals={info.gripper_dof: opening}, arm=arm,
    ), failure)
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: poses.grasp}, collision_mode="allow-hand",
        collision_object=container, arm=arm, interaction=True,
    ), failure)
    yield from ex.grip_handle(ctx, container, arm, poses.width)
    yield from ex.articulate(ctx, MotionGoalSpec(
        action_type, container=container, arm=arm, collision_mode="allow-hand", collision_object=container,
    ))
    yield from ex.open_gripper(ctx, arm, opening)
    yield from ex.move(ctx, MotionGoalSpec(
        "moving-arm", goal_poses={tool: ex.retreat_pose(arm)}, collision_mode="allow-hand",
        collision_object=container, arm=arm,
    ), strict=False)
    yield from ex.move(ctx, ex.park_spec(arm), strict=False)
    return container


def _articulation(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    container = action["container"]
    action_type = action.type
    key = f"{action_type}:{container}"
    context = ex.stream_context(
        key, container=container, location=a_location(reachable_for=container), **_bound(action, "base-pose", "arm")
    )
    retries = ex.config.retries
    stream = ex.candidates(lambda: mobile_pick_bindings(ex.reasoner, action_type, context, ex.belief))
    bindings = ex.projected(action, tiered(stream, retries.caps()))

    def attempt(c: TaskContext, binding: Dict[str, Any]) -> Generator:
        return (yield from ex.attempt(key, binding, _operate(ex, c, action_type, container, binding)))

    policy = RetryPolicy(retries.total, empty_category=FailureCategory.ENV_MANIPULATION)
    return (yield from ctx.with_retry(policy, attempt, bindings))


GENERALIZED_PLANS["opening"] = GeneralizedPlan(
    "opening", _articulation, _container_goal("open"), FailureCategory.ENV_MANIPULATION
)
GENERALIZED_PLANS["closing"] = GeneralizedPlan(
    "closing", _articulation, _container_goal("closed"), FailureCategory.ENV_MANIPULATION
)


# ---------------------------------------------------------------------------
# Composite activities
# ---------------------------------------------------------------------------

def _with_container_open(ex: "PlanExecutive", ctx: TaskContext, region: str, body: Callable[[], Generator]) -> Generator:
    """Open the container of a region if needed, run ``body`` and close it again.

    A recoverable failure of ``body`` still closes a container opened here
    before the failure propagates.
    """
    container = ex.belief.location(region).container
    opened = False
    if container is not None and ex.belief.container_state(container) != "open":
        yield from ex.perform(ctx, an_action(type="opening", container=container))
        opened = True
    try:
        value = yield from body()
    except PlanFailure as failure:
        if opened and failure.category != FailureCategory.UNRECOVERABLE:
            logger.info(f"Closing {container} after a failed body: {failure}")
            try:
                yield from ex.perform(ctx, an_action(type="closing", container=container))
            except PlanFailure as closing:
                logger.warning(f"{container} stays open: {closing}")
        raise
    if opened:
        yield from ex.perform(ctx, an_action(type="closing", container=container))
    return value


@generalized_plan("fetching", goal=_in_hand, failure_category=FailureCategory.GRASP, resolve=_held_object)
def fetching(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    obj, source = action["object"], action["location"]
    region = _region(source)

    def look(c: TaskContext, base: Any) -> Generator:
        yield from ex.perform(c, an_action(type="navigating", pose=tuple(base)))
        return (yield from ex.perform(c, an_action(type="perceiving", object=obj, location=source)))

    def fetch() -> Generator:
        context = ex.stream_context(f"perceiving:{obj['type']}@{region}", location=a_location(visible_for=region))
        bases = ex.candidates(lambda: ex.reasoner.infer(ParameterQuery("perceiving", "base-pose", context, ex.belief)))
        policy = RetryPolicy(ex.config.retries.perception, empty_category=FailureCategory.PERCEPTION)
        detected = yield from ctx.with_retry(policy, look, bases)
        return (yield from ex.perform(ctx, an_action(**{"type": "picking-up", "object": detected, "from": region})))

    return (yield from _with_container_open(ex, ctx, region, fetch))


@generalized_plan("delivering", goal=_delivered, failure_category=FailureCategory.MANIPULATION)
def delivering(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    obj, target = action["object"], action["target"]

    def deliver() -> Generator:
        return (yield from ex.perform(ctx, an_action(type="placing", object=obj, target=target)))

    return (yield from _with_container_open(ex, ctx, _region(target), deliver))


@generalized_plan("transporting", goal=_delivered, failure_category=FailureCategory.MANIPULATION)
def transporting(ex: "PlanExecutive", ctx: TaskContext, action: Designator) -> Generator:
    """Fetch an object and deliver it; a retry looks where the object was last seen"""
    obj, source, target = action["object"], action["from"], action["to"]

    def attempt(c: TaskContext, index: int) -> Generator:
        where = source if index == 0 else ex.whereabouts(obj, source)
        picked = yield from ex.perform(c, an_action(type="fetching", object=obj, location=where))
        return (yield from ex.perform(c, an_action(type="delivering", object=picked, target=target)))

    retries = ex.config.retries.transport
    return (yield from ctx.with_retry(RetryPolicy(retries), attempt, range(retries + 1)))

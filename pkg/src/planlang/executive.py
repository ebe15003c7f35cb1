"""Plan executive: performs action designators on the simulated robot.

The executive keeps two world states. ``belief`` is what the robot knows
and plans on; ``truth`` is the simulated ground truth where grasps, drops
and slips are decided. They differ by the localization drift of the base,
perception error and injected disturbances.
"""

from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Callable, Dict, Generator, Iterable, Iterator, List, Optional, Protocol, Sequence, Tuple
import math

import numpy as np

from ..models.designator import Designator, a_location
from ..models.domain import (
    EmptySupport,
    Episode,
    FailureCategory,
    LocationUnreachable,
    PlanFailure,
    Pose,
    wrap_angle
)
from ..motion.controller import MotionPlanner
from ..motion.problem import MotionGoalSpec, MotionResult
from ..perception.detector import Detector
from ..reasoner.distributions import PoseGrid
from ..reasoner.engine import ParameterReasoner, shoulder_position
from ..reasoner.grasps import azimuth
from ..reasoner.heuristics import occupancy
from ..reasoner.projection import Projector, validate_by_projection
from ..utils.logger import logger
from ..worldmodel.settle import Settler
from ..worldmodel.world import WorldState, yaw_matrix
from .formulas import holds
from .interpreter import Interpreter, Outcome, TaskContext
from .plans import GENERALIZED_PLANS, GeneralizedPlan
from .serialization import TaskTreeRecorder, dumps

PHASES = ("navigation", "perception", "manipulation")


@dataclass
class RetryConfig:
    """Retry budgets per parameter tier and per plan"""
    grasp: int = 3
    arm: int = 3
    base_pose: int = 3
    transport: int = 2
    perception: int = 3

    def __post_init__(self):
        if min(asdict(self).values()) < 0:
            raise ValueError(f"Retry budgets must be non-negative, got {asdict(self)}")

    def caps(self) -> Dict[str, int]:
        """Budgets keyed by the tiers of a binding stream"""
        return {"grasp": self.grasp, "arm": self.arm, "base-pose": self.base_pose}

    @property
    def total(self) -> int:
        return self.grasp + self.arm + self.base_pose


@dataclass
class ExecutiveConfig:
    """Timing model and tolerances of plan execution"""
    navigation_speed: float = 0.5
    rotation_speed: float = 0.8
    navigation_overhead: float = 45.0
    perception_overhead: float = 2.0
    perception_per_point: float = 0.01
    manipulation_overhead: float = 8.0
    gripper_time: float = 1.0
    clock_chunk: float = 1.0
    motion_ticks: int = 1500
    grasp_tolerance: float = 0.03
    handle_tolerance: float = 0.03
    collision_radius: float = 0.3
    floor_height: float = 0.15
    preplace_height: float = 0.08
    retreat: float = 0.12
    carry_lift: float = 1.3
    carry_elbow: float = -1.6
    use_projection: bool = True
    retries: RetryConfig = field(default_factory=RetryConfig)

    def __post_init__(self):
        """Validate speeds and tolerances"""
        if isinstance(self.retries, dict):
            self.retries = RetryConfig(**self.retries)
        if min(self.navigation_speed, self.rotation_speed, self.clock_chunk) <= 0:
            raise ValueError("Speeds and the clock chunk must be positive")
        if min(self.navigation_overhead, self.perception_overhead, self.manipulation_overhead, self.gripper_time) < 0:
            raise ValueError("Time overheads must be non-negative")
        if self.grasp_tolerance <= 0 or self.handle_tolerance <= 0:
            raise ValueError("Grasp tolerances must be positive")
        if self.motion_ticks <= 0:
            raise ValueError(f"motion_ticks must be positive, got {self.motion_ticks}")


class Disturbances(Protocol):
    """Sources of execution noise the ground truth is subjected to"""

    def localization_error(self, rng: np.random.Generator) -> Tuple[float, float, float]:
        ...

    def grasp_slips(self, object_type: str, alignment_error: float, rng: np.random.Generator) -> bool:
        ...

    def handle_slips(self, container: str, rng: np.random.Generator) -> bool:
        ...

    def carry_drop(self, object_type: str, phase: str, rng: np.random.Generator) -> Optional[float]:
        """Fraction of a navigation at which a carried object drops, or None"""
        ...

    def gripper_jams(self, region: str, phase: str, rng: np.random.Generator) -> bool:
        ...


class NullDisturbances:
    """Perfect execution: no drift, no slips, no drops"""

    def localization_error(self, rng: np.random.Generator) -> Tuple[float, float, float]:
        return (0.0, 0.0, 0.0)

    def grasp_slips(self, object_type: str, alignment_error: float, rng: np.random.Generator) -> bool:
        return False

    def handle_slips(self, container: str, rng: np.random.Generator) -> bool:
        return False

    def carry_drop(self, object_type: str, phase: str, rng: np.random.Generator) -> Optional[float]:
        return None

    def gripper_jams(self, region: str, phase: str, rng: np.random.Generator) -> bool:
        return False


class PlanExecutive:
    """Performs action designators with the registered generalized plans.

    Args:
        world: Initial ground truth; the belief starts as an exact copy
        reasoner: Answers parameter queries (heuristic, specialized or combined)
        planner: Whole-body motion planner
        detector: Perception; None perceives the belief exactly
        config: Timing model, tolerances and retry budgets
        disturbances: Execution noise applied to the ground truth
        recorder: Receives task nodes and events
        plans: Plan library keyed by action type
        seed: Seed of execution noise and candidate streams
        run_id: Identifier stored in episodes
        phase: Marathon phase ("setting" or "cleaning"), seen by disturbances
        settler: Physics used when objects are released or dropped
        on_episode: Callback receiving every parameterized attempt
        projection: Whether this executive is itself a noise-free projection
        motion_cache: Motion results shared with projection executives
    """

    def __init__(
        self,
        world: WorldState,
        reasoner: ParameterReasoner,
        planner: Optional[MotionPlanner] = None,
        detector: Optional[Detector] = None,
        config: Optional[ExecutiveConfig] = None,
        disturbances: Optional[Disturbances] = None,
        recorder: Optional[TaskTreeRecorder] = None,
        plans: Optional[Dict[str, GeneralizedPlan]] = None,
        seed: int = 0,
        run_id: str = "",
        phase: str = "",
        settler: Optional[Settler] = None,
        on_episode: Optional[Callable[[Episode], None]] = None,
        projection: bool = False,
        motion_cache: Optional[Dict[Tuple[str, str], MotionResult]] = None
    ):
        self.truth = world
        self.belief = world.clone()
        self.reasoner = reasoner
        self.catalog = getattr(reasoner, "catalog")
        self.planner = planner or MotionPlanner()
        self.detector = detector
        self.config = config or ExecutiveConfig()
        self.disturbances: Disturbances = disturbances or NullDisturbances()
        self.plans = plans if plans is not None else GENERALIZED_PLANS
        self.seed = int(seed)
        self.run_id = run_id
        self.phase = phase
        self.settler = settler or Settler()
        self.on_episode = on_episode
        self.projection = projection
        self.motion_cache = motion_cache if motion_cache is not None else {}
        self.interpreter = Interpreter(recorder, start_time=world.sim_time)
        self.rng = np.random.default_rng(self.seed)
        self.durations: Dict[str, float] = {phase_name: 0.0 for phase_name in PHASES}
        self.episodes: List[Episode] = []
        self.motion_commands = 0
        self._stream_counts: Dict[str, int] = {}
        self.projector = Projector(self._projection_executive) if self.config.use_projection and not projection else None
        if projection:
            logger.debug("Projection executive created")
        else:
            logger.info(
                f"PlanExecutive initialized (reasoner={getattr(reasoner, 'mode', '?')}, "
                f"projection={'on' if self.projector else 'off'}, seed={self.seed})"
            )

    @property
    def robot(self):
        return self.truth.robot

    @property
    def now(self) -> float:
        return self.interpreter.now

    # ------------------------------------------------------------------
    # Performing designators
    # ------------------------------------------------------------------

    def plan_for(self, action: Designator) -> GeneralizedPlan:
        try:
            return self.plans[action.type]
        except KeyError:
            raise ValueError(f"No generalized plan for action type {action.type}") from None

    def run(self, action: Designator) -> Outcome:
        """Perform an action as a top-level task and wait for it to finish"""
        plan = self.plan_for(action)
        outcome = self.interpreter.run(action, lambda ctx: self._execute(plan, ctx, action))
        self.truth = self.truth.with_time(self.now)
        self.belief = self.belief.with_time(self.now)
        return outcome

    def perform(self, ctx: TaskContext, action: Designator) -> Generator:
        """Perform an action as a child task of ``ctx``"""
        plan = self.plan_for(action)
        return (yield from ctx.task(action, lambda c: self._execute(plan, c, action)))

    def _execute(self, plan: GeneralizedPlan, ctx: TaskContext, action: Designator) -> Generator:
        goal = plan.goal(action) if plan.goal is not None else None
        if goal is not None and holds(goal, self.belief, action):
            logger.info(f"{action.describe()}: goal already holds")
            return plan.resolve(self, action) if plan.resolve is not None else action
        value = yield from plan.body(self, ctx, action)
        if goal is not None and not holds(goal, self.belief, action):
            raise PlanFailure(plan.failure_category, f"{action.describe()} finished without achieving its goal")
        return value

    # ------------------------------------------------------------------
    # Clock
    # ------------------------------------------------------------------

    def advance(
        self,
        ctx: TaskContext,
        duration: float,
        phase: str,
        triggers: Sequence[Tuple[float, Callable[[TaskContext], None]]] = ()
    ) -> Generator:
        """Let simulated time pass in chunks.

        ``triggers`` are (fraction of the duration, callback) pairs fired
        once that much time has elapsed.
        """
        pending = sorted(triggers, key=lambda t: t[0])
        elapsed = 0.0
        while elapsed < duration - 1e-9:
            step = min(self.config.clock_chunk, duration - elapsed)
            yield ctx.env.timeout(step)
            elapsed += step
            self.durations[phase] += step
            while pending and pending[0][0] * duration <= elapsed + 1e-9:
                pending.pop(0)[1](ctx)
        for _, callback in pending:
            callback(ctx)

    def _command(self, ctx: TaskContext) -> None:
        self.motion_commands += 1
        if ctx.node is not None:
            ctx.node.motion_commands += 1

    # ------------------------------------------------------------------
    # Belief and truth
    # ------------------------------------------------------------------

    def drift(self) -> np.ndarray:
        """Transform taking believed world coordinates to true ones"""
        truth = Pose.from_xy_theta(*self.truth.base_pose()).matrix()
        belief = Pose.from_xy_theta(*self.belief.base_pose()).matrix()
        return truth @ np.linalg.inv(belief)

    def to_belief(self, pose: Pose) -> Pose:
        """Pose observed relative to the true base, expressed in believed coordinates"""
        return Pose.from_matrix(np.linalg.inv(self.drift()) @ pose.matrix())

    def commit(self, belief: WorldState) -> None:
        """Adopt a new belief and execute the same joint motion on the ground truth"""
        drift = self.drift()
        base_dofs = self.robot.base_dofs
        base = Pose.from_matrix(drift @ Pose.from_xy_theta(*belief.base_pose()).matrix()).xy_theta()
        updates = {name: value for name, value in belief.positions.items() if name not in base_dofs}
        updates.update(zip(base_dofs, base))
        self.truth = self.truth.with_positions(updates)
        self.belief = belief.with_time(self.belief.sim_time)

    def held_objects(self, world: WorldState) -> List[str]:
        return sorted(oid for oid in world.objects if world.attached_to_robot(oid))

    def arm_holding(self, object_id: Optional[str]) -> Optional[str]:
        """Arm whose hand holds the object in the belief"""
        if object_id is None or object_id not in self.belief.objects:
            return None
        link = self.belief.objects[object_id].attachment
        for name, info in self.robot.arms.items():
            if link in {info.tool_frame, *info.hand_links, *info.finger_links}:
                return name
        return None

    def region_of(self, object_id: str, world: Optional[WorldState] = None) -> Optional[str]:
        """Location whose region contains the object center"""
        world = world or self.belief
        center = world.objects[object_id].pose.translation
        for name in sorted(world.environment.locations):
            if world.location_contains(name, center, 0.02):
                return name
        return None

    def whereabouts(self, query: Designator, default: Designator) -> Designator:
        """Location designator of the believed place of a free object matching ``query``"""
        for oid in sorted(self.belief.objects):
            obj = self.belief.objects[oid]
            if not Detector.matches(query, obj) or self.belief.attached_to_robot(oid):
                continue
            region = self.region_of(oid)
            if region is None:
                continue
            kind = "in" if self.belief.location(region).kind == "container" else "on"
            return a_location(**{kind: region})
        return default

    def on_floor(self, object_id: str) -> bool:
        return float(self.truth.objects[object_id].pose.translation[2]) < self.config.floor_height

    def blocked(self, world: WorldState, pose: Sequence[float]) -> bool:
        """Whether the base footprint at ``pose`` overlaps furniture or floor objects"""
        res = 0.05
        grid = PoseGrid(float(pose[0]) - 0.5 * res, float(pose[1]) - 0.5 * res, 1, 1, res, 1)
        return bool(occupancy(world, grid, self.config.collision_radius)[0, 0])

    # ------------------------------------------------------------------
    # Primitive actions
    # ------------------------------------------------------------------

    def navigate(self, ctx: TaskContext, pose: Any) -> Generator:
        """Drive the base to a pose; the true pose is off by the localization error"""
        if isinstance(pose, Pose):
            pose = pose.xy_theta()
        target = tuple(float(v) for v in pose)
        self._command(ctx)
        if self.blocked(self.belief, target):
            raise PlanFailure(FailureCategory.NAVIGATION, f"base pose ({target[0]:.2f}, {target[1]:.2f}) is blocked")
        cfg = self.config
        x0, y0, t0 = self.belief.base_pose()
        distance = math.hypot(target[0] - x0, target[1] - y0)
        turn = abs(wrap_angle(target[2] - t0))
        duration = 0.0
        if distance > 1e-6 or turn > 1e-6:
            duration = distance / cfg.navigation_speed + turn / cfg.rotation_speed + cfg.navigation_overhead
        triggers = []
        noise = (0.0, 0.0, 0.0)
        if not self.projection:
            for object_id in self.held_objects(self.truth):
                object_type = self.truth.objects[object_id].object_type
                fraction = self.disturbances.carry_drop(object_type, self.phase, self.rng)
                if fraction is not None:
                    triggers.append((float(fraction), partial(self._drop, object_id)))
            noise = self.disturbances.localization_error(self.rng)
        yield from self.advance(ctx, duration, "navigation", triggers)
        base_dofs = self.robot.base_dofs
        true_pose = (target[0] + noise[0], target[1] + noise[1], wrap_angle(target[2] + noise[2]))
        self.belief = self.belief.with_positions(dict(zip(base_dofs, target)))
        self.truth = self.truth.with_positions(dict(zip(base_dofs, true_pose)))
        if not self.projection and self.blocked(self.truth, true_pose):
            raise PlanFailure(FailureCategory.NAVIGATION, "the base bumped into furniture")
        return target

    def _drop(self, object_id: str, ctx: TaskContext) -> None:
        truth = self.truth.detach(object_id)
        pose, _ = self.settler.settle(truth, object_id)
        self.truth = truth.with_object_pose(object_id, pose)
        belief = self.belief
        if belief.objects[object_id].attachment is not None:
            belief = belief.detach(object_id)
        self.belief = belief.with_object_pose(object_id, self.to_belief(pose))
        logger.warning(f"{object_id} slipped out of the hand at {np.round(pose.translation, 3).tolist()}")
        ctx.post("object-slipped", {"object": object_id, "on_floor": self.on_floor(object_id)})

    def plan_motion(self, spec: MotionGoalSpec) -> MotionResult:
        """Plan on the belief; identical requests from identical states are served from the cache"""
        key = (dumps(asdict(spec)), self.belief.state_hash())
        result = self.motion_cache.get(key)
        if result is None:
            result = self.planner.plan(spec, self.belief, self.config.motion_ticks)
            self.motion_cache[key] = result
        return result

    def move(
        self,
        ctx: TaskContext,
        spec: MotionGoalSpec,
        category: FailureCategory = FailureCategory.MANIPULATION,
        strict: bool = True,
        phase: str = "manipulation"
    ) -> Generator:
        """Execute one motion.

        Args:
            strict: Fail when the motion does not converge; otherwise the
                partial motion is executed and the plan continues

        Raises:
            PlanFailure: of ``category`` when a strict motion does not converge
        """
        self._command(ctx)
        result = self.plan_motion(spec)
        if not result.converged and strict:
            raise PlanFailure(category, f"{spec.type} motion failed: {result.reason}")
        if not result.converged:
            logger.debug(f"Executing partial {spec.type} motion: {result.reason}")
        yield from self.advance(ctx, result.trajectory.duration, phase)
        self.commit(result.world)
        return result

    def look(self, ctx: TaskContext, point: Sequence[float]) -> Generator:
        spec = MotionGoalSpec("looking", look_target=tuple(float(v) for v in point))
        return (yield from self.move(ctx, spec, FailureCategory.PERCEPTION, strict=False, phase="perception"))

    def detect(self, ctx: TaskContext, query: Designator) -> Generator:
        """Resolve an object designator with perception.

        Returns:
            The query extended with name, type, believed pose and color

        Raises:
            PlanFailure: perception failure
        """
        self._command(ctx)
        points = 0
        if self.projection or self.detector is None:
            matches = [
                self.belief.objects[oid] for oid in sorted(self.belief.objects)
                if Detector.matches(query, self.belief.objects[oid]) and not self.belief.attached_to_robot(oid)
            ]
            if not matches:
                raise PlanFailure(FailureCategory.PERCEPTION, f"no object matches {query.describe()}")
            obj, pose = matches[0], matches[0].pose
        else:
            camera = self.truth.forward_kinematics(self.robot.camera_frame)
            result = self.detector.detect(query, self.truth, camera, self.rng)
            obj = self.truth.objects[result.object_id]
            pose = self.to_belief(result.pose)
            points = result.point_count
            self.belief = self.belief.with_object_pose(obj.id, pose)
        cfg = self.config
        yield from self.advance(ctx, cfg.perception_overhead + cfg.perception_per_point * points, "perception")
        return query.extend({"name": obj.id, "type": obj.object_type, "pose": pose, "color": obj.color})

    def _close_empty(self, ctx: TaskContext, arm: str) -> None:
        info = self.robot.arms[arm]
        closed = {info.gripper_dof: info.gripper_range[0]}
        self.truth = self.truth.with_positions(closed)
        self.belief = self.belief.with_positions(closed)
        ctx.post("fingers-closed-completely", {"arm": arm})

    def close_gripper(self, ctx: TaskContext, object_id: str, arm: str, width: float, object_in_tool: Pose) -> Generator:
        """Close on an object and attach it to the tool frame.

        Raises:
            PlanFailure: grasp failure when the object is not between the
                fingers or slips out
        """
        self._command(ctx)
        info = self.robot.arms[arm]
        yield from self.advance(ctx, self.config.gripper_time, "manipulation")
        obj = self.truth.objects[object_id]
        offset = np.linalg.inv(self.truth.link_transform(info.tool_frame)) @ obj.pose.matrix()
        error = float(np.linalg.norm(offset[:3, 3] - object_in_tool.translation))
        try:
            truth = self.truth.attach(object_id, info.tool_frame, object_in_tool, self.config.grasp_tolerance)
        except PlanFailure:
            self._close_empty(ctx, arm)
            raise
        if not self.projection and self.disturbances.grasp_slips(obj.object_type, error, self.rng):
            self._close_empty(ctx, arm)
            raise PlanFailure(FailureCategory.GRASP, f"{object_id} slipped out of the {arm} gripper")
        closed = {info.gripper_dof: width}
        self.truth = truth.with_positions(closed)
        self.belief = self.belief.with_positions(closed).attach(object_id, info.tool_frame, tolerance=math.inf)
        logger.info(f"Grasped {object_id} with the {arm} arm (offset error {error:.3f} m)")

    def release(self, ctx: TaskContext, object_id: str, arm: str, region: str) -> Generator:
        """Open the gripper and let physics settle the object.

        Raises:
            PlanFailure: unrecoverable when the gripper jams
        """
        self._command(ctx)
        info = self.robot.arms[arm]
        yield from self.advance(ctx, self.config.gripper_time, "manipulation")
        if not self.projection and self.disturbances.gripper_jams(region, self.phase, self.rng):
            ctx.post("gripper-jammed", {"arm": arm, "region": region})
            raise PlanFailure(FailureCategory.UNRECOVERABLE, f"the {arm} gripper jammed in {region}")
        opened = {info.gripper_dof: min(self.truth.positions[info.gripper_dof] + 0.03, info.gripper_range[1])}
        truth = self.truth.detach(object_id).with_positions(opened)
        pose, corrected = self.settler.settle(truth, object_id)
        self.truth = self._rest(truth.with_object_pose(object_id, pose), object_id)
        belief = self.belief
        if belief.objects[object_id].attachment is not None:
            belief = belief.detach(object_id)
        belief = belief.with_positions(opened).with_object_pose(object_id, self.to_belief(pose))
        self.belief = self._rest(belief, object_id)
        if corrected:
            logger.info(f"Physics moved {object_id} after release")
        return pose

    def _rest(self, world: WorldState, object_id: str) -> WorldState:
        """Attach an object lying in a container region to the container link"""
        center = world.objects[object_id].pose.translation
        for name in sorted(world.environment.locations):
            location = world.location(name)
            if location.kind == "container" and world.location_contains(name, center, 0.02):
                return world.attach(object_id, location.link, tolerance=math.inf)
        return world

    def check_placed(self, object_id: str, region: str) -> None:
        """Raises a plan failure when a released object did not end up in its region"""
        if self.on_floor(object_id):
            raise PlanFailure(FailureCategory.UNRECOVERABLE, f"{object_id} fell to the floor")
        center = self.truth.objects[object_id].pose.translation
        if not self.truth.location_contains(region, center, 0.02):
            raise PlanFailure(FailureCategory.MANIPULATION, f"{object_id} ended up outside {region}")

    def open_gripper(self, ctx: TaskContext, arm: str, opening: float) -> Generator:
        self._command(ctx)
        info = self.robot.arms[arm]
        yield from self.advance(ctx, self.config.gripper_time, "manipulation")
        opened = {info.gripper_dof: opening}
        self.truth = self.truth.with_positions(opened)
        self.belief = self.belief.with_positions(opened)

    def grip_handle(self, ctx: TaskContext, container: str, arm: str, width: float) -> Generator:
        """Close the gripper on a container handle.

        Raises:
            PlanFailure: env-manipulation failure when the fingers miss the handle
        """
        self._command(ctx)
        info = self.robot.arms[arm]
        yield from self.advance(ctx, self.config.gripper_time, "manipulation")
        tool = self.truth.link_transform(info.tool_frame)[:3, 3]
        handle = self.truth.handle_transform(container)[:3, 3]
        misalignment = float(np.linalg.norm(tool - handle))
        if misalignment > self.config.handle_tolerance:
            self._close_empty(ctx, arm)
            raise PlanFailure(
                FailureCategory.ENV_MANIPULATION,
                f"missed the handle of {container} by {misalignment:.3f} m",
            )
        closed = {info.gripper_dof: width}
        self.truth = self.truth.with_positions(closed)
        self.belief = self.belief.with_positions(closed)

    def articulate(self, ctx: TaskContext, spec: MotionGoalSpec) -> Generator:
        """Open or close a container with a whole-body motion following its joint.

        Raises:
            PlanFailure: env-manipulation failure when the motion does not
                converge or the handle slips halfway
        """
        self._command(ctx)
        result = self.plan_motion(spec)
        if not result.converged:
            raise PlanFailure(FailureCategory.ENV_MANIPULATION, f"{spec.type} {spec.container} failed: {result.reason}")
        if not self.projection and self.disturbances.handle_slips(spec.container, self.rng):
            half = len(result.trajectory) // 2
            yield from self.advance(ctx, 0.5 * result.trajectory.duration, "manipulation")
            self.commit(self.belief.with_positions(result.trajectory.at(half)))
            self._close_empty(ctx, spec.arm)
            ctx.post("handle-slipped", {"container": spec.container})
            raise PlanFailure(FailureCategory.ENV_MANIPULATION, f"the handle of {spec.container} slipped")
        yield from self.advance(ctx, result.trajectory.duration, "manipulation")
        self.commit(result.world)
        return result

    # ------------------------------------------------------------------
    # Postures and tool poses
    # ------------------------------------------------------------------

    def park_spec(self, arm: str) -> MotionGoalSpec:
        info = self.robot.arms[arm]
        goals = {dof: self.robot.park.get(dof, 0.0) for dof in info.dofs}
        return MotionGoalSpec("moving-arm", joint_goals=goals, arm=arm)

    def carry_spec(self, arm: str) -> MotionGoalSpec:
        """Arm tucked in front of the robot with the tool pitch of the grasp kept"""
        cfg = self.config
        info = self.robot.arms[arm]
        pan, lift, elbow, wrist = info.dofs
        tree = self.robot.tree
        pitch = sum(self.belief.positions[d] for d in (lift, elbow, wrist))
        i = tree.dof_index(wrist)
        goals = {
            pan: 0.0,
            lift: cfg.carry_lift,
            elbow: cfg.carry_elbow,
            wrist: float(np.clip(pitch - cfg.carry_lift - cfg.carry_elbow, tree.lower[i], tree.upper[i])),
        }
        return MotionGoalSpec("moving-arm", joint_goals=goals, arm=arm)

    def placement_tool_poses(self, object_id: str, arm: str, placement: Pose) -> Tuple[Pose, Pose, Pose]:
        """(preplace, place, retreat) tool poses putting a held object's center at ``placement``.

        The grasp pitch is kept; the tool yaw turns to the azimuth from the
        shoulder, the only yaw the arm reaches.
        """
        world = self.belief
        info = self.robot.arms[arm]
        held = world.objects[object_id]
        rot = world.link_transform(info.tool_frame)[:3, :3]
        heading = math.atan2(-rot[0, 1], rot[1, 1])
        shoulder = shoulder_position(world, arm)
        position = placement.translation
        target = rot
        for _ in range(3):
            tool = position - target @ held.attach_offset.translation
            target = yaw_matrix(azimuth(shoulder, tool) - heading) @ rot
        tool = position - target @ held.attach_offset.translation
        place = Pose.from_rotation_matrix(tool, target)
        preplace = Pose.from_rotation_matrix(tool + np.array([0.0, 0.0, self.config.preplace_height]), target)
        retreat = Pose.from_rotation_matrix(tool - target[:, 0] * self.config.retreat, target)
        return preplace, place, retreat

    def retreat_pose(self, arm: str) -> Pose:
        tool = self.belief.link_transform(self.robot.arms[arm].tool_frame)
        return Pose.from_rotation_matrix(tool[:3, 3] - tool[:3, 0] * self.config.retreat, tool[:3, :3])

    # ------------------------------------------------------------------
    # Candidates and episodes
    # ------------------------------------------------------------------

    def stream_context(self, task_key: str, **context: Any) -> Dict[str, Any]:
        """Query context with a seed that changes every time a task key is reasoned about again"""
        count = self._stream_counts.get(task_key, 0)
        self._stream_counts[task_key] = count + 1
        ctx = {key.replace("_", "-"): value for key, value in context.items() if value is not None}
        return {**ctx, "task-key": task_key, "seed": self.seed + 7919 * count}

    def candidates(self, stream: Callable[[], Iterable[Any]]) -> Iterator[Any]:
        """Iterate a candidate stream; a location that grounds to nothing just ends it"""
        try:
            for candidate in stream():
                yield candidate
        except (LocationUnreachable, EmptySupport) as exc:
            logger.info(f"Candidate stream ended: {exc}")

    def projected(self, action: Designator, bindings: Iterable[Dict[str, Any]]) -> Iterator[Dict[str, Any]]:
        """Bindings whose fully bound action succeeds in projection"""
        for binding in bindings:
            if self.projector is None:
                yield binding
                continue
            bound = action.extend({k: v for k, v in binding.items() if v is not None})
            failure = self.projector.validate(bound, self.belief)
            if failure is None:
                yield binding
            else:
                logger.info(f"Projection rejected {bound.describe()} with {binding}: {failure.category.value}")

    def project(self, action: Designator) -> Optional[PlanFailure]:
        """Project one fully bound action against the current belief"""
        return validate_by_projection(action, self.belief, self._projection_executive)

    def _projection_executive(self, world: WorldState) -> "PlanExecutive":
        return PlanExecutive(
            world,
            self.reasoner,
            self.planner,
            None,
            self.config,
            None,
            None,
            self.plans,
            self.seed,
            self.run_id,
            self.phase,
            self.settler,
            on_episode=self.on_episode,
            projection=True,
            motion_cache=self.motion_cache,
        )

    def attempt(self, task_key: str, binding: Dict[str, Any], body: Generator) -> Generator:
        """Run one parameterized attempt and log it as an episode"""
        start = dict(self.durations)
        try:
            value = yield from body
        except PlanFailure as failure:
            self.log_episode(task_key, binding, start, failure)
            raise
        self.log_episode(task_key, binding, start, None)
        return value

    def log_episode(
        self,
        task_key: str,
        binding: Dict[str, Any],
        start: Dict[str, float],
        failure: Optional[PlanFailure]
    ) -> Episode:
        episode = Episode(
            task_key=task_key,
            base_pose=tuple(binding["base-pose"]),
            outcome="success" if failure is None else "failure",
            grasp=binding.get("grasp"),
            arm=binding.get("arm"),
            failure_category=None if failure is None else failure.category.value,
            durations={p: self.durations[p] - start.get(p, 0.0) for p in PHASES},
            run_id=self.run_id,
            seed=self.seed,
            source="projection" if self.projection else "execution",
            task_id=None if failure is None else failure.task_id,
        )
        self.episodes.append(episode)
        if self.on_episode is not None:
            self.on_episode(episode)
        return episode

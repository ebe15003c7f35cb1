"""Unit tests for location heuristics, grasp inference, candidate streams and projection"""

import math

import numpy as np
import pytest

from src.models.designator import a_location, an_object
from src.models.domain import ConfigError, FailureCategory, LocationUnreachable, PlanFailure, Pose
from src.reasoner.engine import (
    ParameterQuery,
    load_heuristic_reasoner,
    mobile_pick_bindings,
    stream_seed,
    tiered
)
from src.reasoner.heuristics import occupancy
from src.reasoner.distributions import PoseGrid
from src.reasoner.projection import ProjectionImpure, Projector
from src.planlang.interpreter import Outcome
from src.planlang.tasks import TaskStatus
from tests.conftest import CONFIG_DIR, make_object

ISLAND_CUP = Pose.from_xyz_rpy([1.5, 4.2, 0.935])


@pytest.fixture(scope="module")
def reasoner():
    return load_heuristic_reasoner(CONFIG_DIR / "reasoner.yaml", seed=3)


def _cup(pose=ISLAND_CUP):
    return an_object(type="cup", name="cup-1", pose=pose)


def test_arm_order_follows_laterality(reasoner, world):
    """Targets on the robot's left get the left arm first"""
    left = ParameterQuery("picking-up", "arm", {"object": _cup(Pose.from_xyz_rpy([3.9, 2.0, 0.9]))}, world)
    right = ParameterQuery("picking-up", "arm", {"object": _cup(Pose.from_xyz_rpy([3.9, 1.2, 0.9]))}, world)
    assert list(reasoner.infer(left)) == ["left", "right"]
    assert list(reasoner.infer(right)) == ["right", "left"]


def test_busy_arm_is_not_offered(reasoner, world):
    """An arm holding an object is excluded"""
    info = world.robot.arms["left"]
    tool = world.link_transform(info.tool_frame)[:3, 3]
    held = world.with_object(make_object(world, "milk-1", "milk", tool)).attach("milk-1", info.tool_frame, tolerance=math.inf)
    query = ParameterQuery("picking-up", "arm", {"object": _cup(Pose.from_xyz_rpy([3.9, 2.0, 0.9]))}, held)
    assert list(reasoner.infer(query)) == ["right"]


def test_spoon_has_only_a_top_grasp(reasoner, world):
    query = ParameterQuery("picking-up", "grasp", {"object": an_object(type="spoon")}, world)
    assert list(reasoner.infer(query)) == ["spoon-top"]


def test_grasps_follow_catalog_priority(reasoner, world):
    query = ParameterQuery("picking-up", "grasp", {"object": an_object(type="cup")}, world)
    assert list(reasoner.infer(query)) == ["cup-side", "cup-top"]


def test_cup_gripper_opening(reasoner, world):
    """Opening is the cup diameter plus clearance"""
    query = ParameterQuery("picking-up", "gripper-opening", {"object": an_object(type="cup")}, world)
    assert next(reasoner.infer(query)) == pytest.approx(0.09)


def test_grasping_force_of_bound_grasp(reasoner, world):
    query = ParameterQuery("picking-up", "grasping-force", {"object": an_object(type="cup"), "grasp": "cup-top"}, world)
    assert next(reasoner.infer(query)) == pytest.approx(30.0)


def test_query_rejects_inapplicable_parameter(world):
    with pytest.raises(ValueError):
        ParameterQuery("navigating", "grasp", {}, world)
    with pytest.raises(ValueError):
        ParameterQuery("juggling", "arm", {}, world)


def test_base_pose_stream_is_deterministic(reasoner, world):
    """Same seed and task key give the same candidates; another key reshuffles"""
    context = {"location": a_location(reachable_for=_cup()), "task-key": "picking-up:cup@kitchen-island", "seed": 3}
    first = list(reasoner.infer(ParameterQuery("picking-up", "base-pose", context, world)))
    second = list(reasoner.infer(ParameterQuery("picking-up", "base-pose", context, world)))
    other = list(reasoner.infer(ParameterQuery(
        "picking-up", "base-pose", {**context, "task-key": "picking-up:cup@dining-table"}, world,
    )))
    assert first == second
    assert len(first) == 12
    assert first != other


def test_stream_seed_depends_on_key():
    a = stream_seed(1, "opening:iai-fridge").random(4)
    b = stream_seed(1, "opening:iai-fridge").random(4)
    c = stream_seed(1, "closing:iai-fridge").random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_reachable_poses_lie_in_annulus_and_face_target(reasoner, world):
    dist = reasoner.ground_location(a_location(reachable_for=_cup()), world)
    cfg = reasoner.grounder.config
    for x, y, theta in dist.sample(np.random.default_rng(0), 40, replace=False):
        distance = math.hypot(x - 1.5, y - 4.2)
        assert cfg.reach_inner - 1e-9 <= distance <= cfg.reach_outer + 1e-9
        bearing = math.atan2(4.2 - y, 1.5 - x)
        delta = (bearing - theta + math.pi) % (2 * math.pi) - math.pi
        assert abs(delta) <= cfg.reach_heading + math.pi / cfg.theta_bins
        grid = PoseGrid(x - 0.025, y - 0.025, 1, 1, 0.05, 1)
        assert not occupancy(world, grid, cfg.base_radius)[0, 0]


def test_unreachable_target_raises(reasoner, world):
    far = an_object(type="cup", name="cup-1", pose=Pose.from_xyz_rpy([40.0, 40.0, 0.9]))
    with pytest.raises(LocationUnreachable) as exc:
        reasoner.ground_location(a_location(reachable_for=far), world)
    assert exc.value.category == FailureCategory.NAVIGATION


def test_placement_on_requested_spot(reasoner, world):
    """A target pose fixes x and y; z rests the held object on the surface"""
    info = world.robot.arms["right"]
    tool = world.link_transform(info.tool_frame)[:3, 3]
    held = world.with_object(make_object(world, "cup-1", "cup", tool)).attach("cup-1", info.tool_frame, tolerance=math.inf)
    target = a_location(on="dining-table", pose=Pose.from_xyz_rpy([4.0, 2.7, 0.0]))
    context = {"object": an_object(type="cup", name="cup-1"), "target": target}
    pose = next(reasoner.infer(ParameterQuery("placing", "placement-pose", context, held)))
    assert pose.translation[:2] == pytest.approx([4.0, 2.7])
    assert pose.translation[2] == pytest.approx(0.75 + 0.065 + 0.005)


def test_sampled_placements_stay_inside_region(reasoner, world):
    context = {"object": an_object(type="bowl"), "target": a_location(on="side-table"), "task-key": "placing:bowl@side-table"}
    poses = list(reasoner.infer(ParameterQuery("placing", "placement-pose", context, world)))
    assert poses
    for pose in poses:
        assert world.location_contains("side-table", pose.translation)


def test_mobile_pick_bindings_vary_base_slowest(reasoner, world):
    context = {"object": _cup(), "location": a_location(reachable_for=_cup()), "task-key": "picking-up:cup@kitchen-island"}
    bindings = list(mobile_pick_bindings(reasoner, "picking-up", context, world))
    bases = [b["base-pose"] for b in bindings]
    # every base pose yields a contiguous block of arm x grasp bindings
    assert len(bindings) == 12 * 2 * 2
    assert bases[:4] == [bases[0]] * 4
    assert {b["grasp"] for b in bindings[:4]} == {"cup-side", "cup-top"}


def test_mobile_pick_bindings_respect_bound_parameters(reasoner, world):
    base = (1.5, 3.5, math.pi / 2)
    context = {
        "object": _cup(), "location": a_location(reachable_for=_cup()),
        "base-pose": base, "arm": "left", "grasp": "cup-top",
    }
    assert list(mobile_pick_bindings(reasoner, "picking-up", context, world)) == [
        {"base-pose": base, "arm": "left", "grasp": "cup-top"}
    ]


def test_opening_bindings_leave_grasp_open(reasoner, world):
    context = {"container": "iai-fridge", "location": a_location(reachable_for="iai-fridge"), "task-key": "opening:iai-fridge"}
    bindings = list(mobile_pick_bindings(reasoner, "opening", context, world))
    assert bindings
    assert all(b["grasp"] is None for b in bindings)


def test_tiered_caps_spend_per_tier():
    """Each tier spends its own retry budget; an exhausted base tier ends the stream"""
    stream = [
        {"base-pose": b, "arm": a, "grasp": g}
        for b in ("b0", "b1", "b2") for a in ("left", "right") for g in ("g1", "g2")
    ]
    kept = list(tiered(stream, {"grasp": 1, "arm": 1, "base-pose": 1}))
    assert kept == [
        {"base-pose": "b0", "arm": "left", "grasp": "g1"},
        {"base-pose": "b0", "arm": "left", "grasp": "g2"},
        {"base-pose": "b0", "arm": "right", "grasp": "g1"},
        {"base-pose": "b1", "arm": "left", "grasp": "g1"},
    ]


def test_tiered_without_budget_keeps_first_binding():
    stream = [{"base-pose": b, "arm": "left", "grasp": "g"} for b in ("b0", "b1")]
    assert list(tiered(stream, {})) == [stream[0]]


def test_malformed_streams_section_raises(tmp_path):
    path = tmp_path / "reasoner.yaml"
    path.write_text((CONFIG_DIR / "reasoner.yaml").read_text().replace("arms: 2", "arms: 0"))
    with pytest.raises(ConfigError):
        load_heuristic_reasoner(path)


class _StubRun:
    def __init__(self, failure=None):
        self.failure = failure

    def run(self, action):
        status = TaskStatus.SUCCEEDED if self.failure is None else TaskStatus.FAILED
        return Outcome(status, None, self.failure, 0)


def test_projection_reports_failures(world):
    failure = PlanFailure(FailureCategory.GRASP, "projected")
    projector = Projector(lambda clone: _StubRun(failure))
    assert projector.validate(an_object(type="cup"), world) is failure
    assert Projector(lambda clone: _StubRun()).validate(an_object(type="cup"), world) is None
    assert projector.runs == 1 and projector.rejections == 1


def test_projection_receives_a_clone(world):
    seen = []

    def factory(clone):
        seen.append(clone)
        clone.positions["base/x"] = 0.0
        return _StubRun()

    before = world.state_hash()
    Projector(factory).validate(an_object(type="cup"), world)
    assert seen[0] is not world
    assert world.state_hash() == before


def test_impure_projection_is_detected(world):
    """Touching the validated world itself is an error"""
    scene = world.with_positions({})
    with pytest.raises(ProjectionImpure):
        Projector(lambda clone: _mutating(scene)).validate(an_object(type="cup"), scene)


def _mutating(scene):
    scene.positions["base/x"] += 0.5
    return _StubRun()

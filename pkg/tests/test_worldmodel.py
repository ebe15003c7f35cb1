"""Unit tests for the kinematic world model"""

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.models.domain import ConfigError, FailureCategory, KinematicsError, PlanFailure, Pose
from src.worldmodel.geometry import Shape, closest_points
from src.worldmodel.kinematics import Joint, JointType, KinematicTree, Link
from src.worldmodel.loader import load_environment
from src.worldmodel.world import ArticulatedContainer
from src.worldmodel.settle import settle
from tests.conftest import CONFIG_DIR, make_object


def _simple_tree():
    links = [Link("a"), Link("b"), Link("c")]
    joints = [
        Joint("j", JointType.REVOLUTE, "a", "b", axis=np.array([0.0, 0.0, 1.0]), lower=-3.0, upper=3.0),
        Joint("k", JointType.FIXED, "b", "c", origin=Pose.from_xyz_rpy([1.0, 0.0, 0.0])),
    ]
    return KinematicTree("simple", links, joints)


def test_fixed_chain_identity():
    """Fixed identity joints give the identity pose"""
    tree = KinematicTree("fixed", [Link("a"), Link("b")], [Joint("f", JointType.FIXED, "a", "b")])
    assert np.allclose(tree.forward_kinematics(np.zeros(0), "b"), np.eye(4))
    assert np.allclose(tree.jacobian(np.zeros(0), "b"), 0.0)


def test_revolute_quarter_turn():
    """Revolute joint at pi/2 moves a child offset (1,0,0) to (0,1,0)"""
    tree = _simple_tree()
    m = tree.forward_kinematics(np.array([math.pi / 2]), "c")
    assert np.allclose(m[:3, 3], [0.0, 1.0, 0.0], atol=1e-12)


def test_prismatic_jacobian_column():
    """Prismatic joint along x contributes a pure linear column"""
    tree = KinematicTree(
        "slide",
        [Link("a"), Link("b")],
        [Joint("p", JointType.PRISMATIC, "a", "b", axis=np.array([1.0, 0.0, 0.0]), lower=0.0, upper=1.0)],
    )
    jac = tree.jacobian(np.array([0.3]), "b")
    assert np.allclose(jac[:, 0], [1.0, 0.0, 0.0, 0.0, 0.0, 0.0])


def test_tree_rejects_cycles_and_two_roots():
    """Trees need one root and no cycles"""
    with pytest.raises(KinematicsError):
        KinematicTree("two-roots", [Link("a"), Link("b")], [])
    with pytest.raises(KinematicsError):
        KinematicTree(
            "cycle",
            [Link("r"), Link("a"), Link("b")],
            [Joint("x", JointType.FIXED, "a", "b"), Joint("y", JointType.FIXED, "b", "a")],
        )


def test_fk_composition(base_world, rng):
    """FK of a child equals FK of its parent composed with the joint transform"""
    tree = base_world.robot.tree
    for _ in range(20):
        q = rng.uniform(np.maximum(tree.lower, -2.0), np.minimum(tree.upper, 2.0))
        transforms = tree.link_transforms(q)
        for joint in tree.joints.values():
            dofs = tree.joint_dofs(joint.name)
            expected = transforms[joint.parent] @ joint.origin.matrix() @ joint.motion(q[dofs])
            assert np.allclose(transforms[joint.child], expected, atol=1e-9)


def test_jacobian_matches_finite_differences(base_world, rng):
    """Geometric Jacobian agrees with central differences of FK"""
    tree = base_world.robot.tree
    h = 1e-6
    for _ in range(100):
        q = rng.uniform(np.maximum(tree.lower, -2.0), np.minimum(tree.upper, 2.0))
        link = "r_tool_frame" if rng.random() < 0.5 else "l_palm_link"
        jac = tree.jacobian(q, link)
        for i in range(tree.dof_count):
            dq = np.zeros(tree.dof_count)
            dq[i] = h
            plus = tree.forward_kinematics(q + dq, link)
            minus = tree.forward_kinematics(q - dq, link)
            linear = (plus[:3, 3] - minus[:3, 3]) / (2 * h)
            angular = Rotation.from_matrix(plus[:3, :3] @ minus[:3, :3].T).as_rotvec() / (2 * h)
            assert np.allclose(jac[:3, i], linear, atol=1e-6)
            assert np.allclose(jac[3:, i], angular, atol=1e-6)


def test_unknown_link_raises(world):
    """Unknown links are reported"""
    with pytest.raises(KinematicsError):
        world.forward_kinematics("no_such_link")


def test_sphere_distance():
    """Separated and penetrating spheres"""
    s = Shape.sphere(0.1)
    apart = closest_points(s, Pose.from_xyz_rpy([0.5, 0.0, 0.0]), s, Pose.identity())
    assert apart.distance == pytest.approx(0.3)
    assert np.allclose(apart.normal, [1.0, 0.0, 0.0])
    overlap = closest_points(s, Pose.identity(), s, Pose.from_xyz_rpy([0.1, 0.0, 0.0]))
    assert overlap.distance == pytest.approx(-0.1)


def test_closest_points_symmetry(rng):
    """Swapping arguments swaps the points and negates the normal"""
    shapes = [Shape.sphere(0.05), Shape.capsule(0.04, 0.1), Shape.box(0.1, 0.05, 0.2)]
    for _ in range(50):
        a, b = rng.choice(len(shapes), size=2)
        pa = Pose.from_xyz_rpy(rng.uniform(-0.3, 0.3, 3), rng.uniform(-math.pi, math.pi, 3))
        pb = Pose.from_xyz_rpy(rng.uniform(-0.3, 0.3, 3), rng.uniform(-math.pi, math.pi, 3))
        ab = closest_points(shapes[a], pa, shapes[b], pb)
        ba = closest_points(shapes[b], pb, shapes[a], pa)
        assert ab.distance == pytest.approx(ba.distance, abs=1e-9)
        if ab.distance > 1e-6:
            assert np.allclose(ab.normal, -ba.normal, atol=1e-6)
            assert np.allclose(ab.point_a, ba.point_b, atol=1e-6)


def test_box_sphere_against_clamping(rng):
    """Box vs sphere distance matches clamping the center into the box"""
    box = Shape.box(0.2, 0.1, 0.05)
    sphere = Shape.sphere(0.03)
    for _ in range(50):
        box_pose = Pose.from_xyz_rpy(rng.uniform(-0.1, 0.1, 3), rng.uniform(-math.pi, math.pi, 3))
        center = rng.uniform(-0.6, 0.6, 3)
        local = box_pose.inverse().transform_point(center)
        clamped = np.clip(local, -np.array(box.half_extents), box.half_extents)
        outside = np.linalg.norm(local - clamped)
        if outside < 1e-3:
            continue
        contact = closest_points(box, box_pose, sphere, Pose.from_xyz_rpy(center))
        assert contact.distance == pytest.approx(outside - 0.03, abs=1e-4)
        assert contact.point_a - contact.point_b == pytest.approx(contact.distance * contact.normal, abs=1e-6)


def test_attached_object_follows_link(world):
    """An object attached at the tool frame moves with it"""
    tool = world.forward_kinematics("r_tool_frame")
    cup = make_object(world, "cup-1", "cup", tool.translation)
    held = world.with_object(cup).attach("cup-1", "r_tool_frame")
    moved = held.with_positions({"r_shoulder_pan": -0.5, "torso_lift": 0.2})
    expected = moved.link_transform("r_tool_frame") @ held.object("cup-1").attach_offset.matrix()
    assert np.allclose(moved.object("cup-1").pose.matrix(), expected, atol=1e-9)
    assert moved.audit() == []


def test_attach_beyond_tolerance_is_grasp_failure(world):
    """Attaching 0.2 m away from the gripper fails as a grasp failure"""
    tool = world.forward_kinematics("r_tool_frame")
    cup = make_object(world, "cup-1", "cup", tool.translation + np.array([0.2, 0.0, 0.0]))
    with pytest.raises(PlanFailure) as excinfo:
        world.with_object(cup).attach("cup-1", "r_tool_frame")
    assert excinfo.value.category == FailureCategory.GRASP


def test_detach_above_table_settles_on_table(base_world):
    """A cup released over the dining table comes to rest on it"""
    near_table = base_world.with_positions({"base/x": 3.55, "base/y": 3.0, "base/theta": 0.0})
    tool = near_table.forward_kinematics("r_tool_frame")
    cup = make_object(near_table, "cup-1", "cup", tool.translation)
    held = near_table.with_object(cup).attach("cup-1", "r_tool_frame")
    released = held.detach("cup-1")
    pose, _ = settle(released, "cup-1")
    assert released.location_contains("dining-table", pose.translation, margin=0.05)
    assert 0.75 < pose.translation[2] < 0.86


def test_settle_resting_object_is_fixed_point(world):
    """An object already resting on the table stays put"""
    cup = make_object(world, "cup-1", "cup", [4.2, 3.0, 0.75 + 0.065])
    placed = world.with_object(cup)
    pose, significant = settle(placed, "cup-1")
    assert not significant
    assert np.allclose(pose.translation, cup.pose.translation, atol=1e-9)


def test_settle_drops_to_support(world):
    """An object 0.1 m above the table drops onto it"""
    cup = make_object(world, "cup-1", "cup", [4.2, 3.0, 0.75 + 0.065 + 0.10])
    pose, significant = settle(world.with_object(cup), "cup-1")
    assert not significant
    assert pose.translation[2] == pytest.approx(0.815, abs=0.002)


def test_settle_pushes_out_of_slab(world):
    """A box spawned deep inside the table top is pushed out and flagged"""
    cereal = make_object(world, "cereal-1", "cereal", [4.2, 3.0, 0.75 + 0.15 - 0.08])
    placed = world.with_object(cereal)
    pose, significant = settle(placed, "cereal-1")
    assert significant
    assert pose.translation[2] == pytest.approx(0.90, abs=0.003)
    settled = placed.with_object_pose("cereal-1", pose)
    assert settled.audit() == []


def test_settle_small_push_not_significant(world):
    """Two centimeters of penetration are corrected silently"""
    milk = make_object(world, "milk-1", "milk", [4.2, 3.0, 0.75 + 0.10 - 0.02])
    pose, significant = settle(world.with_object(milk), "milk-1")
    assert not significant
    assert pose.translation[2] == pytest.approx(0.85, abs=0.003)


def test_settle_idempotent(world):
    """Settling a settled pose changes nothing"""
    cup = make_object(world, "cup-1", "cup", [4.2, 3.0, 1.0])
    placed = world.with_object(cup)
    first, _ = settle(placed, "cup-1")
    again, flag = settle(placed.with_object_pose("cup-1", first), "cup-1")
    assert not flag
    assert np.allclose(first.matrix(), again.matrix(), atol=1e-9)


def test_settle_rejects_attached(world):
    """Held objects cannot be settled"""
    tool = world.forward_kinematics("r_tool_frame")
    cup = make_object(world, "cup-1", "cup", tool.translation)
    held = world.with_object(cup).attach("cup-1", "r_tool_frame")
    with pytest.raises(ValueError):
        settle(held, "cup-1")


def test_loader_checks_format_tag(tmp_path):
    """Scene files need the format tag"""
    path = tmp_path / "env.yaml"
    path.write_text((CONFIG_DIR / "apartment.yaml").read_text().replace("kinematic-scene/1", "kinematic-scene/0"))
    with pytest.raises(ConfigError):
        load_environment(path)


def test_container_states(world):
    """Drawer state follows its joint position"""
    drawer = "sink-area-left-upper-drawer"
    assert world.container_state(drawer) == "closed"
    opened = world.with_positions({world.container(drawer).joint: 0.4})
    assert opened.container_state(drawer) == "open"
    ajar = world.with_positions({world.container(drawer).joint: 0.2})
    assert ajar.container_state(drawer) == "ajar"


def test_pose_quaternion_must_be_unit_to_machine_precision():
    assert np.allclose(Pose(np.zeros(3), [0.0, 0.0, 0.0, 1.0 + 5e-10]).rotation, [0.0, 0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        Pose(np.zeros(3), [0.0, 0.0, 0.0, 1.0 + 1e-7])
    with pytest.raises(ValueError):
        Pose(np.zeros(3), [0.0, 0.0, 0.0, 0.0])


def test_dishwasher_is_a_revolute_dishwasher_door(base_world):
    dishwasher = base_world.container("dishwasher")
    assert dishwasher.kind == "dishwasher-door"
    assert base_world.environment.tree.joints[dishwasher.joint].type.value == "revolute"
    assert base_world.container_state("dishwasher") == "closed"


def test_container_kind_must_match_its_joint(tmp_path):
    """A drawer on a revolute joint or an unknown kind is rejected"""
    text = (CONFIG_DIR / "apartment.yaml").read_text()
    path = tmp_path / "env.yaml"
    path.write_text(text.replace("kind: dishwasher-door", "kind: drawer"))
    with pytest.raises(ConfigError):
        load_environment(path)
    with pytest.raises(ValueError):
        ArticulatedContainer("oven", "oven_joint", "oven-door", "oven", Pose.identity(), 1.0)

"""Unit tests for simulated perception and pose estimation"""

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.models.designator import an_object
from src.models.domain import FailureCategory, PCADegenerate, PlanFailure, Pose
from src.perception.cloud import PointCloud, camera_looking_at, render_cloud
from src.perception.detector import Detector
from src.perception.estimator import DetectionResult, PerceptionConfig, PoseEstimator, orientation_error
from src.perception.registration import axis_candidates, icp, kabsch, pca_axes
from src.worldmodel.geometry import Shape, structured_surface_points
from src.worldmodel.settle import settle
from src.worldmodel.world import SceneObject
from tests.conftest import make_object

RESTING_TYPES = {
    # object type -> stable orientations (rpy) on a flat surface
    "cup": [(0.0, 0.0, 0.0), (math.pi / 2, 0.0, 0.0)],
    "milk": [(0.0, 0.0, 0.0), (math.pi / 2, 0.0, 0.0), (0.0, math.pi / 2, 0.0)],
    "cereal": [(0.0, 0.0, 0.0), (math.pi / 2, 0.0, 0.0), (0.0, math.pi / 2, 0.0)],
    "bowl": [(0.0, 0.0, 0.0), (math.pi, 0.0, 0.0)],
}


@pytest.fixture(scope="module")
def estimator():
    return PoseEstimator(PerceptionConfig())


def _resting(world, object_id, object_type, x, y, rpy):
    """Object dropped onto the dining table and settled"""
    obj = make_object(world, object_id, object_type, [x, y, 0.95], rpy)
    placed = world.with_object(obj)
    pose, _ = settle(placed, object_id)
    return placed.with_object_pose(object_id, pose)


def _model_cloud(shape, pose, source=None):
    points = structured_surface_points(shape, 500)[0]
    m = pose.matrix()
    return PointCloud(points @ m[:3, :3].T + m[:3, 3], Pose.identity(), source)


def test_render_noiseless_sphere_on_surface(world):
    """Noise-free points lie on the sphere surface"""
    ball = SceneObject("ball-1", "ball", Shape.sphere(0.05), Pose.from_xyz_rpy([4.2, 3.0, 0.80]))
    scene = world.with_object(ball)
    camera = camera_looking_at([3.5, 3.0, 1.3], ball.pose.translation)
    cloud = render_cloud(scene, camera, "ball-1", rng=np.random.default_rng(1))
    assert len(cloud) > 100
    radii = np.linalg.norm(cloud.to_world() - ball.pose.translation, axis=1)
    assert np.allclose(radii, 0.05, atol=1e-9)
    # only the camera-facing half is seen
    facing = (cloud.to_world() - ball.pose.translation) @ (camera.translation - ball.pose.translation)
    assert np.all(facing > 0)


def test_render_occluded_object_is_empty(world):
    """An object on the floor behind the kitchen island cannot be seen"""
    cup = make_object(world, "cup-1", "cup", [1.5, 5.1, 0.065])
    scene = world.with_object(cup)
    camera = camera_looking_at([1.5, 3.0, 1.2], cup.pose.translation)
    assert render_cloud(scene, camera, "cup-1", rng=np.random.default_rng(1)).empty


def test_render_outside_view_is_empty(world):
    """An object behind the camera is not rendered"""
    cup = make_object(world, "cup-1", "cup", [4.2, 3.0, 0.815])
    scene = world.with_object(cup)
    camera = camera_looking_at([3.5, 3.0, 1.3], [2.0, 3.0, 1.3])
    assert render_cloud(scene, camera, "cup-1").empty


def test_render_noise_magnitude(world):
    """Isotropic noise of sigma gives an RMS point displacement of sigma * sqrt(3)"""
    box = make_object(world, "cereal-1", "cereal", [4.2, 3.0, 0.90])
    scene = world.with_object(box)
    camera = camera_looking_at([3.4, 3.0, 1.5], box.pose.translation)
    clean = render_cloud(scene, camera, "cereal-1", 0.0, 0.0, np.random.default_rng(5))
    noisy = render_cloud(scene, camera, "cereal-1", 0.003, 0.0, np.random.default_rng(5))
    assert len(clean) == len(noisy)
    rms = math.sqrt(np.mean(np.sum((noisy.points - clean.points) ** 2, axis=1)))
    assert rms == pytest.approx(0.003 * math.sqrt(3), rel=0.1)


def test_render_dropout_fraction(world):
    """Dropout removes about the configured fraction"""
    box = make_object(world, "cereal-1", "cereal", [4.2, 3.0, 0.90])
    scene = world.with_object(box)
    camera = camera_looking_at([3.4, 3.0, 1.5], box.pose.translation)
    full = render_cloud(scene, camera, "cereal-1", 0.0, 0.0, np.random.default_rng(5))
    thinned = render_cloud(scene, camera, "cereal-1", 0.0, 0.5, np.random.default_rng(5))
    assert len(thinned) / len(full) == pytest.approx(0.5, abs=0.1)


def test_cloud_xyz_export(tmp_path):
    """Clouds round-trip through XYZ text files"""
    cloud = PointCloud(np.array([[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]]))
    path = tmp_path / "cloud.xyz"
    cloud.to_xyz(path)
    assert np.allclose(PointCloud.from_xyz(path).points, cloud.points)


def test_pca_box_axes():
    """A 0.3 x 0.2 x 0.1 box cloud has principal axes along x, y, z"""
    points = structured_surface_points(Shape.box(0.15, 0.1, 0.05), 600)[0]
    centroid, axes, values = pca_axes(points)
    assert np.allclose(centroid, 0.0, atol=1e-9)
    assert abs(axes[:, 0] @ [1, 0, 0]) == pytest.approx(1.0, abs=1e-9)
    assert abs(axes[:, 1] @ [0, 1, 0]) == pytest.approx(1.0, abs=1e-9)
    assert abs(axes[:, 2] @ [0, 0, 1]) == pytest.approx(1.0, abs=1e-9)
    assert values[0] >= values[1] >= values[2]


def test_pca_axes_orthonormal_right_handed(rng):
    """Axes form a proper rotation"""
    points = rng.normal(size=(200, 3)) * [0.3, 0.2, 0.1]
    _, axes, _ = pca_axes(points)
    assert np.allclose(axes.T @ axes, np.eye(3), atol=1e-9)
    assert np.linalg.det(axes) == pytest.approx(1.0)


def test_pca_degenerate():
    """Collinear and tiny clouds have no principal axes"""
    with pytest.raises(PCADegenerate):
        pca_axes(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [3.0, 3.0, 3.0]]))
    with pytest.raises(PCADegenerate):
        pca_axes(np.zeros((3, 3)))


def test_axis_candidates():
    """24 (or 12) distinct proper rotations, identity first"""
    full = axis_candidates("all-24")
    reduced = axis_candidates("even-12")
    assert len(full) == 24
    assert len(reduced) == 12
    for group in (full, reduced):
        matrices = [c.matrix() for c in group]
        assert all(np.linalg.det(m) == pytest.approx(1.0) for m in matrices)
        keys = {tuple(np.round(m).astype(int).ravel()) for m in matrices}
        assert len(keys) == len(group)
        assert np.allclose(matrices[0], np.eye(3))
    with pytest.raises(ValueError):
        axis_candidates("all-48")


def test_kabsch_recovers_transform(rng):
    """Known rigid transform is recovered from paired points"""
    source = rng.normal(size=(50, 3))
    rotation = Rotation.from_rotvec([0.3, -0.5, 0.8]).as_matrix()
    target = source @ rotation.T + [0.1, 0.2, -0.3]
    r, t = kabsch(source, target)
    assert np.allclose(r, rotation, atol=1e-9)
    assert np.allclose(t, [0.1, 0.2, -0.3], atol=1e-9)


def test_icp_fixed_point():
    """Identical clouds register to the identity with zero score"""
    model = structured_surface_points(Shape.box(0.1, 0.035, 0.15), 500)[0]
    result = icp(model, model)
    assert np.allclose(result.transform, np.eye(4), atol=1e-12)
    assert result.score <= 1e-12


def test_icp_recovers_small_rotation():
    """A 10 degree yaw is recovered from the identity"""
    model = structured_surface_points(Shape.box(0.1, 0.035, 0.15), 500)[0]
    rotation = Rotation.from_euler("z", 10, degrees=True)
    result = icp(model, rotation.apply(model))
    recovered = Rotation.from_matrix(result.transform[:3, :3])
    assert math.degrees((recovered.inv() * rotation).magnitude()) <= 0.5
    assert result.score <= 1e-8


def test_icp_symmetric_model_scores_equal():
    """A 90 degree turn of a square box is indistinguishable from no turn"""
    model = structured_surface_points(Shape.box(0.08, 0.08, 0.03), 500)[0]
    turned = Rotation.from_euler("z", 90, degrees=True).apply(model)
    assert icp(model, turned).score == pytest.approx(icp(model, model).score, abs=1e-9)


def test_orientation_error_respects_symmetry():
    """Symmetric turns have zero error, others do not"""
    cup = Shape.capsule(0.035, 0.03)
    flip = Rotation.from_euler("x", 180, degrees=True).as_matrix()
    spin = Rotation.from_euler("z", 40, degrees=True).as_matrix()
    assert orientation_error(cup, flip @ spin, np.eye(3)) == pytest.approx(0.0, abs=1e-9)
    cereal = Shape.box(0.1, 0.035, 0.15)
    assert orientation_error(cereal, flip, np.eye(3)) == pytest.approx(0.0, abs=1e-9)
    assert orientation_error(cereal, spin, np.eye(3)) == pytest.approx(math.radians(40), abs=1e-9)


def test_register_noiseless_exact(estimator):
    """A complete noise-free cloud registers exactly up to symmetry"""
    shape = Shape.box(0.1, 0.035, 0.15)
    truth = Pose.from_xyz_rpy([4.2, 3.0, 0.9], (0.0, 0.0, 0.0))
    registration = estimator.register(shape, _model_cloud(shape, truth))
    assert np.allclose(registration.transform[:3, 3], truth.translation, atol=1e-9)
    assert orientation_error(shape, registration.transform, truth.matrix()) <= 1e-6
    assert registration.score == min(registration.scores)


def test_register_equivariant(estimator, rng):
    """Moving the cloud rigidly moves the estimate the same way"""
    shape = Shape.box(0.1, 0.035, 0.15)
    start = Pose.from_xyz_rpy([0.3, -0.2, 0.5], (0.4, -0.3, 1.1))
    motion = Pose.from_xyz_rpy(rng.uniform(-1, 1, 3), rng.uniform(-math.pi, math.pi, 3))
    first = estimator.register(shape, _model_cloud(shape, start)).transform
    second = estimator.register(shape, _model_cloud(shape, motion.compose(start))).transform
    expected = motion.matrix() @ first
    assert np.allclose(second[:3, 3], expected[:3, 3], atol=1e-6)
    assert orientation_error(shape, second, expected) <= 1e-6


def test_estimate_cup_on_its_side(base_world, estimator):
    """A cup lying on its side is found within 1 cm and 5 degrees"""
    rng = np.random.default_rng(11)
    for _ in range(5):
        yaw = rng.uniform(-math.pi, math.pi)
        scene = _resting(base_world, "cup-1", "cup", 4.1 + rng.uniform(-0.1, 0.1), 3.0 + rng.uniform(-0.3, 0.3),
                         (math.pi / 2, 0.0, yaw))
        truth = scene.object("cup-1").pose
        camera = camera_looking_at([3.45, 3.0, 1.45], truth.translation)
        cloud = render_cloud(scene, camera, "cup-1", 0.002, 0.1, rng)
        result = estimator.estimate_pose("cup", cloud, scene)
        assert result.pose.distance_to(truth) <= 0.01
        assert orientation_error(scene.object("cup-1").shape, result.pose.matrix(), truth.matrix()) <= math.radians(5)
        assert result.score == min(result.candidate_scores)


@pytest.mark.slow
def test_estimate_arbitrary_scenes(base_world, estimator):
    """Fifty seeded resting scenes are estimated within 1 cm and 5 degrees"""
    rng = np.random.default_rng(2024)
    types = sorted(RESTING_TYPES)
    for k in range(50):
        object_type = types[k % len(types)]
        rpy = list(RESTING_TYPES[object_type][rng.integers(len(RESTING_TYPES[object_type]))])
        rpy[2] = rng.uniform(-math.pi, math.pi)
        scene = _resting(base_world, "obj-1", object_type, 4.1 + rng.uniform(-0.1, 0.1), 3.0 + rng.uniform(-0.4, 0.4), rpy)
        truth = scene.object("obj-1").pose
        camera = camera_looking_at([3.45, 3.0 + rng.uniform(-0.3, 0.3), 1.45], truth.translation)
        cloud = render_cloud(scene, camera, "obj-1", 0.002, 0.1, rng)
        result = estimator.estimate_pose(object_type, cloud, scene)
        shape = scene.object("obj-1").shape
        assert result.pose.distance_to(truth) <= 0.01, (k, object_type)
        assert orientation_error(shape, result.pose.matrix(), truth.matrix()) <= math.radians(5), (k, object_type)


def test_estimate_penetrating_fridge_shelf_is_corrected(base_world, estimator):
    """A milk estimate sunk into the fridge door shelf is pushed out by physics"""
    shape = base_world.environment.object_types["milk"].shape
    sunk = Pose.from_xyz_rpy([5.0, 0.62, 0.98])
    result = estimator.estimate_pose("milk", _model_cloud(shape, sunk), base_world)
    assert result.corrected
    placed = base_world.with_object(SceneObject("estimated-object", "milk", shape, result.pose))
    assert placed.audit() == []


def test_estimate_penetrating_table_is_corrected(world, estimator):
    """A cereal estimate 8 cm inside the table top is lifted onto it"""
    shape = world.environment.object_types["cereal"].shape
    sunk = Pose.from_xyz_rpy([4.2, 3.0, 0.82])
    result = estimator.estimate_pose("cereal", _model_cloud(shape, sunk), world)
    assert result.corrected
    assert result.pose.translation[2] == pytest.approx(0.90, abs=0.005)


def test_estimate_degenerate_cloud(world, estimator):
    """Too few points cannot be estimated"""
    with pytest.raises(PCADegenerate):
        estimator.estimate_pose("cup", PointCloud(np.zeros((2, 3))), world)


@pytest.fixture
def table_scene(base_world):
    """Red cup and a milk carton on the dining table"""
    scene = _resting(base_world, "cup-1", "cup", 4.0, 2.8, (0.0, 0.0, 0.0))
    return _resting(scene, "milk-1", "milk", 4.0, 3.3, (0.0, 0.0, 0.5))


def test_detect_by_type_and_color(table_scene):
    """A query for a red cup resolves to the visible red cup"""
    detector = Detector(PerceptionConfig())
    camera = camera_looking_at([3.3, 3.0, 1.4], [4.0, 3.0, 0.8])
    result = detector.detect(an_object(type="cup", color="red"), table_scene, camera, np.random.default_rng(3))
    assert result.object_id == "cup-1"
    assert result.designator["color"] == "red"
    assert result.designator["pose"] == result.pose
    assert result.pose.distance_to(table_scene.object("cup-1").pose) <= 0.01
    assert 0.0 < result.confidence <= 1.0


def test_detect_absent_object_fails(table_scene):
    """A query without a match is a perception failure"""
    detector = Detector(PerceptionConfig())
    camera = camera_looking_at([3.3, 3.0, 1.4], [4.0, 3.0, 0.8])
    with pytest.raises(PlanFailure) as excinfo:
        detector.detect(an_object(type="spoon"), table_scene, camera)
    assert excinfo.value.category == FailureCategory.PERCEPTION
    with pytest.raises(PlanFailure):
        detector.detect(an_object(type="cup", color="blue"), table_scene, camera)


def test_detect_deterministic(table_scene):
    """Identical seeds give identical detections"""
    detector = Detector(PerceptionConfig())
    camera = camera_looking_at([3.3, 3.0, 1.4], [4.0, 3.0, 0.8])
    first = detector.detect(an_object(type="milk"), table_scene, camera, np.random.default_rng(9))
    second = detector.detect(an_object(type="milk"), table_scene, camera, np.random.default_rng(9))
    assert first.pose == second.pose
    assert first.to_record() == second.to_record()


def test_detect_miss_frequency(base_world, monkeypatch):
    """Injected misses happen at about the configured rate"""
    scene = _resting(base_world, "spoon-1", "spoon", 4.0, 3.0, (0.0, 0.0, 0.3))
    detector = Detector(PerceptionConfig(miss_probability={"spoon": 0.3}))
    monkeypatch.setattr(detector.estimator, "estimate_pose", lambda *args: _stub_detection(scene))
    camera = camera_looking_at([3.3, 3.0, 1.4], [4.0, 3.0, 0.76])
    rng = np.random.default_rng(17)
    misses = 0
    trials = 300
    for _ in range(trials):
        try:
            detector.detect(an_object(type="spoon"), scene, camera, rng)
        except PlanFailure as exc:
            assert exc.category == FailureCategory.PERCEPTION
            misses += 1
    assert misses / trials == pytest.approx(0.3, abs=0.08)


def _stub_detection(scene):
    obj = scene.object("spoon-1")
    return DetectionResult(an_object(type="spoon"), obj.id, "spoon", obj.pose, 0.0, obj.color, 1.0, False, 0)


def test_detection_callback(table_scene):
    """Every detection is reported to the callback"""
    seen = []
    detector = Detector(PerceptionConfig(), on_detection=seen.append)
    camera = camera_looking_at([3.3, 3.0, 1.4], [4.0, 3.0, 0.8])
    detector.detect(an_object(type="cup"), table_scene, camera, np.random.default_rng(3))
    assert [r.object_id for r in seen] == ["cup-1"]
    assert seen[0].to_record()["type"] == "detection"


def test_config_validation():
    """Out-of-range settings are rejected"""
    with pytest.raises(ValueError):
        PerceptionConfig(candidate_mode="all-48")
    with pytest.raises(ValueError):
        PerceptionConfig(miss_probability={"spoon": 1.5})

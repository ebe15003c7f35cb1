"""Unit tests for episodic memory, Gaussian model fitting, combination and sampling"""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from src.models.designator import a_location, an_object
from src.models.domain import ConfigError, EmptySupport, Episode, InsufficientData, LogFormatError, Pose
from src.planlang.serialization import NdjsonWriter
from src.reasoner.distributions import PoseDistribution, PoseGrid
from src.reasoner.engine import ParameterQuery, load_heuristic_reasoner
from src.specialization.gaussian import (
    FitConfig,
    GaussianModel,
    combine,
    fit,
    fit_all,
    load_models,
    sample,
    save_models,
    specialize
)
from src.specialization.memory import EpisodicMemory, load_episodes, read_episodes
from src.specialization.reasoner import SpecializedReasoner, build_reasoner
from tests.conftest import CONFIG_DIR

KEY = "opening:sink-area-left-upper-drawer"


def _episode(pose, outcome="success", key=KEY, arm="right", grasp=None, **kwargs):
    category = None if outcome == "success" else kwargs.pop("failure_category", "grasp-failure")
    return Episode(key, tuple(pose), outcome, grasp=grasp, arm=arm, failure_category=category, **kwargs)


@pytest.fixture
def model():
    return GaussianModel("picking-up:cup@kitchen-island", [1.5, 3.5, math.pi / 2], 0.01 * np.eye(3), 50, ["right", "left"])


@pytest.fixture
def local_model():
    """Model centered inside the small grid"""
    return GaussianModel(KEY, [0.3, 0.25, 0.0], np.diag([0.04, 0.04, 0.5]), 20)


@pytest.fixture
def small_grid():
    return PoseGrid(0.0, 0.0, 6, 5, 0.1, 4)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def test_fit_recovers_known_gaussian():
    """Mean within three standard errors, variances close to the truth"""
    rng = np.random.default_rng(0)
    poses = np.array([1.0, 2.0, 0.5]) + 0.1 * rng.standard_normal((1000, 3))
    fitted = fit([_episode(p) for p in poses], KEY)
    bound = 3 * 0.1 / math.sqrt(1000)
    assert np.all(np.abs(fitted.mean - [1.0, 2.0, 0.5]) <= bound)
    assert np.allclose(np.diag(fitted.covariance), 0.01, atol=0.002)
    assert fitted.count == 1000


def test_identical_pair_is_insufficient():
    with pytest.raises(InsufficientData):
        fit([_episode((1.0, 1.0, 0.0)), _episode((1.0, 1.0, 0.0))], KEY)


def test_failures_do_not_count_as_samples():
    episodes = [_episode((1.0, 1.0 + 0.1 * i, 0.0)) for i in range(3)]
    episodes += [_episode((2.0, 2.0, 0.0), outcome="failure") for _ in range(5)]
    with pytest.raises(InsufficientData):
        fit(episodes, KEY)


def test_degenerate_samples_are_regularized():
    fitted = fit([_episode((1.0, 1.0, 0.0)) for _ in range(4)], KEY, FitConfig(ridge=1e-6))
    assert np.allclose(fitted.covariance, 1e-6 * np.eye(3), rtol=1e-9, atol=0.0)


def test_ring_data_spreads_position_covariance():
    """Evenly spaced ring points have variance r^2/2 along x and y"""
    radius = 0.7
    angles = np.linspace(0.0, 2 * math.pi, 24, endpoint=False)
    episodes = [_episode((2.0 + radius * math.cos(a), 2.0 + radius * math.sin(a), 0.0)) for a in angles]
    fitted = fit(episodes, KEY)
    eigenvalues = np.linalg.eigvalsh(fitted.covariance[:2, :2])
    assert np.allclose(eigenvalues, radius ** 2 / 2, rtol=1e-4)
    assert fitted.mean[:2] == pytest.approx([2.0, 2.0])


def test_heading_is_fitted_across_the_wrap():
    episodes = [
        _episode((1.0 + 0.01 * i, 1.0, math.pi - 0.05 if i % 2 else -math.pi + 0.05))
        for i in range(10)
    ]
    fitted = fit(episodes, KEY)
    assert abs(math.remainder(fitted.mean[2] - math.pi, 2 * math.pi)) < 1e-6
    assert fitted.covariance[2, 2] == pytest.approx(0.0025, rel=1e-3)


def test_arm_and_grasp_order_follow_success_rates():
    episodes = [_episode((1.0, 1.0 + 0.1 * i, 0.0), arm="left", grasp="cup-top") for i in range(3)]
    episodes += [_episode((1.0, 1.5, 0.0), outcome="failure", arm="right", grasp="cup-side") for _ in range(3)]
    episodes.append(_episode((1.2, 1.5, 0.0), arm="right", grasp="cup-side"))
    fitted = fit(episodes, KEY)
    assert fitted.arm_order == ["left", "right"]
    assert fitted.preferred_arm == "left"
    assert fitted.grasp_order == ["cup-top", "cup-side"]


def test_fit_all_reports_insufficient_keys():
    episodes = [_episode((1.0, 1.0 + 0.1 * i, 0.0)) for i in range(5)]
    episodes.append(_episode((3.0, 3.0, 0.0), key="placing:cup@dining-table"))
    models, insufficient = fit_all(episodes)
    assert list(models) == [KEY]
    assert list(insufficient) == ["placing:cup@dining-table"]
    assert fit_all([]) == ({}, {})


def test_invalid_models_are_rejected():
    with pytest.raises(ValueError):
        GaussianModel(KEY, [0, 0, 0], -np.eye(3), 10)
    with pytest.raises(ValueError):
        GaussianModel(KEY, [0, 0, 0], np.eye(3), 3)
    with pytest.raises(ValueError):
        FitConfig(ridge=0.0)


def test_model_files_are_deterministic(tmp_path, model):
    first = save_models({model.task_key: model}, tmp_path / "a")[0]
    second = save_models({model.task_key: model}, tmp_path / "b")[0]
    assert first.read_bytes() == second.read_bytes()
    loaded = load_models(tmp_path / "a")[model.task_key]
    assert np.allclose(loaded.mean, model.mean, rtol=0.0, atol=1e-12)
    assert np.array_equal(loaded.covariance, model.covariance)
    assert loaded.arm_order == ["right", "left"]


def test_malformed_model_file_raises(tmp_path):
    (tmp_path / "broken.yaml").write_text("task_key: x\nmean: [0, 0]\n")
    with pytest.raises(ConfigError):
        load_models(tmp_path)
    assert load_models(tmp_path / "missing") == {}


# ---------------------------------------------------------------------------
# Combination and sampling
# ---------------------------------------------------------------------------

def test_combined_is_zero_outside_prior_support(local_model, small_grid):
    mask = np.ones(small_grid.shape, dtype=bool)
    mask[:3] = False
    prior = PoseDistribution.uniform(small_grid, mask)
    combined = combine(local_model, prior)
    assert not np.any(combined.weights[:3])
    assert np.all(combined.support <= prior.support)
    assert combined.weights.sum() == pytest.approx(1.0)


def test_uniform_prior_gives_discretized_gaussian(local_model, small_grid):
    prior = PoseDistribution.uniform(small_grid, np.ones(small_grid.shape))
    density = np.exp(local_model.log_density(small_grid))
    assert np.allclose(combine(local_model, prior).weights, density / density.sum())


def test_combined_argmax_matches_exhaustive_search(local_model, small_grid):
    rng = np.random.default_rng(3)
    prior = PoseDistribution(small_grid, rng.random(small_grid.shape) * (rng.random(small_grid.shape) > 0.3))
    best = max(
        range(small_grid.size),
        key=lambda i: prior.weights.reshape(-1)[i] * float(local_model.pdf(np.array(small_grid.center(i)))),
    )
    assert combine(local_model, prior).argmax() == small_grid.center(best)


def test_combine_with_empty_prior_raises(local_model, small_grid):
    with pytest.raises(EmptySupport):
        combine(local_model, PoseDistribution(small_grid, np.zeros(small_grid.shape)))


def test_specialize_masks_occupied_cells(local_model, small_grid):
    free = np.ones((small_grid.nx, small_grid.ny), dtype=bool)
    free[0] = False
    dist = specialize(local_model, small_grid, free)
    assert not np.any(dist.weights[0])
    with pytest.raises(EmptySupport):
        specialize(local_model, small_grid, np.zeros_like(free))


def test_sampling_edge_cases(small_grid):
    weights = np.zeros(small_grid.shape)
    weights[2, 3, 1] = 1.0
    single = PoseDistribution(small_grid, weights)
    assert sample(single, 0, 0) == []
    assert set(sample(single, 0, 20)) == {small_grid.center(int(np.ravel_multi_index((2, 3, 1), small_grid.shape)))}
    assert sample(single, 4, 5) == sample(single, 4, 5)
    with pytest.raises(EmptySupport):
        sample(PoseDistribution(small_grid, np.zeros(small_grid.shape)), 0, 1)


def test_sampler_matches_cell_weights():
    """Chi-square goodness of fit of 10^4 draws"""
    grid = PoseGrid(0.0, 0.0, 2, 2, 1.0, 2)
    weights = np.array([1.0, 2.0, 3.0, 4.0, 1.0, 5.0, 2.0, 2.0]).reshape(grid.shape)
    dist = PoseDistribution(grid, weights)
    draws = sample(dist, 11, 10_000)
    observed = np.zeros(grid.size)
    for x, y, theta in draws:
        observed[np.ravel_multi_index(grid.index(x, y, theta), grid.shape)] += 1
    expected = dist.weights.reshape(-1) * len(draws)
    assert chisquare(observed, expected).pvalue > 0.01


# ---------------------------------------------------------------------------
# Episodic memory
# ---------------------------------------------------------------------------

def test_memory_round_trips_projected_episodes(tmp_path):
    path = tmp_path / "run.ndjson"
    memory = EpisodicMemory.open(path, {"run_id": "r1", "seed": 1})
    rng = np.random.default_rng(1)
    logged = []
    for i in range(1000):
        outcome = "success" if i % 3 else "failure"
        episode = _episode(
            rng.normal(size=3), outcome, arm="left", grasp="cup-top",
            source="projection", durations={"navigation": float(i)}, run_id="r1", seed=1,
        )
        logged.append(memory.log(episode))
    memory.close()
    episodes = read_episodes(path)
    assert [e.to_record() for e in episodes] == logged
    assert episodes[0].failure_category == "grasp-failure"
    assert len(memory) == 1000


def test_memory_shares_the_run_log():
    writer = NdjsonWriter()
    writer.write({"type": "event", "name": "x", "payload": {}, "time": 0.0})
    memory = EpisodicMemory(writer)
    memory(_episode((1.0, 2.0, 0.0)))
    assert writer.count == 3
    assert memory.task_keys() == [KEY]


def test_source_filter_and_multiple_logs(tmp_path):
    for name, source in (("a", "execution"), ("b", "projection")):
        memory = EpisodicMemory.open(tmp_path / f"{name}.ndjson")
        memory.log(_episode((1.0, 2.0, 0.0), source=source))
        memory.close()
    paths = [tmp_path / "a.ndjson", tmp_path / "b.ndjson"]
    assert len(load_episodes(paths)) == 2
    assert [e.source for e in load_episodes(paths, sources=["projection"])] == ["projection"]


def test_malformed_episode_record_reports_line(tmp_path):
    path = tmp_path / "run.ndjson"
    memory = EpisodicMemory.open(path)
    memory.log(_episode((1.0, 2.0, 0.0)))
    memory.close()
    with open(path, "a") as f:
        f.write('{"type": "episode", "task_key": "x", "base_pose": [1, 2], "outcome": "success"}\n')
    with pytest.raises(LogFormatError) as exc:
        read_episodes(path)
    assert exc.value.line_number == 3


# ---------------------------------------------------------------------------
# Specialized reasoner
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def heuristic():
    return load_heuristic_reasoner(CONFIG_DIR / "reasoner.yaml", seed=2)


def _base_query(world, key="picking-up:cup@kitchen-island"):
    cup = an_object(type="cup", name="cup-1", pose=Pose.from_xyz_rpy([1.5, 4.2, 0.935]))
    context = {"object": cup, "location": a_location(reachable_for=cup), "task-key": key, "seed": 2}
    return ParameterQuery("picking-up", "base-pose", context, world)


def test_specialized_base_poses_follow_the_model(heuristic, model, world):
    reasoner = SpecializedReasoner(heuristic, {model.task_key: model})
    poses = list(reasoner.infer(_base_query(world)))
    assert len(poses) == heuristic.streams.base_pose_samples
    for x, y, theta in poses:
        assert math.hypot(x - 1.5, y - 3.5) < 0.5
        assert abs(math.remainder(theta - math.pi / 2, 2 * math.pi)) < 0.5


def test_combined_base_poses_stay_in_heuristic_support(heuristic, model, world):
    reasoner = SpecializedReasoner(heuristic, {model.task_key: model}, mode="combined")
    query = _base_query(world)
    prior = heuristic.base_pose_distribution(query)
    poses = list(reasoner.infer(query))
    assert poses
    assert all(prior.probability(*pose) > 0 for pose in poses)


def test_unknown_task_key_falls_back_to_heuristics(heuristic, model, world):
    reasoner = SpecializedReasoner(heuristic, {model.task_key: model})
    query = _base_query(world, key="picking-up:cup@side-table")
    assert list(reasoner.infer(query)) == list(heuristic.infer(query))


def test_learned_arm_preference_reorders_arms(heuristic, model, world):
    """The cup is on the robot's left, yet the model prefers the right arm"""
    reasoner = SpecializedReasoner(heuristic, {model.task_key: model})
    cup = an_object(type="cup", name="cup-1", pose=Pose.from_xyz_rpy([3.9, 2.0, 0.9]))
    context = {"object": cup, "task-key": model.task_key}
    query = ParameterQuery("picking-up", "arm", context, world)
    assert list(heuristic.infer(query)) == ["left", "right"]
    assert list(reasoner.infer(query)) == ["right", "left"]
    assert reasoner.catalog is heuristic.catalog


def test_build_reasoner_modes(heuristic, model):
    assert build_reasoner("heuristic", heuristic) is heuristic
    assert build_reasoner("combined", heuristic, {model.task_key: model}).mode == "combined"
    with pytest.raises(ValueError):
        build_reasoner("oracle", heuristic)

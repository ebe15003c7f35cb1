"""Unit tests for the marathon harness: configuration, scenario, failure injection, reports and replay"""

import math
import time

import numpy as np
import pytest
from pydantic import ValidationError

from src.harness.config import FailureInjectionConfig, HarnessConfig, load_harness_config, read_min_reduction
from src.harness.injection import FailureInjector
from src.harness.marathon import MarathonRunner, run_marathon
from src.harness.replay import replay
from src.harness.report import COLUMNS, ObjectResult, RunReport, load_reports
from src.harness.scenario import load_scenario, load_scenario_world
from src.harness.stats import PilotThreshold, compare_modes, compare_reports, stats
from src.harness.training import train
from src.models.domain import ConfigError, Episode, FailureCategory, LogFormatError, ReportSchemaError
from src.perception.estimator import PerceptionConfig
from src.planlang.serialization import NdjsonWriter, read_records
from src.specialization.memory import EpisodicMemory
from src.utils.logger import configure_logging, logger
from tests.conftest import CONFIG_DIR

OBJECTS = ["bowl", "spoon", "cup", "milk", "cereal"]


def _report(seed=1, phase="setting", mode="heuristic", failures=None, durations=None):
    failures = failures or {}
    durations = durations or {}
    rows = [ObjectResult(obj, dict(failures.get(obj, {})), durations.get(obj, 100.0)) for obj in OBJECTS]
    return RunReport(phase, mode, [seed], rows)


@pytest.fixture(scope="module")
def scenario():
    return load_scenario(CONFIG_DIR / "scenario.yaml")


@pytest.fixture
def noiseless_config(tmp_path):
    return load_harness_config(
        CONFIG_DIR / "marathon.yaml",
        mode="heuristic",
        seeds=[1],
        output_dir=tmp_path,
        models_dir=tmp_path / "models",
        injection={},
        perception={"noise": 0.0, "dropout": 0.0},
    )


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_shipped_config_loads_with_resolved_paths():
    config = load_harness_config(CONFIG_DIR / "marathon.yaml")
    assert config.scenario == CONFIG_DIR / "scenario.yaml"
    assert config.runs == len(config.seeds) == 5
    assert config.injection.unrecoverable_phases == ["cleaning"]
    assert not config.injection.noiseless


def test_shipped_config_takes_min_reduction_from_the_pilot_threshold():
    config = load_harness_config(CONFIG_DIR / "marathon.yaml")
    assert config.pilot_threshold == CONFIG_DIR / "pilot_threshold.yaml"
    assert len(config.pilot_seeds) == 20
    assert not set(config.pilot_seeds) & set(config.seeds)
    assert config.min_reduction == read_min_reduction(CONFIG_DIR / "pilot_threshold.yaml")


def test_explicit_min_reduction_overrides_the_pilot_threshold(tmp_path):
    (tmp_path / "threshold.yaml").write_text("min_reduction: 0.3\n")
    path = tmp_path / "marathon.yaml"
    path.write_text("runs: 1\nseeds: [1]\npilot_threshold: threshold.yaml\n")
    assert load_harness_config(path).min_reduction == pytest.approx(0.3)
    path.write_text("runs: 1\nseeds: [1]\npilot_threshold: threshold.yaml\nmin_reduction: 0.1\n")
    assert load_harness_config(path).min_reduction == pytest.approx(0.1)
    path.write_text("runs: 1\nseeds: [1]\npilot_threshold: missing.yaml\n")
    assert load_harness_config(path).min_reduction == 0.0
    (tmp_path / "threshold.yaml").write_text("min_reduction: 1.5\n")
    path.write_text("runs: 1\nseeds: [1]\npilot_threshold: threshold.yaml\n")
    with pytest.raises(ConfigError):
        load_harness_config(path)


def test_seed_override_sets_runs():
    config = load_harness_config(CONFIG_DIR / "marathon.yaml", seeds=[7, 8])
    assert config.runs == 2
    assert config.with_overrides(seeds=[3]).runs == 1


def test_seeds_must_match_runs(tmp_path):
    path = tmp_path / "marathon.yaml"
    path.write_text("runs: 3\nseeds: [1, 2]\n")
    with pytest.raises(ConfigError):
        load_harness_config(path)


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "marathon.yaml"
    path.write_text("runs: 1\nseeds: [1]\nspeed: fast\n")
    with pytest.raises(ConfigError):
        load_harness_config(path)


def test_invalid_component_section_is_a_config_error(tmp_path):
    path = tmp_path / "marathon.yaml"
    path.write_text("runs: 1\nseeds: [1]\nexecutive: {navigation_speed: -1.0}\n")
    with pytest.raises(ConfigError):
        load_harness_config(path)


def test_injection_probabilities_are_bounded():
    with pytest.raises(ValidationError):
        FailureInjectionConfig(handle_slip={"iai-fridge": 1.5})
    with pytest.raises(ValidationError):
        FailureInjectionConfig(localization_sigma=-0.1)
    with pytest.raises(ValidationError):
        FailureInjectionConfig(unrecoverable_phases=["breakfast"])


def test_model_fitting_needs_four_successes():
    with pytest.raises(ValidationError):
        HarnessConfig(min_successes=3)


def test_configure_logging_writes_debug_file_sink(tmp_path):
    log_dir = tmp_path / "logs"
    try:
        configure_logging(level="WARNING", log_dir=log_dir)
        logger.debug("file sink check")
    finally:
        configure_logging()
    files = list(log_dir.glob("marathon_*.log"))
    assert len(files) == 1
    assert "file sink check" in files[0].read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

def test_scenario_phases_keep_their_order(scenario):
    assert [g.object_type for g in scenario.phases["setting"]] == OBJECTS
    assert [g.object_type for g in scenario.phases["cleaning"]] == ["cereal", "milk", "spoon", "cup", "bowl"]


def test_scenario_check_collects_containers(scenario, base_world):
    scenario.check(base_world)
    assert scenario.containers == [
        "sink-area-left-middle-drawer", "sink-area-left-upper-drawer", "iai-fridge", "dishwasher",
    ]


def test_unknown_location_is_a_config_error(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "format: marathon-scenario/1\n"
        f"environment: {CONFIG_DIR / 'apartment.yaml'}\n"
        "spawn:\n  - {id: cup-1, type: cup, location: garage}\n"
    )
    with pytest.raises(ConfigError):
        load_scenario_world(path, CONFIG_DIR / "robot_pr2_lite.yaml")


def test_wrong_format_tag_is_rejected(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text("format: something-else\n")
    with pytest.raises(ConfigError):
        load_scenario(path)


def test_spawn_is_deterministic_per_seed(scenario, base_world):
    first = scenario.spawn(base_world, 3)
    again = scenario.spawn(base_world, 3)
    other = scenario.spawn(base_world, 4)
    assert first.objects["bowl-1"].pose == again.objects["bowl-1"].pose
    assert first.objects["bowl-1"].pose != other.objects["bowl-1"].pose


def test_spawned_objects_rest_in_their_locations(scenario, base_world):
    world = scenario.spawn(base_world, 1)
    assert world.objects["bowl-1"].attachment == "sink_area_left_middle_drawer"
    assert world.objects["milk-1"].attachment == "iai_fridge_door"
    assert world.objects["cup-1"].attachment is None
    # capsule cup: radius plus half length above the island plane
    assert world.objects["cup-1"].pose.translation[2] == pytest.approx(0.9 + 0.065 + 0.001)
    for rule in scenario.spawns:
        assert world.location_contains(rule.location, world.objects[rule.object_id].pose.translation, 0.02)


def test_transport_goal_builds_a_transport_action(scenario, base_world):
    goal = scenario.phases["setting"][0]
    action = goal.action(base_world)
    assert action["type"] == "transporting"
    assert action["object"]["type"] == "bowl"
    assert action["from"]["in"] == "sink-area-left-middle-drawer"
    assert action["to"]["on"] == "dining-table"
    np.testing.assert_allclose(action["to"]["pose"].translation[:2], [4.0, 3.0])


# ---------------------------------------------------------------------------
# Failure injection
# ---------------------------------------------------------------------------

def test_grasp_slip_probability_grows_with_misalignment():
    injector = FailureInjector(FailureInjectionConfig(grasp_slip_base=0.1, thinness={"spoon": 2.0}))
    assert injector.grasp_slip_probability("cup", 0.0) == pytest.approx(0.1)
    assert injector.grasp_slip_probability("spoon", 0.02) == pytest.approx(0.4)
    assert injector.grasp_slip_probability("spoon", 0.2) == 1.0


def test_zero_probabilities_never_draw():
    injector = FailureInjector(FailureInjectionConfig())
    rng = np.random.default_rng(5)
    assert injector.localization_error(rng) == (0.0, 0.0, 0.0)
    assert not injector.grasp_slips("cup", 0.05, rng)
    assert not injector.handle_slips("iai-fridge", rng)
    assert injector.carry_drop("milk", "cleaning", rng) is None
    assert rng.random() == np.random.default_rng(5).random()


def test_unrecoverable_events_only_in_their_phases():
    injector = FailureInjector(FailureInjectionConfig(carry_drop={"milk": 1.0}, gripper_jam={"dishwasher": 1.0}))
    rng = np.random.default_rng(0)
    assert injector.carry_drop("milk", "setting", rng) is None
    assert not injector.gripper_jams("dishwasher", "setting", rng)
    fraction = injector.carry_drop("milk", "cleaning", rng)
    assert 0.2 <= fraction <= 0.8
    assert injector.gripper_jams("dishwasher", "cleaning", rng)
    assert injector.counts["carry-drop"] == 1
    assert injector.counts["gripper-jam"] == 1


def test_handle_slip_falls_back_to_default():
    injector = FailureInjector(FailureInjectionConfig(handle_slip={"iai-fridge": 1.0}, default_handle_slip=0.0))
    rng = np.random.default_rng(0)
    assert injector.handle_slips("iai-fridge", rng)
    assert not injector.handle_slips("dishwasher", rng)


def test_localization_error_uses_configured_sigmas():
    injector = FailureInjector(FailureInjectionConfig(localization_sigma=0.02, localization_sigma_theta=0.0))
    draws = np.array([injector.localization_error(np.random.default_rng(k)) for k in range(400)])
    assert np.all(draws[:, 2] == 0.0)
    assert np.std(draws[:, :2]) == pytest.approx(0.02, rel=0.15)


def test_perception_misses_are_merged_into_the_perception_config():
    injector = FailureInjector(FailureInjectionConfig(perception_miss={"spoon": 0.2}, default_perception_miss=0.05))
    config = injector.perception_config(PerceptionConfig(noise=0.001))
    assert config.noise == 0.001
    assert config.miss_for("spoon") == 0.2
    assert config.miss_for("bowl") == 0.05


# ---------------------------------------------------------------------------
# Reports and tables
# ---------------------------------------------------------------------------

def test_settle_failures_count_as_manipulation():
    row = ObjectResult("cup")
    row.add(FailureCategory.SETTLE)
    row.add(FailureCategory.MANIPULATION)
    row.add("env-manipulation-failure")
    assert row.failures["manipulation"] == 2
    assert row.failures["env-manipulation"] == 1


def test_report_totals_are_column_sums():
    report = _report(failures={"bowl": {"grasping": 2}, "cup": {"grasping": 1, "navigation": 3}})
    totals = report.totals()
    assert totals["grasping"] == 3
    assert totals["navigation"] == 3
    assert totals["duration"] == pytest.approx(500.0)
    assert report.total_failures == 6
    assert list(report.to_frame().columns) == list(COLUMNS)


def test_report_survives_save_and_load(tmp_path):
    report = _report(failures={"milk": {"unrecoverable": 1}})
    path = report.save(tmp_path / "report.json")
    loaded = load_reports([path])[0]
    assert loaded.to_dict() == report.to_dict()
    assert loaded.unrecoverable == 1


def test_stats_averages_counts_as_fractions():
    counts = [5, 6, 6, 6, 6]
    reports = [_report(seed=k, failures={"bowl": {"manipulation": c}}) for k, c in enumerate(counts, start=1)]
    table = stats(reports)
    assert table.cells.loc["bowl", "manipulation"] == "29/5"
    assert table.cells.loc["spoon", "manipulation"] == "0"
    assert table.frame.loc["bowl", "manipulation"] == pytest.approx(5.8)
    assert table.title == "Results of table setting, averaged over 5 runs."


def test_stats_of_a_zero_report_is_all_zero():
    table = stats([_report(durations={obj: 0.0 for obj in OBJECTS})])
    assert set(table.cells.values.ravel()) == {"0"}


def test_sum_row_adds_up_the_rows():
    durations = dict(zip(OBJECTS, [515.0, 522.0, 472.0, 687.0, 530.0]))
    reports = [
        _report(seed=1, durations=durations, failures={"bowl": {"grasping": 1}, "cup": {"perception": 2}}),
        _report(seed=2, durations=durations, failures={"spoon": {"grasping": 2}}),
    ]
    table = stats(reports)
    np.testing.assert_allclose(table.frame.loc["Sum"].values, table.frame.loc[OBJECTS].sum(axis=0).values)
    assert table.cells.loc["Sum", "grasping"] == "3/2"
    assert table.cells.loc["Sum", "duration"] == "2726"


def test_markdown_follows_the_column_schema():
    markdown = stats([_report()]).to_markdown()
    header = markdown.splitlines()[2]
    assert header == (
        "| Object | Unrecover. fail. | Perc. fail. | Grasp. fail. | Manip. fail. "
        "| Env. manip. fail. | Nav. fail. | Duration (sec) |"
    )
    assert markdown.splitlines()[-1].startswith("| Sum |")


def test_stats_rejects_heterogeneous_reports():
    with pytest.raises(ReportSchemaError):
        stats([])
    with pytest.raises(ReportSchemaError):
        stats([_report(phase="setting"), _report(phase="cleaning")])
    with pytest.raises(ReportSchemaError):
        stats([_report(mode="heuristic"), _report(mode="specialized")])
    short = _report()
    short.rows = short.rows[:3]
    with pytest.raises(ReportSchemaError):
        stats([_report(), short])


def test_csv_export(tmp_path):
    path = stats([_report()]).to_csv(tmp_path / "table.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "object," + ",".join(COLUMNS)
    assert lines[-1].startswith("Sum,")


# ---------------------------------------------------------------------------
# Mode comparison
# ---------------------------------------------------------------------------

def test_identical_modes_give_zero_reduction():
    reports = [_report(seed=s, failures={"cup": {"grasping": 2}}) for s in (1, 2)]
    comparison = compare_reports(reports, reports)
    assert comparison.reduction == 0.0
    assert not comparison.passes()


def test_reduction_of_the_specialized_mode():
    heuristic = [_report(seed=1, failures={"cup": {"grasping": 8}, "bowl": {"perception": 2}})]
    specialized = [_report(seed=1, mode="specialized", failures={"cup": {"grasping": 2}})]
    comparison = compare_reports(heuristic, specialized)
    assert comparison.reduction == pytest.approx(0.8)
    assert comparison.passes(0.5)
    assert not comparison.passes(0.9)


def test_reduction_is_undefined_without_heuristic_failures():
    comparison = compare_reports([_report()], [_report(mode="specialized")])
    assert comparison.reduction is None
    assert "undefined" in comparison.render()
    assert comparison.to_dict()["reduction"] == "undefined"


def test_pilot_threshold_is_a_margin_of_the_pilot_reduction(tmp_path):
    threshold = PilotThreshold([101], [102], heuristic_total=20, specialized_total=8, margin=0.5)
    assert threshold.pilot_reduction == pytest.approx(0.6)
    assert threshold.min_reduction == pytest.approx(0.3)
    path = threshold.save(tmp_path / "pilot_threshold.yaml")
    assert read_min_reduction(path) == pytest.approx(0.3)
    # a pilot where specialization did not help requires nothing
    assert PilotThreshold([101], [102], 5, 9).min_reduction == 0.0
    assert PilotThreshold([101], [102], 0, 0).min_reduction == 0.0
    with pytest.raises(ValueError):
        PilotThreshold([101], [102], 1, 1, margin=0.0)


def test_compared_reports_must_cover_the_same_seeds():
    with pytest.raises(ReportSchemaError):
        compare_reports([_report(seed=1)], [_report(seed=2)])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def test_training_on_an_empty_log_reports_every_key(tmp_path):
    log = tmp_path / "empty.ndjson"
    NdjsonWriter(log, {"run_id": "empty"}).close()
    keys = ["picking-up:bowl@sink-area-left-middle-drawer", "placing:bowl@dining-table"]
    result = train([log], tmp_path / "models", task_keys=keys)
    assert result.models == {}
    assert sorted(result.insufficient) == keys
    assert result.paths == []


def test_retraining_gives_identical_model_files(tmp_path):
    rng = np.random.default_rng(11)
    log = tmp_path / "run.ndjson"
    memory = EpisodicMemory.open(log, {"run_id": "train"})
    for pose in rng.normal([3.4, 3.0, 0.0], [0.05, 0.05, 0.1], size=(12, 3)):
        memory.log(Episode("placing:bowl@dining-table", tuple(pose), "success", arm="right"))
    memory.log(Episode("placing:bowl@dining-table", (3.0, 3.0, 0.0), "failure", arm="left", failure_category="manipulation-failure"))
    memory.close()
    first = train([log], tmp_path / "a")
    second = train([log], tmp_path / "b")
    assert list(first.models) == ["placing:bowl@dining-table"]
    assert [p.read_bytes() for p in first.paths] == [p.read_bytes() for p in second.paths]


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def _task(task_id, parent, action_type, status, start, end, failure=None, retries=0, failed_by=None):
    return {
        "type": "task", "id": task_id, "parent": parent,
        "designator": {"kind": "action", "properties": {"type": action_type}},
        "status": status, "start": start, "end": end, "failure": failure,
        "failed_by": failed_by, "retries": retries, "motion_commands": 0,
    }


def _write_log(path, records):
    with NdjsonWriter(path, {"run_id": "r1", "seed": 1}) as writer:
        for record in records:
            writer.write(record)
    return path


def test_replay_nests_tasks_and_marks_retries(tmp_path):
    failure = {"category": "grasp-failure", "message": "slipped", "task_id": 1}
    log = _write_log(tmp_path / "run.ndjson", [
        _task(1, 0, "picking-up", "failed", 1.0, 4.0, failure=failure),
        {"type": "event", "name": "object-slipped", "payload": {"object": "cup-1"}, "time": 3.0},
        _task(2, 0, "picking-up", "failed", 4.0, 6.0, failed_by=3),
        _task(3, 2, "navigating", "failed", 4.0, 6.0, failure={"category": "navigation-failure", "message": "", "task_id": 3}),
        _task(4, 0, "picking-up", "succeeded", 6.0, 9.0),
        _task(0, None, "fetching", "succeeded", 0.0, 9.0, retries=2),
    ])
    timeline = replay(log)
    assert timeline.node_count == 5
    assert timeline.failure_count == 2
    assert timeline.retry_count == 2
    text = timeline.render()
    assert "(retries: 2)" in text
    assert "!! grasp-failure" in text
    assert "<- task 3" in text
    lines = timeline.lines
    root = next(i for i, line in enumerate(lines) if "#0" in line)
    assert lines[root].startswith("[0.0-9.0] succeeded fetching")
    assert lines[root + 1].startswith("  [1.0-4.0] failed picking-up")
    assert any(line.startswith("    ") and "#3" in line for line in lines)


def test_replay_of_a_clean_run_has_no_failure_markers(tmp_path):
    log = _write_log(tmp_path / "run.ndjson", [
        _task(1, 0, "navigating", "succeeded", 0.0, 5.0),
        _task(0, None, "transporting", "succeeded", 0.0, 5.0),
    ])
    timeline = replay(log)
    assert timeline.failure_count == 0
    assert "!!" not in timeline.render()


def test_replay_reports_the_corrupt_line(tmp_path):
    log = _write_log(tmp_path / "run.ndjson", [_task(0, None, "navigating", "succeeded", 0.0, 1.0)])
    with open(log, "a") as f:
        f.write("{not json\n")
    with pytest.raises(LogFormatError) as info:
        replay(log)
    assert info.value.line_number == 3


def test_replay_rejects_task_records_without_status(tmp_path):
    record = _task(0, None, "navigating", "succeeded", 0.0, 1.0)
    del record["status"]
    with pytest.raises(LogFormatError):
        replay(_write_log(tmp_path / "run.ndjson", [record]))


# ---------------------------------------------------------------------------
# Marathon runner
# ---------------------------------------------------------------------------

def test_intervention_removes_the_object_and_skips_its_goals(noiseless_config):
    runner = MarathonRunner(noiseless_config)
    writer = NdjsonWriter(None)
    executive, _, _ = runner.build_executive(1, writer)
    executive.phase = "cleaning"
    runner.intervene(executive, writer, "milk-1")
    assert "milk-1" not in executive.truth.objects
    assert "milk-1" not in executive.belief.objects
    for dof, value in executive.robot.park.items():
        assert executive.truth.positions[dof] == pytest.approx(value)
    milk_goal = next(g for g in runner.scenario.phases["cleaning"] if g.object_id == "milk-1")
    row = runner.run_goal(executive, writer, milk_goal)
    assert not row.succeeded
    assert row.duration == 0.0
    assert len(executive.interpreter.tree) == 0
    lines = writer.getvalue().splitlines()
    assert '"name":"human-intervention"' in lines[1]
    assert '"type":"phase"' in lines[2]


@pytest.mark.slow
def test_noiseless_marathon_has_no_failures(noiseless_config):
    result = run_marathon(noiseless_config)
    assert [r.phase for r in result.reports] == ["setting", "cleaning"]
    assert all(r.total_failures == 0 for r in result.reports)
    # duration column equals the phase durations in the log
    phases = read_records(result.logs[0], "phase")
    for report in result.reports:
        logged = sum(sum(p["durations"].values()) for p in phases if p["phase"] == report.phase)
        assert math.isclose(report.totals()["duration"], logged, abs_tol=1e-6)


@pytest.mark.slow
def test_marathon_is_deterministic(tmp_path):
    config = load_harness_config(CONFIG_DIR / "marathon.yaml", mode="heuristic", seeds=[2], phases=["setting"])
    first = run_marathon(config.with_overrides(output_dir=tmp_path / "a"))
    second = run_marathon(config.with_overrides(output_dir=tmp_path / "b"))
    assert [r.to_dict() for r in first.reports] == [r.to_dict() for r in second.reports]
    assert first.logs[0].read_bytes() == second.logs[0].read_bytes()
    assert first.by_phase("setting")[0].unrecoverable == 0


@pytest.mark.slow
def test_compare_modes_trains_then_runs_both_modes(noiseless_config):
    config = noiseless_config.with_overrides(pilot_seeds=[101], collection_repeats=1, phases=["setting"])
    comparison = compare_modes(config)
    assert comparison.seeds == [1]
    assert (comparison.heuristic_total, comparison.specialized_total) == (0, 0)
    assert comparison.reduction is None
    assert not comparison.passes()
    assert (config.output_dir / "experience" / "collect-seed101-r0.ndjson").exists()
    assert (config.output_dir / "specialized" / "report-setting-seed1.json").exists()


@pytest.fixture(scope="module")
def default_marathon(tmp_path_factory):
    """The shipped configuration on its benchmark seeds, with the wall-clock time taken"""
    out = tmp_path_factory.mktemp("default")
    config = load_harness_config(CONFIG_DIR / "marathon.yaml", output_dir=out, models_dir=out / "models")
    start = time.perf_counter()
    result = run_marathon(config)
    return config, result, time.perf_counter() - start


@pytest.mark.slow
def test_default_marathon_sets_the_table_without_unrecoverable_failures(default_marathon):
    config, result, elapsed = default_marathon
    setting = result.by_phase("setting")
    assert sorted(seed for report in setting for seed in report.seeds) == config.seeds == [1, 2, 3, 4, 5]
    assert sum(report.unrecoverable for report in setting) == 0
    assert len(result.reports) == 2 * len(config.seeds)
    assert elapsed <= 600.0


@pytest.mark.slow
def test_cleaning_accrues_at_least_the_env_manipulation_failures_of_setting(default_marathon):
    _, result, _ = default_marathon

    def env_failures(phase):
        return sum(report.totals()["env-manipulation"] for report in result.by_phase(phase))

    assert env_failures("cleaning") >= env_failures("setting")


@pytest.mark.slow
def test_specialized_mode_fails_less_on_the_shipped_seeds(tmp_path):
    config = load_harness_config(CONFIG_DIR / "marathon.yaml", output_dir=tmp_path, models_dir=tmp_path / "models")
    comparison = compare_modes(config)
    assert comparison.seeds == [1, 2, 3, 4, 5]
    assert comparison.specialized_total < comparison.heuristic_total
    assert comparison.passes(config.min_reduction)

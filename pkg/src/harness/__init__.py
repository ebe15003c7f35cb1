"""Marathon harness: scenarios, failure injection, runs, training and result tables"""

from .config import (
    CONFIG_DIR,
    MARATHON_PHASES,
    FailureInjectionConfig,
    HarnessConfig,
    load_harness_config,
    read_min_reduction
)
from .scenario import Scenario, SpawnRule, TransportGoal, load_scenario, load_scenario_world
from .injection import FailureInjector
from .report import COLUMNS, FAILURE_COLUMNS, ObjectResult, RunReport, failure_column, load_reports
from .marathon import MarathonResult, MarathonRunner, run_marathon
from .training import ExperienceCollector, TrainingResult, train
from .stats import (
    ModeComparison,
    PilotThreshold,
    StatsTable,
    calibrate_threshold,
    compare_modes,
    compare_reports,
    stats,
    stats_by_phase
)
from .replay import Timeline, replay

__all__ = [
    "CONFIG_DIR",
    "MARATHON_PHASES",
    "FailureInjectionConfig",
    "HarnessConfig",
    "load_harness_config",
    "read_min_reduction",
    "Scenario",
    "SpawnRule",
    "TransportGoal",
    "load_scenario",
    "load_scenario_world",
    "FailureInjector",
    "COLUMNS",
    "FAILURE_COLUMNS",
    "ObjectResult",
    "RunReport",
    "failure_column",
    "load_reports",
    "MarathonResult",
    "MarathonRunner",
    "run_marathon",
    "ExperienceCollector",
    "TrainingResult",
    "train",
    "ModeComparison",
    "PilotThreshold",
    "StatsTable",
    "calibrate_threshold",
    "compare_modes",
    "compare_reports",
    "stats",
    "stats_by_phase",
    "Timeline",
    "replay"
]

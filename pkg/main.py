"""Household marathon command line: run, train, project, stats, compare, calibrate, replay"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# Environment overrides (MARATHON_LOG_LEVEL, MARATHON_LOG_DIR) must be set before the logger is configured
load_dotenv()

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from src.harness.config import CONFIG_DIR, HarnessConfig, load_harness_config
from src.harness.marathon import MarathonRunner, run_marathon
from src.harness.replay import replay
from src.harness.report import load_reports
from src.harness.stats import calibrate_threshold, compare_modes, stats_by_phase
from src.harness.training import ExperienceCollector, train
from src.models.domain import MarathonError
from src.specialization.gaussian import FitConfig
from src.utils.logger import configure_logging, logger

EXIT_UNRECOVERABLE = 1
EXIT_ERROR = 2


class MarathonSystem:
    """Orchestrates the marathon subcommands over one harness configuration"""

    def __init__(
        self,
        config_path: str = str(CONFIG_DIR / "marathon.yaml"),
        mode: Optional[str] = None,
        seeds: Optional[List[int]] = None,
        output_dir: Optional[str] = None
    ):
        logger.info("=" * 80)
        logger.info("HOUSEHOLD MARATHON - table setting and cleaning")
        logger.info("=" * 80)
        overrides = {"mode": mode, "seeds": seeds}
        if output_dir is not None:
            overrides["output_dir"] = Path(output_dir)
            overrides["models_dir"] = Path(output_dir) / "models"
        self.config: HarnessConfig = load_harness_config(config_path, **overrides)

    def run(self) -> int:
        """Run the marathon on all seeds and print the result tables"""
        result = run_marathon(self.config)
        out = Path(self.config.output_dir) / "tables"
        for table in stats_by_phase(result.reports):
            table.save(out)
            print(table.to_markdown())
        if result.unrecoverable:
            logger.warning(f"{result.unrecoverable} unrecoverable failures")
            return EXIT_UNRECOVERABLE
        return 0

    def train(self, logs: List[str], collect: bool = False) -> int:
        """Fit models from episodic logs, collecting pilot-seed experience first if asked"""
        paths = [Path(p) for p in logs]
        if collect:
            paths += ExperienceCollector(self.config).collect()
        if not paths:
            paths = sorted((Path(self.config.output_dir) / "experience").glob("*.ndjson"))
        result = train(paths, self.config.models_dir, fit_config=FitConfig(min_samples=self.config.min_successes))
        print(result.summary())
        return 0

    def project(self, object_id: str, seed: int, phase: str, arm: Optional[str],
                grasp: Optional[str], base_pose: Optional[List[float]]) -> int:
        """Validate one action binding in projection"""
        binding = {"arm": arm, "grasp": grasp, "base-pose": tuple(base_pose) if base_pose else None}
        binding = {key: value for key, value in binding.items() if value is not None}
        action, failure = MarathonRunner(self.config).project(seed, object_id, phase, binding)
        print(action.describe())
        print("projection: succeeded" if failure is None else f"projection: {failure}")
        return 0

    def stats(self, reports: List[str]) -> int:
        """Aggregate saved run reports into result tables"""
        paths = [Path(p) for p in reports]
        if not paths:
            paths = sorted(Path(self.config.output_dir).glob("*/report-*.json"))
        for table in stats_by_phase(load_reports(paths)):
            table.save(Path(self.config.output_dir) / "tables")
            print(table.to_markdown())
        return 0

    def compare(self) -> int:
        """Train on pilot seeds, then run heuristic and specialized mode"""
        comparison = compare_modes(self.config)
        path = Path(self.config.output_dir) / "comparison.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(comparison.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        print(comparison.render())
        return 0

    def calibrate(self, margin: float) -> int:
        """Derive the comparison pass threshold from the pilot seeds"""
        threshold = calibrate_threshold(self.config, margin)
        path = self.config.pilot_threshold or CONFIG_DIR / "pilot_threshold.yaml"
        threshold.save(path)
        print(f"required reduction: {threshold.min_reduction:.1%} (written to {path})")
        return 0

    @staticmethod
    def replay(log: str) -> int:
        """Print the task-tree timeline of a run log"""
        print(replay(log).render())
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Household marathon")
    parser.add_argument("--config", default=str(CONFIG_DIR / "marathon.yaml"), help="Harness configuration file")
    parser.add_argument("--mode", choices=["heuristic", "specialized", "combined"], help="Reasoner mode")
    parser.add_argument("--seeds", type=int, nargs="+", help="Run seeds (overrides runs)")
    parser.add_argument("--output-dir", help="Directory for logs, reports and models")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Console log level")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", help="Run the marathon")

    train_parser = sub.add_parser("train", help="Fit specialized models from episodic logs")
    train_parser.add_argument("logs", nargs="*", help="Episodic logs (default: collected experience)")
    train_parser.add_argument("--collect", action="store_true", help="Collect pilot-seed experience first")

    project_parser = sub.add_parser("project", help="Validate an action binding in projection")
    project_parser.add_argument("object", help="Scenario object id, e.g. bowl-1")
    project_parser.add_argument("--seed", type=int, default=1)
    project_parser.add_argument("--phase", choices=["setting", "cleaning"], default="setting")
    project_parser.add_argument("--arm")
    project_parser.add_argument("--grasp")
    project_parser.add_argument("--base-pose", type=float, nargs=3, metavar=("X", "Y", "THETA"))

    stats_parser = sub.add_parser("stats", help="Aggregate run reports into tables")
    stats_parser.add_argument("reports", nargs="*", help="Report files (default: all under the output dir)")

    sub.add_parser("compare", help="Compare heuristic and specialized mode")

    calibrate_parser = sub.add_parser("calibrate", help="Derive the comparison threshold from the pilot seeds")
    calibrate_parser.add_argument("--margin", type=float, default=0.5, help="Fraction of the pilot reduction required")

    replay_parser = sub.add_parser("replay", help="Print the timeline of a run log")
    replay_parser.add_argument("log", help="Episodic log file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    if args.log_level:
        configure_logging(level=args.log_level)
    try:
        if args.command == "replay":
            return MarathonSystem.replay(args.log)
        system = MarathonSystem(args.config, args.mode, args.seeds, args.output_dir)
        if args.command == "run":
            return system.run()
        if args.command == "train":
            return system.train(args.logs, args.collect)
        if args.command == "project":
            return system.project(args.object, args.seed, args.phase, args.arm, args.grasp, args.base_pose)
        if args.command == "stats":
            return system.stats(args.reports)
        if args.command == "calibrate":
            return system.calibrate(args.margin)
        return system.compare()
    except MarathonError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Marathon runner: the table setting and cleaning phases of seeded runs"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..models.designator import Designator, an_action, an_object
from ..models.domain import ConfigError, FailureCategory, PlanFailure
from ..motion.controller import MotionPlanner
from ..perception.detector import Detector
from ..planlang.executive import PHASES, PlanExecutive
from ..planlang.serialization import NdjsonWriter, TaskTreeRecorder
from ..reasoner.engine import load_heuristic_reasoner
from ..specialization.memory import EpisodicMemory
from ..specialization.reasoner import build_reasoner
from ..utils.logger import logger
from ..worldmodel.settle import Settler
from ..worldmodel.world import WorldState
from .config import HarnessConfig
from .injection import FailureInjector
from .report import ObjectResult, RunReport, failure_column
from .scenario import TransportGoal, load_scenario_world


@dataclass
class MarathonResult:
    """Reports of every (seed, phase) pair plus the run logs written"""
    reports: List[RunReport] = field(default_factory=list)
    logs: List[Path] = field(default_factory=list)
    report_files: List[Path] = field(default_factory=list)

    @property
    def unrecoverable(self) -> int:
        return sum(report.unrecoverable for report in self.reports)

    def by_phase(self, phase: str) -> List[RunReport]:
        return [report for report in self.reports if report.phase == phase]


class MarathonRunner:
    """Runs the scenario phases once per seed with a fresh world and executive.

    Args:
        config: Harness configuration
        mode: Reasoner mode; defaults to the configured one
    """

    def __init__(self, config: HarnessConfig, mode: Optional[str] = None):
        self.config = config
        self.mode = mode or config.mode
        self.scenario, self.world = load_scenario_world(config.scenario, config.robot)
        unknown = sorted(set(config.phases) - set(self.scenario.phases))
        if unknown:
            logger.warning(f"Scenario {self.scenario.name} has no goals for phases {unknown}")
        logger.info(f"MarathonRunner initialized (mode={self.mode}, seeds={config.seeds}, phases={config.phases})")

    def log_path(self, seed: int) -> Path:
        return Path(self.config.output_dir) / self.mode / f"run-seed{seed}.ndjson"

    def report_path(self, seed: int, phase: str) -> Path:
        return Path(self.config.output_dir) / self.mode / f"report-{phase}-seed{seed}.json"

    def run(self) -> MarathonResult:
        """All configured seeds; reports and logs are written below the output directory"""
        result = MarathonResult()
        for seed in self.config.seeds:
            log_path = self.log_path(seed)
            reports = self.run_seed(seed, log_path)
            result.logs.append(log_path)
            for report in reports:
                result.reports.append(report)
                result.report_files.append(report.save(self.report_path(seed, report.phase)))
        logger.info(
            f"Marathon finished ({self.mode}): {sum(r.total_failures for r in result.reports)} failures, "
            f"{result.unrecoverable} unrecoverable over {len(self.config.seeds)} runs"
        )
        return result

    def build_executive(
        self,
        seed: int,
        writer: NdjsonWriter,
        collecting: bool = False,
        run_id: Optional[str] = None
    ) -> Tuple[PlanExecutive, EpisodicMemory, FailureInjector]:
        """Fresh world, reasoner, noise model and executive of one run"""
        cfg = self.config
        world = self.scenario.spawn(self.world, seed)
        heuristic = load_heuristic_reasoner(cfg.reasoner, seed)
        reasoner = build_reasoner("heuristic" if collecting else self.mode, heuristic, models_dir=cfg.models_dir)
        injector = FailureInjector(cfg.injection)
        memory = EpisodicMemory(writer)
        executive_config = cfg.executive_config()
        if collecting:
            # noisy projection: no camera, no projection filter, episodes labelled as projected
            executive_config = replace(executive_config, use_projection=False)
            on_episode = lambda episode: memory.log(replace(episode, source="projection"))  # noqa: E731
            detector = None
        else:
            on_episode = memory.log
            detector = Detector(injector.perception_config(cfg.perception_config()))
        executive = PlanExecutive(
            world,
            reasoner,
            planner=MotionPlanner(cfg.control_config()),
            detector=detector,
            config=executive_config,
            disturbances=injector,
            recorder=TaskTreeRecorder(writer),
            seed=seed + cfg.injection.seed,
            run_id=run_id or f"{self.mode}-seed{seed}",
            settler=Settler(cfg.settle_config()),
            on_episode=on_episode,
        )
        return executive, memory, injector

    def run_seed(
        self,
        seed: int,
        log_path: Path,
        collecting: bool = False,
        run_id: Optional[str] = None
    ) -> List[RunReport]:
        """Setting then cleaning on one seeded world; one report per phase"""
        log_path = Path(log_path)
        if log_path.exists():
            log_path.unlink()
        run_id = run_id or f"{self.mode}-seed{seed}"
        header = {"run_id": run_id, "seed": seed, "mode": "collection" if collecting else self.mode,
                  "scenario": self.scenario.name}
        reports = []
        with NdjsonWriter(log_path, header) as writer:
            executive, memory, injector = self.build_executive(seed, writer, collecting, run_id)
            for phase in self.config.phases:
                executive.phase = phase
                report = RunReport(phase, self.mode, [seed])
                for goal in self.scenario.phases.get(phase, []):
                    report.rows.append(self.run_goal(executive, writer, goal))
                reports.append(report)
                logger.info(
                    f"Seed {seed} {phase}: {report.total_failures} failures, "
                    f"{report.unrecoverable} unrecoverable, {report.totals()['duration']:.0f} s"
                )
            logger.debug(f"Seed {seed}: {len(memory)} episodes, injected {injector.counts}")
        return reports

    def run_goal(self, executive: PlanExecutive, writer: NdjsonWriter, goal: TransportGoal) -> ObjectResult:
        """Transport one object and count the failures that originated in its task tree"""
        row = ObjectResult(goal.object_type)
        if goal.object_id not in executive.truth.objects:
            row.succeeded = False
            logger.warning(f"{goal.object_id} was removed from the scene; skipping its {executive.phase} goal")
            self._phase_record(executive, writer, goal, row, {p: 0.0 for p in PHASES})
            return row
        start = dict(executive.durations)
        outcome = executive.run(goal.action(executive.belief))
        for node in executive.interpreter.tree.subtree(outcome.task_id):
            if node.failure is not None:
                row.failures[failure_column(node.failure.category)] += 1
        durations = {p: executive.durations[p] - start[p] for p in PHASES}
        row.duration = sum(durations.values())
        row.succeeded = outcome.succeeded
        self._phase_record(executive, writer, goal, row, durations)
        if not outcome.succeeded:
            logger.warning(f"{goal.object_id} ({executive.phase}) failed: {outcome.failure}")
            if outcome.failure is not None and outcome.failure.category == FailureCategory.UNRECOVERABLE:
                self.intervene(executive, writer, goal.object_id)
        return row

    @staticmethod
    def _phase_record(
        executive: PlanExecutive,
        writer: NdjsonWriter,
        goal: TransportGoal,
        row: ObjectResult,
        durations: Dict[str, float]
    ) -> None:
        writer.write({
            "type": "phase",
            "phase": executive.phase,
            "object": goal.object_id,
            "object_type": goal.object_type,
            "succeeded": row.succeeded,
            "failures": dict(row.failures),
            "durations": durations,
            "duration": row.duration,
        })

    def project(
        self,
        seed: int,
        object_id: str,
        phase: str = "setting",
        binding: Optional[Dict[str, Any]] = None
    ) -> Tuple[Designator, Optional[PlanFailure]]:
        """Validate one action in projection on the freshly spawned world of a seed.

        With a binding (any of ``base-pose``, ``arm``, ``grasp``) the action
        is a pick of the object with those parameters; without one it is the
        object's transport goal in ``phase``.

        Returns:
            (projected action, failure or None)
        """
        with NdjsonWriter(None) as writer:
            executive, _, _ = self.build_executive(seed, writer, run_id=f"project-seed{seed}")
        executive.phase = phase
        if object_id not in executive.belief.objects:
            raise ConfigError(f"Scenario {self.scenario.name} spawns no object {object_id}")
        if binding:
            obj = executive.belief.objects[object_id]
            action = an_action(**{
                "type": "picking-up",
                "object": an_object(type=obj.object_type, name=object_id, pose=obj.pose),
                **{key: value for key, value in binding.items() if value is not None},
            })
        else:
            goals = [g for g in self.scenario.phases.get(phase, []) if g.object_id == object_id]
            if not goals:
                raise ConfigError(f"Phase {phase} has no goal for {object_id}")
            action = goals[0].action(executive.belief)
        failure = executive.project(action)
        verdict = "succeeds" if failure is None else f"fails with {failure.category.value}"
        logger.info(f"Projection of {action.describe()} (seed {seed}) {verdict}")
        return action, failure

    def intervene(self, executive: PlanExecutive, writer: NdjsonWriter, object_id: str) -> None:
        """A human clears the scene after an unrecoverable failure.

        The failed object and anything still in the hands are taken away and
        the arms are parked, so the run continues with the next goal.
        """
        removed = sorted({object_id, *executive.held_objects(executive.truth), *executive.held_objects(executive.belief)})
        executive.truth = _without(executive.truth, removed).with_positions(executive.robot.park)
        executive.belief = _without(executive.belief, removed).with_positions(executive.robot.park)
        writer.write({
            "type": "event",
            "name": "human-intervention",
            "payload": {"removed": removed, "phase": executive.phase},
            "time": executive.now,
        })
        logger.warning(f"Human intervention: removed {removed}, arms parked")


def _without(world: WorldState, object_ids: List[str]) -> WorldState:
    objects = {oid: obj for oid, obj in world.objects.items() if oid not in object_ids}
    return WorldState(world.robot, world.environment, world.positions, objects, world.sim_time)


def run_marathon(config: HarnessConfig, mode: Optional[str] = None) -> MarathonResult:
    """Run the scenario for every configured seed and save one report per (seed, phase)"""
    return MarathonRunner(config, mode).run()


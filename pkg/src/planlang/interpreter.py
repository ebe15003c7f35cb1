"""Discrete-event plan interpreter.

Plan bodies are generator functions taking a :class:`TaskContext`. They
compose with ``yield from``; the simpy scheduler interleaves concurrent
branches on a logical clock, so a run is a pure function of its inputs.
"""

from dataclasses import dataclass
from typing import Any, Callable, Generator, Iterable, List, Optional

import simpy

from ..models.designator import Designator
from ..models.domain import FailureCategory, PlanFailure
from ..utils.logger import logger
from .serialization import TaskTreeRecorder
from .tasks import Event, EventBus, TaskNode, TaskStatus, TaskTree

PlanBody = Callable[["TaskContext"], Generator]


@dataclass(frozen=True)
class RetryPolicy:
    """How often a body is re-executed with the next parameter candidate"""
    max_retries: int = 3
    escalate: bool = False
    empty_category: FailureCategory = FailureCategory.MANIPULATION

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass
class Outcome:
    """Result of a top-level plan run"""
    status: TaskStatus
    value: Any = None
    failure: Optional[PlanFailure] = None
    task_id: Optional[int] = None

    @property
    def succeeded(self) -> bool:
        return self.status == TaskStatus.SUCCEEDED


class TaskContext:
    """Handle a plan body uses to create sub-tasks and to synchronize.

    Each context is bound to the task node its body runs in.
    """

    def __init__(self, interpreter: "Interpreter", node: Optional[TaskNode]):
        self.interpreter = interpreter
        self.node = node

    @property
    def env(self) -> simpy.Environment:
        return self.interpreter.env

    @property
    def now(self) -> float:
        return float(self.interpreter.env.now)

    def task(self, designator: Designator, body: PlanBody) -> Generator:
        """Run ``body`` as a child task node of this context"""
        interp = self.interpreter
        node = interp.tree.create(designator, self.node.id if self.node is not None else None)
        node.transition(TaskStatus.RUNNING, self.now)
        try:
            value = yield from body(TaskContext(interp, node))
        except PlanFailure as failure:
            if failure.task_id is None:
                failure.task_id = node.id
                node.failure = failure
                logger.info(f"Task {node.id} ({designator.describe()}) failed: {failure}")
            else:
                node.failed_by = failure.task_id
            node.transition(TaskStatus.FAILED, self.now)
            interp.finished(node)
            raise
        except simpy.Interrupt:
            node.transition(TaskStatus.EVAPORATED, self.now)
            interp.finished(node)
            raise
        node.transition(TaskStatus.SUCCEEDED, self.now)
        interp.finished(node)
        return value

    def seq(self, *steps: PlanBody) -> Generator:
        """Run steps one after another; the first failure stops the sequence"""
        values = []
        for step in steps:
            values.append((yield from step(self)))
        return values

    def pursue(self, *branches: PlanBody) -> Generator:
        """Run branches concurrently until the first one finishes.

        The first finisher in declaration order wins; the others are
        interrupted and end as evaporated at the same simulation time.

        Raises:
            PlanFailure: when the first finisher failed
        """
        if len(branches) < 2:
            raise ValueError(f"pursue needs at least two branches, got {len(branches)}")
        env = self.env
        outcomes: List[Optional[tuple]] = [None] * len(branches)

        def runner(index: int, branch: PlanBody) -> Generator:
            try:
                value = yield from branch(self)
                outcomes[index] = ("succeeded", value)
            except PlanFailure as failure:
                outcomes[index] = ("failed", failure)
            except simpy.Interrupt:
                outcomes[index] = ("evaporated", None)

        processes = [env.process(runner(i, b)) for i, b in enumerate(branches)]
        try:
            yield env.any_of(processes)
        except simpy.Interrupt:
            yield from self._stop(processes)
            raise
        winner = next(i for i, o in enumerate(outcomes) if o is not None and o[0] != "evaporated")
        yield from self._stop(processes)
        status, value = outcomes[winner]
        logger.debug(f"pursue finished by branch {winner} ({status}) at t={self.now:.2f}")
        if status == "failed":
            raise value
        return value

    def _stop(self, processes: List[simpy.Process]) -> Generator:
        alive = [p for p in processes if p.is_alive]
        for process in alive:
            process.interrupt("evaporated")
        while alive:
            try:
                yield self.env.all_of(alive)
            except simpy.Interrupt:
                # a branch interrupted before its first step fails with the interrupt itself
                pass
            alive = [p for p in alive if p.is_alive]

    def wait_for(self, name: str) -> Generator:
        """Block until an event named ``name`` is posted; returns the Event"""
        event = yield self.interpreter.bus.wait(name)
        return event

    def post(self, name: str, payload: Optional[dict] = None) -> Event:
        return self.interpreter.bus.post(name, payload)

    def sleep(self, duration: float) -> Generator:
        if duration > 0:
            yield self.env.timeout(duration)

    def with_retry(
        self,
        policy: RetryPolicy,
        body: Callable[["TaskContext", Any], Generator],
        candidates: Iterable[Any]
    ) -> Generator:
        """Execute ``body`` with successive parameter candidates until one succeeds.

        Every retry increments the retry counter of this context's node.
        Unrecoverable failures are never retried.

        Raises:
            PlanFailure: the last failure when candidates or retries run out
                (unrecoverable when the policy escalates)
        """
        last: Optional[PlanFailure] = None
        retries = 0
        for candidate in candidates:
            try:
                value = yield from body(self, candidate)
                return value
            except PlanFailure as failure:
                if failure.category == FailureCategory.UNRECOVERABLE:
                    raise
                last = failure
                if retries >= policy.max_retries:
                    break
                retries += 1
                if self.node is not None:
                    self.node.retries += 1
                logger.info(f"Retry {retries}/{policy.max_retries} after {failure.category.value}")
        if last is None:
            raise PlanFailure(policy.empty_category, "no parameter candidates")
        if policy.escalate:
            raise PlanFailure(
                FailureCategory.UNRECOVERABLE,
                f"gave up after {retries} retries: {last.message}",
                details={"escalated_from": last.task_id},
            )
        raise last


class Interpreter:
    """Owns the clock, the task tree and the event bus of one execution.

    Not reusable across executions: create one per run.

    Args:
        recorder: Receives finished task nodes and events
        start_time: Initial simulation time
    """

    def __init__(self, recorder: Optional[TaskTreeRecorder] = None, start_time: float = 0.0):
        self.env = simpy.Environment(initial_time=start_time)
        self.tree = TaskTree()
        self.recorder = recorder
        self.bus = EventBus(self.env, recorder.event if recorder is not None else None)
        self.root = TaskContext(self, None)

    @property
    def now(self) -> float:
        return float(self.env.now)

    def finished(self, node: TaskNode) -> None:
        if self.recorder is not None:
            self.recorder.task(node)

    def run(self, designator: Designator, body: PlanBody) -> Outcome:
        """Run a plan body as a root task until it finishes"""
        result: dict = {}

        def root() -> Generator:
            try:
                result["value"] = yield from self.root.task(designator, body)
            except PlanFailure as failure:
                result["failure"] = failure

        process = self.env.process(root())
        self.env.run(until=process)
        node = self.tree.roots()[-1]
        if "failure" in result:
            return Outcome(TaskStatus.FAILED, None, result["failure"], node.id)
        return Outcome(TaskStatus.SUCCEEDED, result.get("value"), None, node.id)

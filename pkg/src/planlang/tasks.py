"""Task tree nodes and the event bus of the plan interpreter"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import simpy

from ..models.designator import Designator
from ..models.domain import PlanFailure
from ..utils.logger import logger


class TaskStatus(str, Enum):
    """Lifecycle of a task node"""
    CREATED = "created"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    EVAPORATED = "evaporated"

    @property
    def terminal(self) -> bool:
        return self in (TaskStatus.SUCCEEDED, TaskStatus.FAILED, TaskStatus.EVAPORATED)


_TRANSITIONS = {
    TaskStatus.CREATED: {TaskStatus.RUNNING, TaskStatus.EVAPORATED},
    TaskStatus.RUNNING: {TaskStatus.SUCCEEDED, TaskStatus.FAILED, TaskStatus.EVAPORATED},
}


@dataclass
class TaskNode:
    """One performed step of a plan.

    ``failure`` is set only on the node where a failure originated; ancestors
    that fail because of it point to that node through ``failed_by``.
    """
    id: int
    designator: Designator
    parent: Optional[int] = None
    children: List[int] = field(default_factory=list)
    status: TaskStatus = TaskStatus.CREATED
    start: Optional[float] = None
    end: Optional[float] = None
    failure: Optional[PlanFailure] = None
    failed_by: Optional[int] = None
    retries: int = 0
    motion_commands: int = 0

    def transition(self, status: TaskStatus, time: float) -> None:
        """Move to a new status; only forward transitions are allowed"""
        if status not in _TRANSITIONS.get(self.status, set()):
            raise ValueError(f"Task {self.id}: illegal transition {self.status.value} -> {status.value}")
        self.status = status
        if status == TaskStatus.RUNNING:
            self.start = time
        else:
            if self.start is None:
                self.start = time
            self.end = time

    def to_record(self) -> Dict[str, Any]:
        return {
            "type": "task",
            "id": self.id,
            "parent": self.parent,
            "designator": self.designator.to_dict(),
            "status": self.status.value,
            "start": self.start,
            "end": self.end,
            "failure": self.failure.to_record() if self.failure is not None else None,
            "failed_by": self.failed_by,
            "retries": self.retries,
            "motion_commands": self.motion_commands,
        }


class TaskTree:
    """All task nodes of one interpreter run, numbered in creation order"""

    def __init__(self):
        self.nodes: Dict[int, TaskNode] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, task_id: int) -> TaskNode:
        return self.nodes[task_id]

    def __iter__(self):
        return iter(self.nodes.values())

    def create(self, designator: Designator, parent: Optional[int] = None) -> TaskNode:
        node = TaskNode(len(self.nodes), designator, parent)
        if parent is not None:
            self.nodes[parent].children.append(node.id)
        self.nodes[node.id] = node
        return node

    def roots(self) -> List[TaskNode]:
        return [n for n in self.nodes.values() if n.parent is None]

    def failures(self) -> List[TaskNode]:
        """Nodes where a failure originated"""
        return [n for n in self.nodes.values() if n.failure is not None]

    def subtree(self, task_id: int) -> List[TaskNode]:
        out = [self.nodes[task_id]]
        for child in self.nodes[task_id].children:
            out += self.subtree(child)
        return out

    def violations(self) -> List[str]:
        """Well-formedness problems: open nodes, interval containment, failure ownership"""
        problems = []
        for node in self.nodes.values():
            if not node.status.terminal:
                problems.append(f"task {node.id} still {node.status.value}")
                continue
            if node.start is not None and node.end is not None and node.end < node.start:
                problems.append(f"task {node.id} ends before it starts")
            if node.status == TaskStatus.FAILED and node.failure is None and node.failed_by is None:
                problems.append(f"task {node.id} failed without a failure")
            if node.failure is not None and node.failure.task_id != node.id:
                problems.append(f"task {node.id} holds the failure of task {node.failure.task_id}")
            if node.parent is None:
                continue
            parent = self.nodes[node.parent]
            if node.start is not None and parent.start is not None and node.start < parent.start - 1e-9:
                problems.append(f"task {node.id} starts before its parent {parent.id}")
            if node.end is not None and parent.end is not None and node.end > parent.end + 1e-9:
                problems.append(f"task {node.id} ends after its parent {parent.id}")
        return problems


@dataclass
class Event:
    """Named occurrence on the event bus"""
    name: str
    payload: Dict[str, Any]
    time: float

    def to_record(self) -> Dict[str, Any]:
        return {"type": "event", "name": self.name, "payload": dict(self.payload), "time": self.time}


class EventBus:
    """Named events over a simpy clock; waiters are released when an event is posted"""

    def __init__(self, env: simpy.Environment, on_event: Optional[Callable[[Event], None]] = None):
        self.env = env
        self.log: List[Event] = []
        self.on_event = on_event
        self._waiters: Dict[str, List[simpy.Event]] = {}

    def post(self, name: str, payload: Optional[Dict[str, Any]] = None) -> Event:
        event = Event(name, dict(payload or {}), float(self.env.now))
        if self.log and event.time < self.log[-1].time:
            raise RuntimeError(f"Event {name} posted at {event.time} after {self.log[-1].time}")
        self.log.append(event)
        logger.debug(f"Event {name} at t={event.time:.2f}")
        if self.on_event is not None:
            self.on_event(event)
        for waiter in self._waiters.pop(name, []):
            if not waiter.triggered:
                waiter.succeed(event)
        return event

    def wait(self, name: str) -> simpy.Event:
        waiter = self.env.event()
        self._waiters.setdefault(name, []).append(waiter)
        return waiter

"""Replay of episodic logs as an indented task-tree timeline"""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..models.domain import LogFormatError
from ..planlang.serialization import iter_positioned
from ..utils.logger import logger

INDENT = "  "


@dataclass
class Timeline:
    """Rendered lines of a replayed log plus the counts shown in its summary"""
    lines: List[str] = field(default_factory=list)
    node_count: int = 0
    failure_count: int = 0
    retry_count: int = 0
    event_count: int = 0

    def render(self) -> str:
        summary = (
            f"{self.node_count} tasks, {self.failure_count} failures, "
            f"{self.retry_count} retries, {self.event_count} events"
        )
        return "\n".join(self.lines + ["", summary]) + "\n"


def _label(designator: Dict[str, Any]) -> str:
    properties = designator.get("properties", {})
    label = str(properties.get("type") or properties.get("on") or properties.get("in") or designator.get("kind", "?"))
    obj = properties.get("object")
    if isinstance(obj, dict):
        label += " " + str(obj.get("properties", {}).get("type", ""))
    return label.strip()


def _task_line(record: Dict[str, Any], depth: int) -> str:
    start = "?" if record.get("start") is None else f"{record['start']:.1f}"
    end = "?" if record.get("end") is None else f"{record['end']:.1f}"
    line = f"{INDENT * depth}[{start}-{end}] {record['status']} {_label(record['designator'])} #{record['id']}"
    if record.get("retries"):
        line += f" (retries: {record['retries']})"
    failure = record.get("failure")
    if failure:
        line += f" !! {failure['category']}: {failure.get('message', '')}"
    elif record.get("failed_by") is not None:
        line += f" <- task {record['failed_by']}"
    return line


def replay(path: Union[str, Path]) -> Timeline:
    """Read a run log and nest its task records under their parents.

    Roots appear in id order, which is their start order; events are
    listed after the root they happened in.

    Raises:
        LogFormatError: corrupt line or a task record without id and status
    """
    tasks: Dict[int, Dict[str, Any]] = {}
    children: Dict[Optional[int], List[int]] = defaultdict(list)
    events: List[Dict[str, Any]] = []
    header: Dict[str, Any] = {}
    for number, offset, record in iter_positioned(path):
        kind = record["type"]
        if kind == "header":
            header = record
        elif kind == "task":
            try:
                task_id = int(record["id"])
            except (KeyError, TypeError, ValueError) as exc:
                raise LogFormatError(f"Malformed task record: {exc}", number, offset) from exc
            if "status" not in record or "designator" not in record:
                raise LogFormatError("Task record without status or designator", number, offset)
            tasks[task_id] = record
            children[record.get("parent")].append(task_id)
        elif kind == "event":
            events.append(record)

    timeline = Timeline(
        node_count=len(tasks),
        failure_count=sum(1 for r in tasks.values() if r.get("failure")),
        retry_count=sum(int(r.get("retries") or 0) for r in tasks.values()),
        event_count=len(events),
    )
    if header:
        timeline.lines.append(f"run {header.get('run_id', '?')} seed {header.get('seed', '?')}")

    def visit(task_id: int, depth: int) -> None:
        record = tasks[task_id]
        timeline.lines.append(_task_line(record, depth))
        for child in sorted(children.get(task_id, [])):
            visit(child, depth + 1)

    pending = sorted(events, key=lambda e: e.get("time", 0.0))
    for root in sorted(children.get(None, [])):
        visit(root, 0)
        end = tasks[root].get("end")
        while pending and end is not None and pending[0].get("time", 0.0) <= end:
            event = pending.pop(0)
            timeline.lines.append(f"{INDENT}* {event['time']:.1f} event {event['name']} {event.get('payload', {})}")
    for event in pending:
        timeline.lines.append(f"* {event.get('time', 0.0):.1f} event {event['name']} {event.get('payload', {})}")
    orphans = sorted(set(tasks) - _reachable(children))
    for task_id in orphans:
        timeline.lines.append(_task_line(tasks[task_id], 0) + " (parent missing)")
    logger.debug(f"Replayed {path}: {timeline.node_count} tasks, {timeline.failure_count} failures")
    return timeline


def _reachable(children: Dict[Optional[int], List[int]]) -> set:
    seen: set = set()
    stack = list(children.get(None, []))
    while stack:
        task_id = stack.pop()
        seen.add(task_id)
        stack.extend(children.get(task_id, []))
    return seen

"""NDJSON episodic logs: one JSON record per line, header first"""

from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, TextIO, Tuple, Union
import io
import json

import numpy as np

from ..models.domain import LogFormatError
from ..utils.logger import logger
from .tasks import Event, TaskNode

SCHEMA = "episodic-memory/1"


def _default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def dumps(record: Dict[str, Any]) -> str:
    """Canonical single-line encoding (sorted keys, so identical runs give identical bytes)"""
    return json.dumps(record, sort_keys=True, separators=(",", ":"), default=_default)


class NdjsonWriter:
    """Append-only record writer over a file or an in-memory buffer.

    Args:
        path: Log file; ``None`` keeps records in memory (projection runs)
        header: Extra header fields such as run id and seed
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, header: Optional[Dict[str, Any]] = None):
        self.path = Path(path) if path is not None else None
        self.count = 0
        self._stream: TextIO
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fresh = not self.path.exists() or self.path.stat().st_size == 0
            self._stream = open(self.path, "a", encoding="utf-8")
        else:
            fresh = True
            self._stream = io.StringIO()
        if fresh:
            self.write({"type": "header", "schema": SCHEMA, **(header or {})})

    def write(self, record: Dict[str, Any]) -> None:
        if "type" not in record:
            raise ValueError(f"Log record without a type: {record}")
        self._stream.write(dumps(record) + "\n")
        self.count += 1

    def flush(self) -> None:
        self._stream.flush()

    def getvalue(self) -> str:
        """Contents of an in-memory log"""
        if not isinstance(self._stream, io.StringIO):
            raise ValueError("getvalue is only available for in-memory logs")
        return self._stream.getvalue()

    def close(self) -> None:
        if self.path is not None and not self._stream.closed:
            self._stream.close()
            logger.debug(f"Closed {self.path} after {self.count} records")

    def __enter__(self) -> "NdjsonWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def iter_records(source: Union[str, Path, TextIO]) -> Iterator[Dict[str, Any]]:
    """Parse a log line by line.

    Raises:
        LogFormatError: with the line number and byte offset of a corrupt line
    """
    for _, _, record in iter_positioned(source):
        yield record


def iter_positioned(source: Union[str, Path, TextIO]) -> Iterator[Tuple[int, int, Dict[str, Any]]]:
    """Like :func:`iter_records`, yielding (line number, byte offset, record)"""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            data = f.read()
    else:
        data = source.read().encode("utf-8")
    offset = 0
    for number, raw in enumerate(data.splitlines(keepends=True), start=1):
        line = raw.strip()
        if line:
            try:
                record = json.loads(line)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise LogFormatError(f"Corrupt record: {exc}", number, offset) from exc
            if not isinstance(record, dict) or "type" not in record:
                raise LogFormatError("Record is not a typed object", number, offset)
            if number == 1 and record["type"] == "header" and record.get("schema") != SCHEMA:
                raise LogFormatError(f"Unsupported schema {record.get('schema')!r}", number, offset)
            yield number, offset, record
        offset += len(raw)


def read_records(source: Union[str, Path, TextIO], record_type: Optional[str] = None) -> List[Dict[str, Any]]:
    return [r for r in iter_records(source) if record_type is None or r["type"] == record_type]


class TaskTreeRecorder:
    """Streams finished task nodes and bus events into an episodic log"""

    def __init__(self, writer: NdjsonWriter):
        self.writer = writer

    def task(self, node: TaskNode) -> None:
        self.writer.write(node.to_record())

    def event(self, event: Event) -> None:
        self.writer.write(event.to_record())

    def record(self, record: Dict[str, Any]) -> None:
        self.writer.write(record)

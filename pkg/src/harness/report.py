"""Run reports: failure counts and durations per transported object"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union
import json

import pandas as pd

from ..models.domain import FailureCategory
from ..planlang.serialization import dumps
from ..utils.logger import logger

FAILURE_COLUMNS = (
    "unrecoverable",
    "perception",
    "grasping",
    "manipulation",
    "env-manipulation",
    "navigation",
)
COLUMNS = FAILURE_COLUMNS + ("duration",)
# Header labels of the rendered tables, in column order
COLUMN_LABELS = {
    "unrecoverable": "Unrecover. fail.",
    "perception": "Perc. fail.",
    "grasping": "Grasp. fail.",
    "manipulation": "Manip. fail.",
    "env-manipulation": "Env. manip. fail.",
    "navigation": "Nav. fail.",
    "duration": "Duration (sec)",
}

# Settle failures happen while placing, so they count as manipulation failures
CATEGORY_COLUMNS = {
    FailureCategory.UNRECOVERABLE: "unrecoverable",
    FailureCategory.PERCEPTION: "perception",
    FailureCategory.GRASP: "grasping",
    FailureCategory.MANIPULATION: "manipulation",
    FailureCategory.SETTLE: "manipulation",
    FailureCategory.ENV_MANIPULATION: "env-manipulation",
    FailureCategory.NAVIGATION: "navigation",
}


def failure_column(category: Union[FailureCategory, str]) -> str:
    return CATEGORY_COLUMNS[FailureCategory(category)]


def empty_counts() -> Dict[str, int]:
    return {column: 0 for column in FAILURE_COLUMNS}


@dataclass
class ObjectResult:
    """Outcome of one transport goal of a marathon phase"""
    object: str
    failures: Dict[str, int] = field(default_factory=empty_counts)
    duration: float = 0.0
    succeeded: bool = True

    def __post_init__(self):
        unknown = sorted(set(self.failures) - set(FAILURE_COLUMNS))
        if unknown:
            raise ValueError(f"Unknown failure columns {unknown}")
        if min(self.failures.values(), default=0) < 0:
            raise ValueError(f"Failure counts must be non-negative, got {self.failures}")
        if self.duration < 0:
            raise ValueError(f"Duration must be non-negative, got {self.duration}")
        self.failures = {column: int(self.failures.get(column, 0)) for column in FAILURE_COLUMNS}

    def add(self, category: Union[FailureCategory, str]) -> None:
        self.failures[failure_column(category)] += 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "object": self.object,
            "failures": dict(self.failures),
            "duration": self.duration,
            "succeeded": self.succeeded,
        }


@dataclass
class RunReport:
    """One marathon phase of one seeded run.

    Rows keep the goal order of the phase; a row per transported object.
    """
    phase: str
    mode: str
    seeds: List[int]
    rows: List[ObjectResult] = field(default_factory=list)

    @property
    def objects(self) -> List[str]:
        return [row.object for row in self.rows]

    def totals(self) -> Dict[str, float]:
        """Column sums over all objects, duration included"""
        out: Dict[str, float] = {column: sum(row.failures[column] for row in self.rows) for column in FAILURE_COLUMNS}
        out["duration"] = sum(row.duration for row in self.rows)
        return out

    @property
    def unrecoverable(self) -> int:
        return sum(row.failures["unrecoverable"] for row in self.rows)

    @property
    def total_failures(self) -> int:
        return sum(sum(row.failures.values()) for row in self.rows)

    def to_frame(self) -> pd.DataFrame:
        """Counts per object plus a Sum row, columns in report order"""
        frame = pd.DataFrame(
            [{**row.failures, "duration": row.duration} for row in self.rows],
            index=self.objects,
            columns=list(COLUMNS),
        )
        frame.loc["Sum"] = [self.totals()[column] for column in COLUMNS]
        frame.index.name = "object"
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "report",
            "phase": self.phase,
            "mode": self.mode,
            "seeds": list(self.seeds),
            "rows": [row.to_dict() for row in self.rows],
            "totals": self.totals(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunReport":
        return cls(
            phase=data["phase"],
            mode=data["mode"],
            seeds=[int(s) for s in data["seeds"]],
            rows=[
                ObjectResult(r["object"], dict(r["failures"]), float(r["duration"]), bool(r.get("succeeded", True)))
                for r in data["rows"]
            ],
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(self.to_dict()) + "\n", encoding="utf-8")
        logger.debug(f"Saved {self.phase} report to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunReport":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def load_reports(paths: Iterable[Union[str, Path]]) -> List[RunReport]:
    return [RunReport.load(path) for path in paths]

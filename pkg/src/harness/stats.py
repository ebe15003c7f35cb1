"""Aggregated result tables and the heuristic vs. specialized comparison"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd
import yaml

from ..models.domain import InsufficientData, ReportSchemaError
from ..specialization.gaussian import FitConfig
from ..utils.logger import logger
from .config import HarnessConfig
from .marathon import run_marathon
from .report import COLUMN_LABELS, COLUMNS, FAILURE_COLUMNS, RunReport
from .training import ExperienceCollector, train

PHASE_TITLES = {"setting": "table setting", "cleaning": "table cleaning"}


def count_cell(total: int, runs: int) -> str:
    """Average count over runs as an unreduced fraction: 29 over 5 runs is '29/5'"""
    return "0" if total == 0 else f"{total}/{runs}"


@dataclass
class StatsTable:
    """Averages of several runs of one phase and mode.

    ``frame`` holds the per-object means plus a Sum row; ``cells`` the
    rendered strings of the same shape.
    """
    phase: str
    mode: str
    runs: int
    frame: pd.DataFrame
    cells: pd.DataFrame

    @property
    def title(self) -> str:
        return f"Results of {PHASE_TITLES.get(self.phase, self.phase)}, averaged over {self.runs} runs."

    def to_markdown(self) -> str:
        header = ["Object"] + [COLUMN_LABELS[c] for c in COLUMNS]
        lines = [
            self.title,
            "",
            "| " + " | ".join(header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ]
        for name, row in self.cells.iterrows():
            lines.append("| " + " | ".join([str(name)] + [row[c] for c in COLUMNS]) + " |")
        return "\n".join(lines) + "\n"

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(path, float_format="%.6f")
        return path

    def save(self, directory: Union[str, Path]) -> Dict[str, Path]:
        """Write ``<mode>-<phase>.md`` and ``.csv`` into a directory"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        markdown = directory / f"{self.mode}-{self.phase}.md"
        markdown.write_text(self.to_markdown(), encoding="utf-8")
        return {"markdown": markdown, "csv": self.to_csv(directory / f"{self.mode}-{self.phase}.csv")}


def _check_schema(reports: Sequence[RunReport]) -> None:
    if not reports:
        raise ReportSchemaError("No reports to aggregate")
    first = reports[0]
    for report in reports[1:]:
        if report.phase != first.phase or report.mode != first.mode:
            raise ReportSchemaError(
                f"Cannot aggregate {report.mode}/{report.phase} with {first.mode}/{first.phase}"
            )
        if report.objects != first.objects:
            raise ReportSchemaError(f"Object rows differ: {report.objects} vs. {first.objects}")


def stats(reports: Sequence[RunReport]) -> StatsTable:
    """Average reports of one phase and mode into a result table.

    Failure cells read as the total over runs divided by the number of runs;
    durations are mean seconds, and the Sum row adds up the rows.

    Raises:
        ReportSchemaError: no reports, or reports of different phases,
            modes or object rows
    """
    reports = list(reports)
    _check_schema(reports)
    runs = len(reports)
    objects = reports[0].objects
    totals = {
        column: [sum(report.rows[i].failures[column] for report in reports) for i in range(len(objects))]
        for column in FAILURE_COLUMNS
    }
    durations = [sum(report.rows[i].duration for report in reports) / runs for i in range(len(objects))]

    means: Dict[str, List[float]] = {c: [t / runs for t in totals[c]] for c in FAILURE_COLUMNS}
    means["duration"] = durations
    frame = pd.DataFrame(means, index=objects, columns=list(COLUMNS))
    frame.loc["Sum"] = frame.sum(axis=0)
    frame.index.name = "object"

    rows: Dict[str, List[str]] = {c: [count_cell(t, runs) for t in totals[c]] for c in FAILURE_COLUMNS}
    rounded = [int(round(d)) for d in durations]
    rows["duration"] = [str(d) for d in rounded]
    cells = pd.DataFrame(rows, index=objects, columns=list(COLUMNS))
    cells.loc["Sum"] = [count_cell(sum(totals[c]), runs) for c in FAILURE_COLUMNS] + [str(sum(rounded))]

    table = StatsTable(reports[0].phase, reports[0].mode, runs, frame, cells)
    logger.info(f"Aggregated {runs} {table.mode} {table.phase} reports")
    return table


def stats_by_phase(reports: Sequence[RunReport]) -> List[StatsTable]:
    """One table per (mode, phase) found in the reports, in order of appearance"""
    groups: Dict[tuple, List[RunReport]] = {}
    for report in reports:
        groups.setdefault((report.mode, report.phase), []).append(report)
    return [stats(group) for group in groups.values()]


@dataclass
class ModeComparison:
    """Total failures of both modes over the same scenario and seeds"""
    heuristic_total: int
    specialized_total: int
    seeds: List[int]

    @property
    def reduction(self) -> Optional[float]:
        """``1 - specialized / heuristic``; None when the heuristic mode never failed"""
        if self.heuristic_total == 0:
            return None
        return 1.0 - self.specialized_total / self.heuristic_total

    def passes(self, min_reduction: float = 0.0) -> bool:
        reduction = self.reduction
        return reduction is not None and self.specialized_total < self.heuristic_total and reduction >= min_reduction

    def render(self) -> str:
        reduction = "undefined" if self.reduction is None else f"{self.reduction:.1%}"
        return (
            f"heuristic failures: {self.heuristic_total}\n"
            f"specialized failures: {self.specialized_total}\n"
            f"reduction: {reduction}\n"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "heuristic_total": self.heuristic_total,
            "specialized_total": self.specialized_total,
            "seeds": list(self.seeds),
            "reduction": "undefined" if self.reduction is None else self.reduction,
        }


def compare_reports(heuristic: Sequence[RunReport], specialized: Sequence[RunReport]) -> ModeComparison:
    """Compare two sets of reports covering the same seeds and phases

    Raises:
        ReportSchemaError: the sets cover different seeds or phases
    """
    def coverage(reports: Sequence[RunReport]) -> List[tuple]:
        return sorted((seed, report.phase) for report in reports for seed in report.seeds)

    if coverage(heuristic) != coverage(specialized):
        raise ReportSchemaError("Compared modes must cover the same seeds and phases")
    comparison = ModeComparison(
        heuristic_total=sum(report.total_failures for report in heuristic),
        specialized_total=sum(report.total_failures for report in specialized),
        seeds=sorted({seed for report in heuristic for seed in report.seeds}),
    )
    reduction = "undefined" if comparison.reduction is None else f"{comparison.reduction:.1%}"
    logger.info(
        f"Mode comparison: heuristic {comparison.heuristic_total} vs. "
        f"specialized {comparison.specialized_total} failures, reduction {reduction}"
    )
    return comparison


def compare_modes(config: HarnessConfig) -> ModeComparison:
    """Train on pilot-seed experience, then run both modes on the benchmark seeds"""
    logs = ExperienceCollector(config).collect()
    result = train(logs, config.models_dir, fit_config=FitConfig(min_samples=config.min_successes))
    logger.info(result.summary())
    heuristic = run_marathon(config, mode="heuristic")
    specialized = run_marathon(config, mode="specialized")
    comparison = compare_reports(heuristic.reports, specialized.reports)
    if not comparison.passes(config.min_reduction):
        logger.warning(f"Specialized mode missed the required reduction of {config.min_reduction:.1%}")
    return comparison


@dataclass
class PilotThreshold:
    """Pass threshold of the mode comparison, derived from a pilot comparison.

    The pilot trains on one half of the pilot seeds and compares both modes
    on the other half; ``min_reduction`` is ``margin`` times the observed
    reduction, floored at 0.
    """
    training_seeds: List[int]
    evaluation_seeds: List[int]
    heuristic_total: int
    specialized_total: int
    margin: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.margin <= 1.0:
            raise ValueError(f"Threshold margin must lie in (0, 1], got {self.margin}")

    @property
    def pilot_reduction(self) -> Optional[float]:
        return ModeComparison(self.heuristic_total, self.specialized_total, self.evaluation_seeds).reduction

    @property
    def min_reduction(self) -> float:
        reduction = self.pilot_reduction
        if reduction is None:
            return 0.0
        return round(max(0.0, self.margin * reduction), 4)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        reduction = self.pilot_reduction
        data = {
            "training_seeds": list(self.training_seeds),
            "evaluation_seeds": list(self.evaluation_seeds),
            "heuristic_total": self.heuristic_total,
            "specialized_total": self.specialized_total,
            "pilot_reduction": None if reduction is None else round(reduction, 4),
            "margin": self.margin,
            "min_reduction": self.min_reduction,
        }
        header = "# Written by `main.py calibrate`; min_reduction = margin * pilot_reduction\n"
        path.write_text(header + yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
        logger.info(f"Pilot threshold saved to {path} (min_reduction={self.min_reduction:.3f})")
        return path


def calibrate_threshold(config: HarnessConfig, margin: float = 0.5) -> PilotThreshold:
    """Compare both modes on the pilot seeds alone and derive the pass threshold.

    Raises:
        InsufficientData: fewer than two pilot seeds
    """
    pilots = list(config.pilot_seeds)
    if len(pilots) < 2:
        raise InsufficientData(f"Calibration needs at least two pilot seeds, got {pilots}")
    half = len(pilots) // 2
    pilot_config = config.with_overrides(
        pilot_seeds=pilots[:half],
        seeds=pilots[half:],
        models_dir=Path(config.output_dir) / "pilot" / "models",
        output_dir=Path(config.output_dir) / "pilot",
        min_reduction=0.0,
    )
    comparison = compare_modes(pilot_config)
    threshold = PilotThreshold(
        training_seeds=pilots[:half],
        evaluation_seeds=pilots[half:],
        heuristic_total=comparison.heuristic_total,
        specialized_total=comparison.specialized_total,
        margin=margin,
    )
    logger.info(f"Pilot comparison on seeds {pilots[half:]}: required reduction {threshold.min_reduction:.1%}")
    return threshold

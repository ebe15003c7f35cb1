"""Validated harness configuration (marathon runs, seeds, failure injection)"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..models.domain import ConfigError
from ..motion.problem import ControlConfig
from ..perception.estimator import PerceptionConfig
from ..planlang.executive import ExecutiveConfig
from ..utils.logger import logger
from ..worldmodel.settle import SettleConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent.parent / "config"
MARATHON_PHASES = ("setting", "cleaning")


class FailureInjectionConfig(BaseModel):
    """Noise model applied to the ground truth of marathon runs.

    Grasp slips follow ``p = clip(grasp_slip_base * (1 + e / alignment_scale) * thinness)``
    with ``e`` the distance between the achieved and the nominal grasp.
    Carry drops and gripper jams are unrecoverable and only happen in the
    phases listed in ``unrecoverable_phases``.
    """
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    localization_sigma: float = Field(0.0, ge=0.0)
    localization_sigma_theta: float = Field(0.0, ge=0.0)
    grasp_slip_base: float = Field(0.0, ge=0.0, le=1.0)
    alignment_scale: float = Field(0.02, gt=0.0)
    thinness: Dict[str, float] = Field(default_factory=dict)
    handle_slip: Dict[str, float] = Field(default_factory=dict)
    default_handle_slip: float = Field(0.0, ge=0.0, le=1.0)
    perception_miss: Dict[str, float] = Field(default_factory=dict)
    default_perception_miss: float = Field(0.0, ge=0.0, le=1.0)
    carry_drop: Dict[str, float] = Field(default_factory=dict)
    gripper_jam: Dict[str, float] = Field(default_factory=dict)
    unrecoverable_phases: List[str] = Field(default_factory=lambda: ["cleaning"])

    @field_validator("handle_slip", "perception_miss", "carry_drop", "gripper_jam")
    @classmethod
    def _probabilities(cls, value: Dict[str, float], info) -> Dict[str, float]:
        for key, p in value.items():
            if not 0.0 <= float(p) <= 1.0:
                raise ValueError(f"{info.field_name}[{key}] must be in [0, 1], got {p}")
        return {key: float(p) for key, p in value.items()}

    @field_validator("thinness")
    @classmethod
    def _thinness(cls, value: Dict[str, float]) -> Dict[str, float]:
        for key, factor in value.items():
            if float(factor) < 0:
                raise ValueError(f"thinness[{key}] must be non-negative, got {factor}")
        return {key: float(factor) for key, factor in value.items()}

    @field_validator("unrecoverable_phases")
    @classmethod
    def _phases(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(MARATHON_PHASES))
        if unknown:
            raise ValueError(f"Unknown phases {unknown}, expected {MARATHON_PHASES}")
        return value

    @property
    def noiseless(self) -> bool:
        probabilities = [
            self.grasp_slip_base, self.default_handle_slip, self.default_perception_miss,
            *self.handle_slip.values(), *self.perception_miss.values(),
            *self.carry_drop.values(), *self.gripper_jam.values(),
        ]
        return max(probabilities + [self.localization_sigma, self.localization_sigma_theta]) == 0.0


class HarnessConfig(BaseModel):
    """Everything a marathon needs: files, mode, seeds, noise and component settings"""
    model_config = ConfigDict(extra="forbid")

    scenario: Path = CONFIG_DIR / "scenario.yaml"
    robot: Path = CONFIG_DIR / "robot_pr2_lite.yaml"
    reasoner: Path = CONFIG_DIR / "reasoner.yaml"
    mode: Literal["heuristic", "specialized", "combined"] = "heuristic"
    runs: int = Field(5, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    pilot_seeds: List[int] = Field(default_factory=list)
    collection_repeats: int = Field(1, ge=1)
    min_successes: int = Field(4, ge=4)
    min_reduction: float = 0.0
    pilot_threshold: Optional[Path] = None
    phases: List[Literal["setting", "cleaning"]] = Field(default_factory=lambda: list(MARATHON_PHASES))
    output_dir: Path = Path("results")
    models_dir: Path = Path("results/models")
    injection: FailureInjectionConfig = Field(default_factory=FailureInjectionConfig)
    executive: Dict[str, Any] = Field(default_factory=dict)
    perception: Dict[str, Any] = Field(default_factory=dict)
    settle: Dict[str, Any] = Field(default_factory=dict)
    control: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _seeds_match_runs(self) -> "HarnessConfig":
        if len(self.seeds) != self.runs:
            raise ValueError(f"seeds has {len(self.seeds)} entries but runs is {self.runs}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be distinct, got {self.seeds}")
        return self

    def executive_config(self) -> ExecutiveConfig:
        return _build(ExecutiveConfig, self.executive, "executive")

    def perception_config(self) -> PerceptionConfig:
        return _build(PerceptionConfig, self.perception, "perception")

    def settle_config(self) -> SettleConfig:
        return _build(SettleConfig, self.settle, "settle")

    def control_config(self) -> ControlConfig:
        return _build(ControlConfig, self.control, "control")

    def with_overrides(self, **changes: Any) -> "HarnessConfig":
        """Validated copy with some fields replaced (``seeds`` alone also sets ``runs``)

        Raises:
            ConfigError: the result is invalid
        """
        if "seeds" in changes and "runs" not in changes:
            changes["runs"] = len(changes["seeds"])
        try:
            return HarnessConfig.model_validate({**self.model_dump(), **changes})
        except ValidationError as exc:
            raise ConfigError(f"Invalid harness configuration: {exc}") from exc


def _build(cls: type, values: Dict[str, Any], section: str) -> Any:
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid {section} section: {exc}") from exc


def _resolve(base: Path, value: Any) -> Any:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_harness_config(path: Union[str, Path], **overrides: Any) -> HarnessConfig:
    """Read a marathon configuration file.

    Scenario, robot and reasoner paths are relative to the file's directory;
    output directories are relative to the working directory.

    Raises:
        ConfigError: unreadable file or invalid values
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Harness configuration not found: {path}")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    for key in ("scenario", "robot", "reasoner", "pilot_threshold"):
        if data.get(key) is not None:
            data[key] = _resolve(path.parent, data[key])
    if "min_reduction" not in data and data.get("pilot_threshold") is not None:
        data["min_reduction"] = read_min_reduction(data["pilot_threshold"])
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "seeds" in overrides and "runs" not in overrides:
        overrides["runs"] = len(overrides["seeds"])
    try:
        config = HarnessConfig.model_validate({**data, **overrides})
    except ValidationError as exc:
        raise ConfigError(f"Invalid harness configuration {path}: {exc}") from exc
    for section in ("executive_config", "perception_config", "settle_config", "control_config"):
        getattr(config, section)()
    logger.info(f"Harness configuration loaded from {path} (mode={config.mode}, seeds={config.seeds})")
    return config


def read_min_reduction(path: Union[str, Path]) -> float:
    """Required failure reduction recorded in a pilot threshold file; 0 when the file is missing

    Raises:
        ConfigError: unreadable file or a value outside [0, 1)
    """
    path = Path(path)
    if not path.exists():
        logger.warning(f"Pilot threshold {path} not found, requiring no failure reduction")
        return 0.0
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        value = float(data.get("min_reduction", 0.0))
    except (yaml.YAMLError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"Cannot read pilot threshold {path}: {exc}") from exc
    if not 0.0 <= value < 1.0:
        raise ConfigError(f"Pilot threshold {path}: min_reduction must lie in [0, 1), got {value}")
    return value

"""Core domain models shared by every subsystem of the marathon"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence
from enum import Enum
import math

import numpy as np
from scipy.spatial.transform import Rotation


class FailureCategory(str, Enum):
    """Failure taxonomy used for plan failures and report columns"""
    PERCEPTION = "perception-failure"
    GRASP = "grasp-failure"
    MANIPULATION = "manipulation-failure"
    ENV_MANIPULATION = "env-manipulation-failure"
    NAVIGATION = "navigation-failure"
    SETTLE = "settle-failure"
    UNRECOVERABLE = "unrecoverable"


class MarathonError(Exception):
    """Base error for the household marathon system"""


class ConfigError(MarathonError):
    """Malformed or inconsistent configuration file"""


class KinematicsError(MarathonError):
    """Unknown link or joint, or invalid kinematic structure"""


class FormulaError(MarathonError):
    """Goal formula cannot be evaluated (unknown predicate, unbound variable)"""


class QPInfeasible(MarathonError):
    """Hard constraints of a control tick admit no solution"""


class InsufficientData(MarathonError):
    """Too few successful episodes to fit a model"""


class EmptySupport(MarathonError):
    """A distribution has no cell with positive weight"""


class PCADegenerate(MarathonError):
    """Point cloud too small or collinear for principal axes"""


class ReportSchemaError(MarathonError):
    """Run reports that cannot be aggregated into one table"""


class LogFormatError(MarathonError):
    """Malformed line in an episodic log file"""

    def __init__(self, message: str, line_number: int, offset: int):
        super().__init__(f"{message} (line {line_number}, byte offset {offset})")
        self.line_number = line_number
        self.offset = offset


class PlanFailure(MarathonError):
    """Typed failure raised by plans and the actions they perform.

    The category is fixed at construction. ``task_id`` is filled in by the
    interpreter with the node where the failure originated.
    """

    def __init__(
        self,
        category: FailureCategory,
        message: str = "",
        task_id: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(f"{FailureCategory(category).value}: {message}")
        self._category = FailureCategory(category)
        self.message = message
        self.task_id = task_id
        self.details = details or {}

    @property
    def category(self) -> FailureCategory:
        return self._category

    def to_record(self) -> Dict[str, Any]:
        return {
            "category": self._category.value,
            "message": self.message,
            "task_id": self.task_id,
        }


class SettleFailure(PlanFailure):
    """Physics could not find a stable pose for an object"""

    def __init__(self, message: str = "", task_id: Optional[int] = None):
        super().__init__(FailureCategory.SETTLE, message, task_id)


class LocationUnreachable(PlanFailure):
    """A location designator grounded to an empty distribution"""

    def __init__(
        self,
        message: str = "",
        category: FailureCategory = FailureCategory.NAVIGATION
    ):
        super().__init__(category, message)


def wrap_angle(angle: float) -> float:
    """Wrap an angle into [-pi, pi)"""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


QUATERNION_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: translation plus unit quaternion (x, y, z, w)"""
    translation: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))

    def __post_init__(self):
        translation = np.asarray(self.translation, dtype=float).reshape(3)
        rotation = np.asarray(self.rotation, dtype=float).reshape(4)
        norm = float(np.linalg.norm(rotation))
        if abs(norm - 1.0) > QUATERNION_TOLERANCE:
            raise ValueError(f"Quaternion must have unit norm, got {norm}")
        object.__setattr__(self, "translation", translation)
        object.__setattr__(self, "rotation", rotation / norm)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        quat = Rotation.from_matrix(matrix[:3, :3]).as_quat()
        return cls(matrix[:3, 3].copy(), quat)

    @classmethod
    def from_xyz_rpy(cls, xyz: Sequence[float], rpy: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        quat = Rotation.from_euler("xyz", rpy).as_quat()
        return cls(np.asarray(xyz, dtype=float), quat)

    @classmethod
    def from_xy_theta(cls, x: float, y: float, theta: float, z: float = 0.0) -> "Pose":
        return cls.from_xyz_rpy((x, y, z), (0.0, 0.0, theta))

    @classmethod
    def from_rotation_matrix(cls, xyz: Sequence[float], rotation: np.ndarray) -> "Pose":
        return cls(np.asarray(xyz, dtype=float), Rotation.from_matrix(rotation).as_quat())

    def rotation_matrix(self) -> np.ndarray:
        return Rotation.from_quat(self.rotation).as_matrix()

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix()
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Pose") -> "Pose":
        """Return self * other"""
        return Pose.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "Pose":
        rot = self.rotation_matrix().T
        return Pose.from_rotation_matrix(-rot @ self.translation, rot)

    def transform_point(self, point: Sequence[float]) -> np.ndarray:
        return self.rotation_matrix() @ np.asarray(point, dtype=float) + self.translation

    def yaw(self) -> float:
        r = self.rotation_matrix()
        return math.atan2(r[1, 0], r[0, 0])

    def distance_to(self, other: "Pose") -> float:
        return float(np.linalg.norm(self.translation - other.translation))

    def angle_to(self, other: "Pose") -> float:
        """Rotation angle between the two orientations"""
        delta = Rotation.from_quat(self.rotation).inv() * Rotation.from_quat(other.rotation)
        return float(np.linalg.norm(delta.as_rotvec()))

    def xy_theta(self) -> tuple:
        return (float(self.translation[0]), float(self.translation[1]), self.yaw())

    def to_dict(self) -> Dict[str, list]:
        return {
            "translation": [float(v) for v in self.translation],
            "rotation": [float(v) for v in self.rotation],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[float]]) -> "Pose":
        return cls(np.asarray(data["translation"]), np.asarray(data["rotation"]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.translation, other.translation)
            and np.array_equal(self.rotation, other.rotation)
        )

    def __hash__(self) -> int:
        return hash((tuple(self.translation.round(12)), tuple(self.rotation.round(12))))

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.3f}" for v in self.translation)
        q = ", ".join(f"{v:.3f}" for v in self.rotation)
        return f"Pose(t=[{t}], q=[{q}])"


EPISODE_OUTCOMES = ("success", "failure")
EPISODE_SOURCES = ("execution", "projection")


@dataclass
class Episode:
    """One attempt of one parameterized action, as stored in the episodic log"""
    task_key: str
    base_pose: tuple  # (x, y, theta) of the robot base
    outcome: str
    grasp: Optional[str] = None
    arm: Optional[str] = None
    failure_category: Optional[str] = None
    durations: Dict[str, float] = field(default_factory=dict)
    run_id: str = ""
    seed: int = 0
    source: str = "execution"
    task_id: Optional[int] = None

    def __post_init__(self):
        """Validate outcome and parameter vector"""
        if self.outcome not in EPISODE_OUTCOMES:
            raise ValueError(f"Outcome must be one of {EPISODE_OUTCOMES}, got {self.outcome}")
        if self.source not in EPISODE_SOURCES:
            raise ValueError(f"Source must be one of {EPISODE_SOURCES}, got {self.source}")
        if len(self.base_pose) != 3:
            raise ValueError(f"Base pose must be (x, y, theta), got {self.base_pose}")
        if self.outcome == "failure" and self.failure_category is None:
            raise ValueError("Failed episode needs a failure category")
        if self.failure_category is not None:
            FailureCategory(self.failure_category)
        self.base_pose = tuple(float(v) for v in self.base_pose)
        for phase, duration in self.durations.items():
            if duration < 0:
                raise ValueError(f"Negative duration for phase {phase}: {duration}")

    @property
    def succeeded(self) -> bool:
        return self.outcome == "success"

    def to_record(self) -> Dict[str, Any]:
        return {
            "type": "episode",
            "task_key": self.task_key,
            "base_pose": list(self.base_pose),
            "grasp": self.grasp,
            "arm": self.arm,
            "outcome": self.outcome,
            "failure_category": self.failure_category,
            "durations": dict(self.durations),
            "run_id": self.run_id,
            "seed": self.seed,
            "source": self.source,
            "task_id": self.task_id,
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Episode":
        return cls(
            task_key=record["task_key"],
            base_pose=tuple(record["base_pose"]),
            outcome=record["outcome"],
            grasp=record.get("grasp"),
            arm=record.get("arm"),
            failure_category=record.get("failure_category"),
            durations=dict(record.get("durations", {})),
            run_id=record.get("run_id", ""),
            seed=int(record.get("seed", 0)),
            source=record.get("source", "execution"),
            task_id=record.get("task_id"),
        )

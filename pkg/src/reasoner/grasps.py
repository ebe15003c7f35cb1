"""Grasp catalog and grasp pose computation"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import math

import numpy as np
import yaml

from ..models.domain import ConfigError, Pose
from ..utils.logger import logger
from ..worldmodel.geometry import Shape

APPROACHES = ("top", "side", "rim", "handle")


@dataclass(frozen=True)
class GraspSpec:
    """One way of grasping objects of a type.

    Tool frame convention: x is the approach direction, y the finger
    closing axis, z completes the right-handed frame.
    """
    id: str
    object_type: str
    approach: str
    priority: int = 0
    pregrasp_offset: float = 0.1
    lift: float = 0.1
    depth: float = 0.025
    grasping_force: float = 30.0
    # rim grasps pinch a thin wall rather than the whole object
    fixed_width: Optional[float] = None
    # accepted deviation between handle direction and approach (handle grasps)
    max_handle_angle: float = 0.6

    def __post_init__(self):
        """Validate approach and offsets"""
        if self.approach not in APPROACHES:
            raise ValueError(f"Grasp {self.id}: approach must be one of {APPROACHES}, got {self.approach}")
        if self.pregrasp_offset <= 0:
            raise ValueError(f"Grasp {self.id}: pregrasp offset must be positive, got {self.pregrasp_offset}")
        if self.grasping_force <= 0:
            raise ValueError(f"Grasp {self.id}: grasping force must be positive")


@dataclass
class GraspPoses:
    """World poses of the tool frame along one grasp"""
    pregrasp: Pose
    grasp: Pose
    lift: Pose
    width: float
    object_in_tool: Pose


def _frame(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = x / np.linalg.norm(x)
    y = y - x * (x @ y)
    y = y / np.linalg.norm(y)
    return np.column_stack([x, y, np.cross(x, y)])


def azimuth(origin: np.ndarray, point: np.ndarray) -> float:
    return math.atan2(point[1] - origin[1], point[0] - origin[0])


def grasp_poses(
    spec: GraspSpec,
    object_pose: Pose,
    shape: Shape,
    shoulder: np.ndarray
) -> GraspPoses:
    """Tool poses for grasping an object from a given shoulder position.

    The arm moves in the vertical plane through its shoulder pan axis, so
    the tool yaw is the azimuth from the shoulder to the grasp point and
    the closing axis is horizontal.
    """
    center = object_pose.translation
    rotation = object_pose.rotation_matrix()
    top = float(np.abs(rotation[2]) @ shape.local_extents())
    point = center.copy()
    a = azimuth(shoulder, center)
    for _ in range(3):
        closing = np.array([-math.sin(a), math.cos(a), 0.0])
        point = center.copy()
        if spec.approach == "rim":
            lateral = 0.5 * shape.width_across(rotation.T @ closing)
            point = center + closing * lateral
        if spec.approach in ("top", "rim"):
            point[2] = center[2] + max(top - spec.depth, 0.0)
        a = azimuth(shoulder, point)
    horizontal = np.array([math.cos(a), math.sin(a), 0.0])
    closing = np.array([-math.sin(a), math.cos(a), 0.0])
    if spec.approach in ("top", "rim"):
        rot = _frame(np.array([0.0, 0.0, -1.0]), closing)
    else:
        rot = _frame(horizontal, closing)
    grasp = Pose.from_rotation_matrix(point, rot)
    pregrasp = Pose.from_rotation_matrix(point - rot[:, 0] * spec.pregrasp_offset, rot)
    lift = Pose.from_rotation_matrix(point + np.array([0.0, 0.0, spec.lift]), rot)
    if spec.fixed_width is not None:
        width = spec.fixed_width
    else:
        width = shape.width_across(rotation.T @ closing)
    return GraspPoses(pregrasp, grasp, lift, float(width), grasp.inverse().compose(object_pose))


def handle_grasp_poses(spec: GraspSpec, handle: np.ndarray, shoulder: np.ndarray) -> Optional[GraspPoses]:
    """Tool poses for a hook grasp on a container handle; None when the approach is too oblique"""
    point = handle[:3, 3]
    a = azimuth(shoulder, point)
    horizontal = np.array([math.cos(a), math.sin(a), 0.0])
    facing = handle[:3, 0].copy()
    facing[2] = 0.0
    if np.linalg.norm(facing) < 1e-9:
        return None
    facing /= np.linalg.norm(facing)
    if math.acos(float(np.clip(horizontal @ facing, -1.0, 1.0))) > spec.max_handle_angle:
        return None
    rot = _frame(horizontal, np.array([-math.sin(a), math.cos(a), 0.0]))
    grasp = Pose.from_rotation_matrix(point, rot)
    pregrasp = Pose.from_rotation_matrix(point - horizontal * spec.pregrasp_offset, rot)
    return GraspPoses(pregrasp, grasp, pregrasp, spec.fixed_width or 0.02, Pose.identity())


class GraspCatalog:
    """Grasps per object type, ordered by priority"""

    def __init__(self, grasps: List[GraspSpec], clearance: float = 0.02):
        self.clearance = clearance
        self._by_type: Dict[str, List[GraspSpec]] = {}
        ids = set()
        for grasp in grasps:
            if grasp.id in ids:
                raise ValueError(f"Duplicate grasp id {grasp.id}")
            ids.add(grasp.id)
            self._by_type.setdefault(grasp.object_type, []).append(grasp)
        for specs in self._by_type.values():
            specs.sort(key=lambda g: (g.priority, g.id))

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_type.values())

    def for_type(self, object_type: str) -> List[GraspSpec]:
        return list(self._by_type.get(object_type, []))

    def get(self, grasp_id: str) -> GraspSpec:
        for specs in self._by_type.values():
            for spec in specs:
                if spec.id == grasp_id:
                    return spec
        raise KeyError(f"Unknown grasp {grasp_id}")

    def opening(self, width: float) -> float:
        """Gripper opening for an object width (width plus clearance)"""
        return width + self.clearance

    @classmethod
    def from_dict(cls, data: Dict) -> "GraspCatalog":
        defaults = dict(data.get("defaults", {}))
        clearance = float(defaults.pop("clearance", 0.02))
        grasps = []
        try:
            for object_type, entries in data.get("grasps", {}).items():
                for entry in entries:
                    grasps.append(GraspSpec(object_type=object_type, **{**defaults, **entry}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Malformed grasp catalog: {exc}") from exc
        return cls(grasps, clearance)


def load_reasoner_config(path: Union[str, Path]) -> Tuple[GraspCatalog, Dict]:
    """Grasp catalog and the raw heuristic/stream sections of a reasoner file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Reasoner configuration not found: {path}")
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    catalog = GraspCatalog.from_dict(data)
    logger.info(f"Loaded {len(catalog)} grasps from {path}")
    return catalog, data

"""Quasi-static settling of a free object under gravity"""

from dataclasses import dataclass
from typing import List, Optional, Tuple
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.transform import Rotation

from ..models.domain import Pose, SettleFailure
from ..utils.logger import logger
from .geometry import Shape, ShapeKind, closest_points, point_distance, structured_surface_points, world_aabb
from .world import Body, WorldState

# Thick slab standing in for the floor, top face at z = 0
FLOOR = Body(
    "floor", "environment", None, Shape.box(100.0, 100.0, 0.5),
    np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, -0.5], [0, 0, 0, 1.0]]),
    np.eye(4),
)


@dataclass
class SettleConfig:
    """Thresholds of the settling procedure"""
    support_tolerance: float = 0.002
    penetration_tolerance: float = 1e-6
    significance_translation: float = 0.05
    significance_rotation: float = 0.35
    max_free_fall: float = 0.25
    com_tolerance: float = 0.005
    offset_step: float = 0.01
    max_steps: int = 200

    def __post_init__(self):
        if self.support_tolerance <= 0 or self.max_steps <= 0:
            raise ValueError("Support tolerance and step budget must be positive")


@dataclass
class _Motion:
    pushed: float = 0.0
    dropped: float = 0.0


class Settler:
    """Drops an object onto whatever supports it and topples unstable poses"""

    def __init__(self, config: Optional[SettleConfig] = None):
        self.config = config or SettleConfig()

    def settle(self, world: WorldState, object_id: str, max_iterations: int = 20) -> Tuple[Pose, bool]:
        """Find the stable pose of an object starting from its current pose.

        Args:
            world: World state; the object must not be attached
            object_id: Object to settle
            max_iterations: Number of offset retries when the first result is significant

        Returns:
            (stable pose, corrected-by-physics flag)
        """
        obj = world.object(object_id)
        if obj.attachment is not None:
            raise ValueError(f"Cannot settle {object_id} while attached to {obj.attachment}")
        obstacles = self._obstacles(world, object_id)
        start = obj.pose.matrix()
        samples = structured_surface_points(obj.shape, 120)[0]

        first: Optional[Tuple[np.ndarray, _Motion]] = None
        try:
            first = self._quasi_static(obj.shape, start, obstacles, samples)
        except SettleFailure as exc:
            logger.debug(f"Settling {object_id} from its pose failed: {exc}")
        if first is not None:
            significant, needs_retry = self._significance(start, *first)
            if not significant:
                return Pose.from_matrix(first[0]), False
            if not needs_retry:
                return Pose.from_matrix(first[0]), True

        for k in range(1, max_iterations + 1):
            candidate = start.copy()
            candidate[:3, 3] += self._spiral_offset(k)
            try:
                result = self._quasi_static(obj.shape, candidate, obstacles, samples)
            except SettleFailure:
                continue
            if not self._significance(candidate, *result)[0]:
                logger.debug(f"Settled {object_id} after offset retry {k}")
                return Pose.from_matrix(result[0]), True
        if first is None:
            raise SettleFailure(f"No stable pose found for {object_id}")
        return Pose.from_matrix(first[0]), True

    # ------------------------------------------------------------------

    def _obstacles(self, world: WorldState, object_id: str) -> List[Body]:
        bodies = list(world.environment_bodies()) + world.object_bodies(exclude=[object_id])
        return bodies + [FLOOR]

    def _spiral_offset(self, k: int) -> np.ndarray:
        ring = (k - 1) // 8 + 1
        angle = (k - 1) % 8 * math.pi / 4.0
        radius = self.config.offset_step * ring
        return np.array([radius * math.cos(angle), radius * math.sin(angle), 0.0])

    def _significance(self, start: np.ndarray, end: np.ndarray, motion: _Motion) -> Tuple[bool, bool]:
        """(significant, caused by fall or topple rather than push-out)"""
        rot = Rotation.from_matrix(start[:3, :3].T @ end[:3, :3]).magnitude()
        fell = motion.dropped > self.config.max_free_fall
        toppled = rot > self.config.significance_rotation
        pushed = motion.pushed > self.config.significance_translation
        return (fell or toppled or pushed), (fell or toppled)

    def _quasi_static(
        self, shape: Shape, start: np.ndarray, obstacles: List[Body], samples: np.ndarray
    ) -> Tuple[np.ndarray, _Motion]:
        cfg = self.config
        pose = start.copy()
        motion = _Motion()
        for _ in range(cfg.max_steps):
            motion.pushed += self._push_out(shape, pose, obstacles)
            gap, supporters = self._support_gap(shape, pose, obstacles)
            if gap > cfg.support_tolerance:
                step = gap - 0.5 * cfg.support_tolerance
                pose[2, 3] -= step
                motion.dropped += step
                continue
            support = self._support_points(shape, pose, samples, supporters)
            if self._stable(pose[:3, 3], support):
                return pose, motion
            pose = self._topple(shape, pose, support)
        raise SettleFailure(f"No quasi-static equilibrium within {cfg.max_steps} steps")

    def _push_out(self, shape: Shape, pose: np.ndarray, obstacles: List[Body]) -> float:
        total = 0.0
        for _ in range(10):
            moved = False
            for body in obstacles:
                if not self._near(shape, pose, body, 0.0):
                    continue
                contact = closest_points(shape, pose, body.shape, body.transform)
                if contact.distance < -self.config.penetration_tolerance:
                    pose[:3, 3] += -contact.distance * contact.normal
                    total += -contact.distance
                    moved = True
            if not moved:
                break
        return total

    @staticmethod
    def _near(shape: Shape, pose: np.ndarray, body: Body, margin: float) -> bool:
        lo_a, hi_a = world_aabb(shape, pose)
        lo_b, hi_b = world_aabb(body.shape, body.transform)
        return bool(np.all(lo_a <= hi_b + margin) and np.all(lo_b <= hi_a + margin))

    def _support_gap(self, shape: Shape, pose: np.ndarray, obstacles: List[Body]) -> Tuple[float, List[Body]]:
        lo_a, hi_a = world_aabb(shape, pose)
        shrink = 1e-3
        gap = math.inf
        below = []
        for body in obstacles:
            lo_b, hi_b = world_aabb(body.shape, body.transform)
            if np.any(lo_a[:2] + shrink > hi_b[:2]) or np.any(lo_b[:2] > hi_a[:2] - shrink):
                continue
            if hi_b[2] > pose[2, 3]:
                continue
            distance = closest_points(shape, pose, body.shape, body.transform).distance
            below.append((distance, body))
            gap = min(gap, distance)
        supporters = [b for d, b in below if d <= 2.0 * self.config.support_tolerance]
        return gap, supporters

    def _support_points(self, shape: Shape, pose: np.ndarray, samples: np.ndarray, supporters: List[Body]) -> np.ndarray:
        world_samples = samples @ pose[:3, :3].T + pose[:3, 3]
        near = np.zeros(len(world_samples), dtype=bool)
        for body in supporters:
            near |= point_distance(body.shape, body.transform, world_samples) <= 2.5 * self.config.support_tolerance
        return world_samples[near, :2]

    def _stable(self, com: np.ndarray, support: np.ndarray) -> bool:
        tol = self.config.com_tolerance
        c = com[:2]
        if len(support) == 0:
            return False
        if len(support) < 3:
            return _distance_to_segment(c, support[0], support[-1]) <= tol
        try:
            hull = ConvexHull(support)
        except QhullError:
            # collinear contacts: use the extreme pair
            direction = support[-1] - support[0]
            proj = support @ direction
            return _distance_to_segment(c, support[int(proj.argmin())], support[int(proj.argmax())]) <= tol
        return bool(np.all(hull.equations[:, :2] @ c + hull.equations[:, 2] <= tol))

    def _topple(self, shape: Shape, pose: np.ndarray, support: np.ndarray) -> np.ndarray:
        """Rotate the object about its center onto the resting pose it falls into"""
        rot = pose[:3, :3]
        down = np.array([0.0, 0.0, -1.0])
        lean = np.zeros(3)
        if len(support):
            lean[:2] = pose[:2, 3] - support.mean(axis=0)
            if np.linalg.norm(lean) > 1e-9:
                lean /= np.linalg.norm(lean)
        if shape.kind == ShapeKind.CAPSULE:
            axis = rot[:, 2]
            flat = axis - axis[2] * np.array([0.0, 0.0, 1.0])
            if np.linalg.norm(flat) < 1e-6:
                flat = lean if np.linalg.norm(lean) > 0 else np.array([1.0, 0.0, 0.0])
            target = flat / np.linalg.norm(flat)
            correction = _rotation_between(axis if axis @ target >= 0 else -axis, target)
        elif shape.kind == ShapeKind.BOX:
            normals = np.hstack([rot, -rot]).T
            order = np.argsort(-(normals @ (down + 0.5 * lean)), kind="stable")
            face = int(order[0])
            if normals[face] @ down > 0.999:
                face = int(order[1])
            correction = _rotation_between(normals[face], down)
        else:
            return pose
        new = pose.copy()
        new[:3, :3] = correction @ rot
        return new


def _rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vector a onto unit vector b"""
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.clip(a @ b, -1.0, 1.0))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        return Rotation.from_rotvec(math.pi * perp / np.linalg.norm(perp)).as_matrix()
    return Rotation.from_rotvec(axis / s * math.atan2(s, c)).as_matrix()


def _distance_to_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom < 1e-18 else min(max(float((p - a) @ ab) / denom, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def settle(world: WorldState, object_id: str, max_iterations: int = 20, config: Optional[SettleConfig] = None) -> Tuple[Pose, bool]:
    """Stable pose of an object and whether physics had to correct it significantly"""
    return Settler(config).settle(world, object_id, max_iterations)

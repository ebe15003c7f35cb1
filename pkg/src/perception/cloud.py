"""Simulated depth camera: point clouds of scene objects"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..models.domain import Pose
from ..utils.logger import logger
from ..worldmodel.geometry import random_surface_points, segments_hit_box
from ..worldmodel.world import Body, WorldState


@dataclass
class CameraModel:
    """Viewing volume of the camera. The optical axis is the camera x axis."""
    horizontal_fov: float = 0.8
    vertical_fov: float = 0.6
    min_range: float = 0.1
    max_range: float = 4.0
    samples: int = 800
    # points closer than this to an occluder surface still count as visible
    occlusion_margin: float = 0.005

    def __post_init__(self):
        if not 0 < self.min_range < self.max_range:
            raise ValueError(f"Camera range must satisfy 0 < min < max, got {self.min_range}, {self.max_range}")
        if self.samples <= 0:
            raise ValueError(f"Sample count must be positive, got {self.samples}")


@dataclass
class PointCloud:
    """Points in the camera frame.

    ``source`` is the ground-truth object the points were sampled from;
    ``partial`` marks clouds seen from a single viewpoint.
    """
    points: np.ndarray
    camera_pose: Pose = field(default_factory=Pose.identity)
    source: Optional[str] = None
    partial: bool = False

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("Point cloud coordinates must be finite")
        self.points = points

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    @property
    def viewpoint(self) -> np.ndarray:
        return self.camera_pose.translation

    def to_world(self) -> np.ndarray:
        m = self.camera_pose.matrix()
        return self.points @ m[:3, :3].T + m[:3, 3]

    @classmethod
    def from_world(cls, points: np.ndarray, camera_pose: Pose, source: Optional[str] = None, partial: bool = False) -> "PointCloud":
        m = camera_pose.matrix()
        local = (np.asarray(points, dtype=float).reshape(-1, 3) - m[:3, 3]) @ m[:3, :3]
        return cls(local, camera_pose, source, partial)

    def to_xyz(self, path: Union[str, Path]) -> None:
        """Write one ``x y z`` line per point"""
        np.savetxt(path, self.points, fmt="%.6f")

    @classmethod
    def from_xyz(cls, path: Union[str, Path], camera_pose: Optional[Pose] = None) -> "PointCloud":
        return cls(np.loadtxt(path, ndmin=2), camera_pose or Pose.identity())


def camera_looking_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera pose at ``eye`` whose x axis points at ``target``"""
    eye = np.asarray(eye, dtype=float)
    forward = np.asarray(target, dtype=float) - eye
    forward /= np.linalg.norm(forward)
    left = np.cross(np.asarray(up, dtype=float), forward)
    if np.linalg.norm(left) < 1e-9:
        left = np.cross(np.array([1.0, 0.0, 0.0]), forward)
    left /= np.linalg.norm(left)
    return Pose.from_rotation_matrix(eye, np.column_stack([forward, left, np.cross(forward, left)]))


def _occluders(world: WorldState, object_id: str) -> List[Body]:
    return list(world.environment_bodies()) + world.object_bodies(exclude=[object_id])


def render_cloud(
    world: WorldState,
    camera_pose: Pose,
    object_id: str,
    noise: float = 0.0,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    camera: Optional[CameraModel] = None
) -> PointCloud:
    """Sample the camera-facing, unoccluded surface of an object.

    Args:
        world: Scene to look at
        camera_pose: World pose of the camera
        object_id: Object to sample
        noise: Standard deviation of the isotropic Gaussian point noise (m)
        dropout: Fraction of points dropped at random
        rng: Random source; the draw count does not depend on ``noise`` or ``dropout``
        camera: Viewing volume

    Returns:
        Cloud in the camera frame; empty when the object is out of view or occluded
    """
    if noise < 0 or not 0.0 <= dropout <= 1.0:
        raise ValueError(f"Invalid noise {noise} or dropout {dropout}")
    camera = camera or CameraModel()
    rng = rng or np.random.default_rng(0)
    obj = world.object(object_id)
    local, normals = random_surface_points(obj.shape, camera.samples, rng)
    m = obj.pose.matrix()
    points = local @ m[:3, :3].T + m[:3, 3]
    normals = normals @ m[:3, :3].T
    jitter = rng.normal(size=points.shape) * noise
    keep_draw = rng.random(len(points)) >= dropout

    eye = camera_pose.translation
    facing = np.einsum("ij,ij->i", normals, eye - points) > 0.0

    cam = camera_pose.matrix()
    in_cam = (points - eye) @ cam[:3, :3]
    depth = in_cam[:, 0]
    distance = np.linalg.norm(in_cam, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        in_view = (
            (depth > camera.min_range)
            & (distance <= camera.max_range)
            & (np.abs(np.arctan2(in_cam[:, 1], depth)) <= camera.horizontal_fov)
            & (np.abs(np.arctan2(in_cam[:, 2], depth)) <= camera.vertical_fov)
        )
    visible = facing & in_view
    if np.any(visible):
        idx = np.nonzero(visible)[0]
        rays = points[idx] - eye
        lengths = np.linalg.norm(rays, axis=1, keepdims=True)
        ends = eye + rays * (1.0 - camera.occlusion_margin / lengths)
        starts = np.repeat(eye[None], len(idx), axis=0)
        blocked = np.zeros(len(idx), dtype=bool)
        for body in _occluders(world, object_id):
            blocked |= segments_hit_box(starts, ends, body.shape, body.transform)
        visible[idx[blocked]] = False

    selected = visible & keep_draw
    cloud = PointCloud.from_world(points[selected] + jitter[selected], camera_pose, object_id, partial=True)
    logger.debug(f"Rendered {len(cloud)} points of {object_id} ({int(visible.sum())} visible before dropout)")
    return cloud

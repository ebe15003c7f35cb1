"""6D pose estimation: PCA seeding, multi-candidate ICP and physics correction"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import itertools
import math

import numpy as np
from scipy.spatial import cKDTree

from ..models.designator import Designator, an_object
from ..models.domain import Pose
from ..utils.logger import logger
from ..worldmodel.geometry import Shape, ShapeKind, structured_surface_points
from ..worldmodel.settle import SettleConfig, Settler
from ..worldmodel.world import SceneObject, WorldState
from .cloud import CameraModel, PointCloud
from .registration import CANDIDATE_MODES, AxisCandidate, axis_candidates, icp, pca_axes

ESTIMATE_ID = "estimated-object"


@dataclass
class PerceptionConfig:
    """Camera noise, registration and detection settings"""
    noise: float = 0.002
    dropout: float = 0.1
    model_points: int = 500
    candidate_mode: str = "all-24"
    icp_max_iterations: int = 60
    icp_tolerance: float = 1e-10
    min_points: int = 20
    confidence_sigma: float = 0.005
    workers: int = 1
    miss_probability: Dict[str, float] = field(default_factory=dict)
    default_miss_probability: float = 0.0
    camera: CameraModel = field(default_factory=CameraModel)

    def __post_init__(self):
        """Validate ranges"""
        if self.candidate_mode not in CANDIDATE_MODES:
            raise ValueError(f"Unknown candidate mode {self.candidate_mode}")
        if self.noise < 0 or not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"Invalid noise {self.noise} or dropout {self.dropout}")
        for name, p in itertools.chain(self.miss_probability.items(), [("default", self.default_miss_probability)]):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"Miss probability for {name} must be in [0, 1], got {p}")
        if self.min_points < 4:
            raise ValueError(f"At least 4 points are needed for pose estimation, got {self.min_points}")

    def miss_for(self, object_type: str) -> float:
        return self.miss_probability.get(object_type, self.default_miss_probability)


@dataclass
class DetectionResult:
    """Query designator augmented with what perception found"""
    designator: Designator
    object_id: str
    object_type: str
    pose: Pose
    score: float
    color: str
    confidence: float
    corrected: bool
    candidate: int
    candidate_scores: List[float] = field(default_factory=list)
    point_count: int = 0

    def to_record(self) -> Dict[str, Any]:
        return {
            "type": "detection",
            "object_id": self.object_id,
            "object_type": self.object_type,
            "pose": self.pose.to_dict(),
            "score": self.score,
            "color": self.color,
            "confidence": self.confidence,
            "corrected_by_physics": self.corrected,
            "candidate": self.candidate,
            "points": self.point_count,
        }


# ---------------------------------------------------------------------------
# Symmetry-aware orientation error
# ---------------------------------------------------------------------------

def symmetry_rotations(shape: Shape, tolerance: float = 1e-9) -> List[np.ndarray]:
    """Proper rotations (in the shape frame) mapping a box onto itself"""
    half = np.array(shape.half_extents)
    group = []
    for candidate in axis_candidates("all-24"):
        m = np.round(candidate.matrix())
        if np.allclose(np.abs(m) @ half, half, atol=tolerance):
            group.append(m)
    return group


def orientation_error(shape: Shape, estimate: np.ndarray, truth: np.ndarray) -> float:
    """Rotation angle between two orientations, modulo the shape's symmetry.

    Spheres are fully symmetric, capsules are symmetric about and across
    their axis, boxes under the axis permutations preserving their extents.
    """
    estimate = np.asarray(estimate)[:3, :3]
    truth = np.asarray(truth)[:3, :3]
    if shape.kind == ShapeKind.SPHERE:
        return 0.0
    if shape.kind == ShapeKind.CAPSULE:
        cos = abs(float(estimate[:, 2] @ truth[:, 2]))
        return math.acos(min(1.0, cos))
    best = math.inf
    for sym in symmetry_rotations(shape):
        delta = (truth @ sym).T @ estimate
        cos = (np.trace(delta) - 1.0) / 2.0
        best = min(best, math.acos(float(np.clip(cos, -1.0, 1.0))))
    return best


# ---------------------------------------------------------------------------
# Estimator
# ---------------------------------------------------------------------------

@dataclass
class Registration:
    transform: np.ndarray
    score: float
    candidate: int
    scores: List[float]


class PoseEstimator:
    """Estimates object poses from segmented point clouds.

    Args:
        config: Perception settings
        settle_config: Thresholds of the physics plausibility check
    """

    def __init__(self, config: Optional[PerceptionConfig] = None, settle_config: Optional[SettleConfig] = None):
        self.config = config or PerceptionConfig()
        self.settler = Settler(settle_config)
        self.candidates: List[AxisCandidate] = axis_candidates(self.config.candidate_mode)
        self._models: Dict[Shape, Tuple[np.ndarray, cKDTree, np.ndarray]] = {}
        logger.info(f"PoseEstimator initialized ({len(self.candidates)} axis candidates)")

    def model(self, shape: Shape) -> Tuple[np.ndarray, cKDTree, np.ndarray]:
        """Model points, their KD-tree and principal axes for a shape"""
        if shape not in self._models:
            points = structured_surface_points(shape, self.config.model_points)[0]
            _, axes, _ = pca_axes(points)
            self._models[shape] = (points, cKDTree(points), axes)
        return self._models[shape]

    def _initial_transforms(self, shape: Shape, cloud: PointCloud, points: np.ndarray) -> List[np.ndarray]:
        model, _, model_axes = self.model(shape)
        centroid, axes, _ = pca_axes(points)
        view = None
        if cloud.partial:
            view = centroid - cloud.viewpoint
            view /= max(np.linalg.norm(view), 1e-9)
        initials = []
        for candidate in self.candidates:
            rotation = axes @ candidate.matrix() @ model_axes.T
            t = np.eye(4)
            t[:3, :3] = rotation
            t[:3, 3] = centroid
            if view is not None:
                # a single view sees the near side; start with the model behind it
                depth = float(np.max(model @ rotation.T @ -view))
                t[:3, 3] = centroid + 0.5 * depth * view
            initials.append(t)
        return initials

    def register(self, shape: Shape, cloud: PointCloud) -> Registration:
        """Best ICP alignment over all axis-labeling candidates.

        Ties go to the lowest candidate index.

        Raises:
            PCADegenerate: when the cloud has no principal axes
        """
        cfg = self.config
        points = cloud.to_world()
        model, tree, _ = self.model(shape)
        initials = self._initial_transforms(shape, cloud, points)

        def run(initial: np.ndarray):
            return icp(model, points, initial, cfg.icp_max_iterations, cfg.icp_tolerance, tree)

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(run, initials))
        else:
            results = [run(t) for t in initials]
        scores = [r.score for r in results]
        best = int(np.argmin(scores))
        return Registration(results[best].transform, scores[best], best, scores)

    def estimate_pose(
        self,
        object_type: str,
        cloud: PointCloud,
        world: WorldState,
        object_id: Optional[str] = None
    ) -> DetectionResult:
        """Pose of an object of the given type from its cloud, corrected by physics.

        Raises:
            PCADegenerate: degenerate cloud
            SettleFailure: no stable pose near the estimate
        """
        kind = world.environment.object_types[object_type]
        registration = self.register(kind.shape, cloud)
        pose = Pose.from_matrix(registration.transform)

        object_id = object_id or cloud.source or ESTIMATE_ID
        existing = world.objects.get(object_id)
        corrected = False
        if existing is None or existing.attachment is None:
            placed = SceneObject(object_id, object_type, kind.shape, pose, kind.mass, kind.color)
            settled, corrected = self.settler.settle(world.with_object(placed), object_id)
            if corrected:
                logger.info(
                    f"Estimated pose of {object_id} corrected by physics: "
                    f"moved {settled.distance_to(pose):.3f} m, rotated {settled.angle_to(pose):.3f} rad"
                )
            pose = settled
        color = existing.color if existing is not None else kind.color

        sigma = max(self.config.confidence_sigma, 1e-6)
        confidence = float(math.exp(-registration.score / sigma ** 2))
        designator = an_object(type=object_type, name=object_id, pose=pose, color=color)
        return DetectionResult(
            designator=designator,
            object_id=object_id,
            object_type=object_type,
            pose=pose,
            score=registration.score,
            color=color,
            confidence=confidence,
            corrected=corrected,
            candidate=registration.candidate,
            candidate_scores=registration.scores,
            point_count=len(cloud),
        )

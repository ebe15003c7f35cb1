"""Taskable perception: answer object designator queries against the scene"""

from typing import Callable, List, Optional

import numpy as np

from ..models.designator import Designator
from ..models.domain import FailureCategory, PCADegenerate, PlanFailure, Pose
from ..utils.logger import logger
from ..worldmodel.world import SceneObject, WorldState
from .cloud import render_cloud
from .estimator import DetectionResult, PerceptionConfig, PoseEstimator


class Detector:
    """Finds objects matching a designator and estimates their poses.

    Segmentation uses the ground-truth association of the simulated camera;
    misses are injected per object type.

    Args:
        config: Perception settings
        estimator: Pose estimator (built from ``config`` when omitted)
        on_detection: Callback receiving every successful detection
    """

    def __init__(
        self,
        config: Optional[PerceptionConfig] = None,
        estimator: Optional[PoseEstimator] = None,
        on_detection: Optional[Callable[[DetectionResult], None]] = None
    ):
        self.config = config or PerceptionConfig()
        self.estimator = estimator or PoseEstimator(self.config)
        self.on_detection = on_detection
        logger.info(f"Detector initialized (noise={self.config.noise}, dropout={self.config.dropout})")

    @staticmethod
    def matches(query: Designator, obj: SceneObject) -> bool:
        """Whether an object satisfies the type, color and name properties of a query"""
        if "type" in query and query["type"] != obj.object_type:
            return False
        if "color" in query and query["color"] != obj.color:
            return False
        if "name" in query and query["name"] != obj.id:
            return False
        return True

    def candidates(self, query: Designator, world: WorldState) -> List[SceneObject]:
        return [world.objects[k] for k in sorted(world.objects) if self.matches(query, world.objects[k])]

    def detect(
        self,
        query: Designator,
        world: WorldState,
        camera_pose: Pose,
        rng: Optional[np.random.Generator] = None
    ) -> DetectionResult:
        """Resolve an object designator to a detected object with a pose.

        Raises:
            PlanFailure: perception failure when nothing matching is visible or a miss is injected
        """
        if "type" not in query and "color" not in query and "name" not in query:
            raise ValueError(f"Perception query needs a type, color or name: {query.describe()}")
        cfg = self.config
        rng = rng or np.random.default_rng(0)
        label = query.describe()
        for obj in self.candidates(query, world):
            cloud = render_cloud(world, camera_pose, obj.id, cfg.noise, cfg.dropout, rng, cfg.camera)
            if len(cloud) < cfg.min_points:
                logger.debug(f"{obj.id} matches {label} but only {len(cloud)} points are visible")
                continue
            if rng.random() < cfg.miss_for(obj.object_type):
                logger.info(f"Perception missed {obj.id} for query {label}")
                raise PlanFailure(FailureCategory.PERCEPTION, f"missed {obj.object_type}", details={"object": obj.id})
            try:
                result = self.estimator.estimate_pose(obj.object_type, cloud, world, obj.id)
            except PCADegenerate as exc:
                raise PlanFailure(FailureCategory.PERCEPTION, f"degenerate cloud of {obj.id}: {exc}") from exc
            result.designator = query.extend({
                "name": result.object_id,
                "type": result.object_type,
                "pose": result.pose,
                "color": result.color,
            })
            logger.info(
                f"Detected {obj.id} for {label}: error "
                f"{result.pose.distance_to(obj.pose):.4f} m, score {result.score:.2e}"
            )
            if self.on_detection is not None:
                self.on_detection(result)
            return result
        raise PlanFailure(FailureCategory.PERCEPTION, f"no visible object matches {label}")

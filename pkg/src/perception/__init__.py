"""Simulated perception: point clouds, registration and object detection"""

from .cloud import CameraModel, PointCloud, camera_looking_at, render_cloud
from .registration import AxisCandidate, IcpResult, axis_candidates, icp, kabsch, pca_axes
from .estimator import DetectionResult, PerceptionConfig, PoseEstimator, orientation_error
from .detector import Detector

__all__ = [
    "CameraModel",
    "PointCloud",
    "camera_looking_at",
    "render_cloud",
    "AxisCandidate",
    "IcpResult",
    "axis_candidates",
    "icp",
    "kabsch",
    "pca_axes",
    "DetectionResult",
    "PerceptionConfig",
    "PoseEstimator",
    "orientation_error",
    "Detector"
]

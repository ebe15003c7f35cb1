"""Failure injection: the noise model a marathon subjects the ground truth to"""

from dataclasses import replace
from typing import Dict, Optional, Tuple

import numpy as np

from ..perception.estimator import PerceptionConfig
from ..utils.logger import logger
from .config import FailureInjectionConfig


class FailureInjector:
    """Disturbances of the plan executive driven by a FailureInjectionConfig.

    All draws come from the generator the executive passes in, so a run is
    reproducible from its seed. A probability of zero never draws.

    Args:
        config: Noise model
    """

    def __init__(self, config: Optional[FailureInjectionConfig] = None):
        self.config = config or FailureInjectionConfig()
        self.counts: Dict[str, int] = {
            "grasp-slip": 0, "handle-slip": 0, "carry-drop": 0, "gripper-jam": 0,
        }
        logger.info(
            f"FailureInjector initialized (localization sigma={self.config.localization_sigma}, "
            f"slip base={self.config.grasp_slip_base})"
        )

    @staticmethod
    def _happens(p: float, rng: np.random.Generator) -> bool:
        return p > 0.0 and bool(rng.random() < p)

    def localization_error(self, rng: np.random.Generator) -> Tuple[float, float, float]:
        cfg = self.config
        if cfg.localization_sigma == 0.0 and cfg.localization_sigma_theta == 0.0:
            return (0.0, 0.0, 0.0)
        dx, dy = rng.normal(0.0, cfg.localization_sigma, 2) if cfg.localization_sigma > 0 else (0.0, 0.0)
        dtheta = rng.normal(0.0, cfg.localization_sigma_theta) if cfg.localization_sigma_theta > 0 else 0.0
        return (float(dx), float(dy), float(dtheta))

    def grasp_slip_probability(self, object_type: str, alignment_error: float) -> float:
        """Slip probability growing with the grasp misalignment and the object's thinness"""
        cfg = self.config
        thinness = cfg.thinness.get(object_type, 1.0)
        p = cfg.grasp_slip_base * (1.0 + max(alignment_error, 0.0) / cfg.alignment_scale) * thinness
        return float(np.clip(p, 0.0, 1.0))

    def grasp_slips(self, object_type: str, alignment_error: float, rng: np.random.Generator) -> bool:
        slipped = self._happens(self.grasp_slip_probability(object_type, alignment_error), rng)
        if slipped:
            self.counts["grasp-slip"] += 1
            logger.info(f"Injected grasp slip of a {object_type} (alignment error {alignment_error:.3f} m)")
        return slipped

    def handle_slips(self, container: str, rng: np.random.Generator) -> bool:
        p = self.config.handle_slip.get(container, self.config.default_handle_slip)
        slipped = self._happens(p, rng)
        if slipped:
            self.counts["handle-slip"] += 1
            logger.info(f"Injected handle slip at {container}")
        return slipped

    def carry_drop(self, object_type: str, phase: str, rng: np.random.Generator) -> Optional[float]:
        if phase not in self.config.unrecoverable_phases:
            return None
        if not self._happens(self.config.carry_drop.get(object_type, 0.0), rng):
            return None
        self.counts["carry-drop"] += 1
        fraction = float(rng.uniform(0.2, 0.8))
        logger.warning(f"Injected drop of a carried {object_type} at {fraction:.0%} of the drive")
        return fraction

    def gripper_jams(self, region: str, phase: str, rng: np.random.Generator) -> bool:
        if phase not in self.config.unrecoverable_phases:
            return False
        jammed = self._happens(self.config.gripper_jam.get(region, 0.0), rng)
        if jammed:
            self.counts["gripper-jam"] += 1
            logger.warning(f"Injected gripper jam in {region}")
        return jammed

    def perception_config(self, base: Optional[PerceptionConfig] = None) -> PerceptionConfig:
        """Perception settings with the configured per-type miss probabilities"""
        base = base or PerceptionConfig()
        return replace(
            base,
            miss_probability={**base.miss_probability, **self.config.perception_miss},
            default_miss_probability=max(base.default_miss_probability, self.config.default_perception_miss),
        )

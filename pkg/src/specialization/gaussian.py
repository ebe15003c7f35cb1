"""Specialized parameter models: multivariate Gaussians over successful base poses"""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union
import math
import re

import numpy as np
import yaml
from scipy.stats import circmean, multivariate_normal

from ..models.domain import ConfigError, EmptySupport, Episode, InsufficientData, wrap_angle
from ..reasoner.distributions import PoseDistribution, PoseGrid
from ..utils.logger import logger

PARAMETER_NAMES = ("x", "y", "theta")
DIM = len(PARAMETER_NAMES)


@dataclass
class FitConfig:
    """Regularization and sample requirements of model fitting"""
    ridge: float = 1e-6
    min_samples: Optional[int] = None

    def __post_init__(self):
        if self.ridge <= 0:
            raise ValueError(f"Ridge must be positive, got {self.ridge}")
        if self.min_samples is not None and self.min_samples < DIM + 1:
            raise ValueError(f"min_samples must be at least {DIM + 1}, got {self.min_samples}")

    @property
    def required(self) -> int:
        return self.min_samples if self.min_samples is not None else DIM + 1


def _wrap(angles: np.ndarray) -> np.ndarray:
    return (angles + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class GaussianModel:
    """Learned density over (x, y, theta) base poses of one task key.

    The covariance is over (x, y, theta offset); theta offsets are wrapped
    around the mean heading, so the model is valid for headings that
    cluster within well under half a turn.
    """
    task_key: str
    mean: np.ndarray
    covariance: np.ndarray
    count: int
    arm_order: List[str] = field(default_factory=list)
    grasp_order: List[str] = field(default_factory=list)

    def __post_init__(self):
        """Validate shapes, symmetry and positive definiteness"""
        self.mean = np.asarray(self.mean, dtype=float).reshape(DIM)
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.covariance.shape != (DIM, DIM):
            raise ValueError(f"Covariance must be {DIM}x{DIM}, got {self.covariance.shape}")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-12):
            raise ValueError(f"Covariance of {self.task_key} is not symmetric")
        try:
            np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise ValueError(f"Covariance of {self.task_key} is not positive definite") from None
        if self.count < DIM + 1:
            raise ValueError(f"Model needs at least {DIM + 1} samples, got {self.count}")
        self.mean[2] = wrap_angle(float(self.mean[2]))

    @property
    def preferred_arm(self) -> Optional[str]:
        return self.arm_order[0] if self.arm_order else None

    def offsets(self, poses: np.ndarray) -> np.ndarray:
        """Differences of poses (..., 3) to the mean, theta wrapped"""
        poses = np.asarray(poses, dtype=float)
        delta = poses - self.mean
        delta[..., 2] = _wrap(delta[..., 2])
        return delta

    def logpdf(self, poses: np.ndarray) -> np.ndarray:
        return multivariate_normal(np.zeros(DIM), self.covariance).logpdf(self.offsets(poses))

    def pdf(self, poses: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(poses))

    def log_density(self, grid: PoseGrid) -> np.ndarray:
        """Log density at every cell center of a grid, shape ``grid.shape``"""
        X, Y = grid.mesh()
        thetas = grid.thetas()
        poses = np.stack(np.broadcast_arrays(
            X[..., None], Y[..., None], thetas[None, None, :]
        ), axis=-1)
        return np.asarray(self.logpdf(poses.reshape(-1, DIM))).reshape(grid.shape)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task_key": self.task_key,
            "parameters": list(PARAMETER_NAMES),
            "mean": [float(v) for v in self.mean],
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "count": int(self.count),
            "arm_order": list(self.arm_order),
            "grasp_order": list(self.grasp_order),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GaussianModel":
        return cls(
            task_key=data["task_key"],
            mean=np.asarray(data["mean"]),
            covariance=np.asarray(data["covariance"]),
            count=int(data["count"]),
            arm_order=list(data.get("arm_order", [])),
            grasp_order=list(data.get("grasp_order", [])),
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True, default_flow_style=None)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GaussianModel":
        """Read a model file

        Raises:
            ConfigError: missing fields or an invalid covariance
        """
        with open(path) as f:
            data = yaml.safe_load(f)
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Malformed model file {path}: {exc}") from exc


def _success_order(episodes: Sequence[Episode], attribute: str) -> List[str]:
    """Values of an episode attribute ordered by smoothed success rate"""
    tried: Dict[str, int] = defaultdict(int)
    won: Dict[str, int] = defaultdict(int)
    for episode in episodes:
        value = getattr(episode, attribute)
        if value is None:
            continue
        tried[value] += 1
        won[value] += int(episode.succeeded)
    rate = {v: (won[v] + 1.0) / (tried[v] + 2.0) for v in tried}
    return sorted(rate, key=lambda v: (-rate[v], v))


def fit(episodes: Iterable[Episode], task_key: str, config: Optional[FitConfig] = None) -> GaussianModel:
    """Maximum-likelihood Gaussian over the base poses of successful episodes.

    Theta is fitted as the wrapped offset to the circular mean heading.

    Raises:
        InsufficientData: fewer successful episodes than required
    """
    config = config or FitConfig()
    relevant = [e for e in episodes if e.task_key == task_key]
    successes = [e for e in relevant if e.succeeded]
    if len(successes) < config.required:
        raise InsufficientData(
            f"{task_key}: {len(successes)} successful episodes, need {config.required}"
        )
    poses = np.array([e.base_pose for e in successes], dtype=float)
    heading = float(circmean(poses[:, 2], high=math.pi, low=-math.pi))
    samples = poses.copy()
    samples[:, 2] = _wrap(poses[:, 2] - heading)
    center = samples.mean(axis=0)
    diff = samples - center
    covariance = diff.T @ diff / len(samples) + config.ridge * np.eye(DIM)
    covariance = 0.5 * (covariance + covariance.T)
    model = GaussianModel(
        task_key=task_key,
        mean=np.array([center[0], center[1], heading + center[2]]),
        covariance=covariance,
        count=len(successes),
        arm_order=_success_order(relevant, "arm"),
        grasp_order=_success_order(relevant, "grasp"),
    )
    logger.info(
        f"Fitted {task_key} on {len(successes)}/{len(relevant)} successes: "
        f"mean={np.round(model.mean, 3).tolist()}, arm={model.preferred_arm}"
    )
    return model


def fit_all(
    episodes: Iterable[Episode],
    config: Optional[FitConfig] = None,
    task_keys: Optional[Iterable[str]] = None
) -> Tuple[Dict[str, GaussianModel], Dict[str, str]]:
    """Fit every task key; keys without enough data are reported, not raised.

    Returns:
        (models by task key, reason by insufficient task key)
    """
    episodes = list(episodes)
    keys = sorted(set(task_keys) if task_keys is not None else {e.task_key for e in episodes})
    models: Dict[str, GaussianModel] = {}
    insufficient: Dict[str, str] = {}
    for key in keys:
        try:
            models[key] = fit(episodes, key, config)
        except InsufficientData as exc:
            insufficient[key] = str(exc)
            logger.warning(f"No model for {key}: {exc}")
    return models, insufficient


class CombinedDistribution(PoseDistribution):
    """Product of a learned density and a heuristic prior on the prior's grid"""

    def __init__(self, model: GaussianModel, prior: PoseDistribution, weights: np.ndarray):
        super().__init__(prior.grid, weights, f"{model.task_key} x {prior.label}")
        self.model = model
        self.prior = prior


def _relative_density(model: GaussianModel, grid: PoseGrid, support: np.ndarray) -> np.ndarray:
    """Gaussian density over a support, scaled so the largest value is 1"""
    log_density = model.log_density(grid)
    peak = float(log_density[support].max())
    return np.where(support, np.exp(np.minimum(log_density - peak, 0.0)), 0.0)


def combine(model: GaussianModel, prior: PoseDistribution) -> CombinedDistribution:
    """Cellwise product of the learned density and the prior, renormalized.

    Raises:
        EmptySupport: the prior has no support
    """
    support = prior.support
    if not np.any(support):
        raise EmptySupport(f"Prior {prior.label} has no support to combine {model.task_key} with")
    weights = prior.weights * _relative_density(model, prior.grid, support)
    if not np.any(weights > 0):
        raise EmptySupport(f"Combination of {model.task_key} and {prior.label} is empty")
    return CombinedDistribution(model, prior, weights)


def specialize(model: GaussianModel, grid: PoseGrid, free: np.ndarray) -> PoseDistribution:
    """Discretized learned density masked by free base cells.

    Args:
        free: Boolean (nx, ny) array of cells the base fits in

    Raises:
        EmptySupport: no free cell
    """
    support = np.broadcast_to(np.asarray(free, dtype=bool)[..., None], grid.shape)
    if not np.any(support):
        raise EmptySupport(f"No free cell for {model.task_key}")
    return PoseDistribution(grid, _relative_density(model, grid, support), f"specialized {model.task_key}")


def sample(distribution: PoseDistribution, seed: int, n: int) -> List[Tuple[float, float, float]]:
    """Seeded draws of cell centers

    Raises:
        EmptySupport: empty distribution and n > 0
    """
    return distribution.sample(np.random.default_rng(seed), n)


def model_filename(task_key: str) -> str:
    return re.sub(r"[^A-Za-z0-9-]+", "_", task_key).strip("_") + ".yaml"


def save_models(models: Dict[str, GaussianModel], directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    paths = [models[key].save(directory / model_filename(key)) for key in sorted(models)]
    logger.info(f"Saved {len(paths)} models to {directory}")
    return paths


def load_models(directory: Union[str, Path]) -> Dict[str, GaussianModel]:
    """All model files of a directory keyed by task key (empty when it does not exist)"""
    directory = Path(directory)
    if not directory.is_dir():
        logger.warning(f"Model directory {directory} does not exist")
        return {}
    models = {}
    for path in sorted(directory.glob("*.yaml")):
        model = GaussianModel.load(path)
        models[model.task_key] = model
    logger.info(f"Loaded {len(models)} models from {directory}")
    return models

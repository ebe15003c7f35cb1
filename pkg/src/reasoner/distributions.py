"""Discretized densities over robot base poses (x, y, theta)"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union
import math

import numpy as np
import pandas as pd

from ..models.domain import EmptySupport, wrap_angle


@dataclass(frozen=True)
class PoseGrid:
    """Regular grid of cells; cell centers are the poses a distribution samples"""
    x_min: float
    y_min: float
    nx: int
    ny: int
    resolution: float = 0.05
    theta_bins: int = 16

    def __post_init__(self):
        if self.nx <= 0 or self.ny <= 0 or self.theta_bins <= 0:
            raise ValueError(f"Grid needs positive sizes, got {self.nx}x{self.ny}x{self.theta_bins}")
        if self.resolution <= 0:
            raise ValueError(f"Resolution must be positive, got {self.resolution}")

    @classmethod
    def covering(
        cls,
        x_range: Tuple[float, float],
        y_range: Tuple[float, float],
        resolution: float = 0.05,
        theta_bins: int = 16
    ) -> "PoseGrid":
        nx = max(1, int(math.ceil((x_range[1] - x_range[0]) / resolution - 1e-9)))
        ny = max(1, int(math.ceil((y_range[1] - y_range[0]) / resolution - 1e-9)))
        return cls(float(x_range[0]), float(y_range[0]), nx, ny, resolution, theta_bins)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.nx, self.ny, self.theta_bins)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.theta_bins

    @property
    def theta_resolution(self) -> float:
        return 2.0 * math.pi / self.theta_bins

    def xs(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.resolution

    def ys(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.resolution

    def thetas(self) -> np.ndarray:
        return -math.pi + (np.arange(self.theta_bins) + 0.5) * self.theta_resolution

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of cell centers, indexed [ix, iy]"""
        return np.meshgrid(self.xs(), self.ys(), indexing="ij")

    def center(self, flat_index: int) -> Tuple[float, float, float]:
        ix, iy, it = np.unravel_index(flat_index, self.shape)
        return (
            float(self.x_min + (ix + 0.5) * self.resolution),
            float(self.y_min + (iy + 0.5) * self.resolution),
            float(-math.pi + (it + 0.5) * self.theta_resolution),
        )

    def index(self, x: float, y: float, theta: float) -> Optional[Tuple[int, int, int]]:
        ix = int(math.floor((x - self.x_min) / self.resolution))
        iy = int(math.floor((y - self.y_min) / self.resolution))
        it = int(math.floor((wrap_angle(theta) + math.pi) / self.theta_resolution)) % self.theta_bins
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            return None
        return ix, iy, it


class PoseDistribution:
    """Normalized nonnegative weights over a PoseGrid.

    An all-zero weight array is allowed and means an empty support; sampling
    from it raises EmptySupport.
    """

    def __init__(self, grid: PoseGrid, weights: np.ndarray, label: str = ""):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != grid.shape:
            raise ValueError(f"Weights of shape {weights.shape} do not match grid {grid.shape}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("Weights must be finite and nonnegative")
        total = float(weights.sum())
        self.grid = grid
        self.weights = weights / total if total > 0 else weights.copy()
        self.label = label

    @classmethod
    def uniform(cls, grid: PoseGrid, mask: np.ndarray, label: str = "") -> "PoseDistribution":
        return cls(grid, np.asarray(mask, dtype=float), label)

    @property
    def empty(self) -> bool:
        return not np.any(self.weights > 0)

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0

    def probability(self, x: float, y: float, theta: float) -> float:
        idx = self.grid.index(x, y, theta)
        return 0.0 if idx is None else float(self.weights[idx])

    def argmax(self) -> Tuple[float, float, float]:
        if self.empty:
            raise EmptySupport(f"Distribution {self.label} has no support")
        return self.grid.center(int(np.argmax(self.weights)))

    def marginal_xy(self) -> np.ndarray:
        return self.weights.sum(axis=2)

    def sample(self, rng: np.random.Generator, n: int, replace: bool = True) -> List[Tuple[float, float, float]]:
        """Draw cell centers in proportion to their weights.

        Without replacement at most the support size is returned.

        Raises:
            EmptySupport: no cell has positive weight (and n > 0)
        """
        if n <= 0:
            return []
        if self.empty:
            raise EmptySupport(f"Distribution {self.label} has no support")
        flat = self.weights.reshape(-1)
        cells = np.flatnonzero(flat > 0)
        p = flat[cells] / flat[cells].sum()
        if not replace:
            n = min(n, len(cells))
        chosen = rng.choice(len(cells), size=n, replace=replace, p=p)
        return [self.grid.center(int(cells[k])) for k in chosen]

    def multiply(self, factor: np.ndarray, label: str = "") -> "PoseDistribution":
        return PoseDistribution(self.grid, self.weights * np.asarray(factor, dtype=float), label or self.label)

    def to_frame(self) -> pd.DataFrame:
        X, Y = self.grid.mesh()
        return pd.DataFrame({
            "x": X.reshape(-1),
            "y": Y.reshape(-1),
            "weight": self.marginal_xy().reshape(-1),
        })

    def to_csv(self, path: Union[str, Path]) -> None:
        """Heat-map export: one row per (x, y) cell with the theta-marginal weight"""
        self.to_frame().to_csv(path, index=False)

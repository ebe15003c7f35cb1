"""Rigid registration: principal axes, axis-labeling candidates and ICP"""

from dataclasses import dataclass
from typing import List, Optional, Tuple
import itertools

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from ..models.domain import PCADegenerate

CANDIDATE_MODES = ("all-24", "even-12")


def pca_axes(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Principal axes of a point set.

    Returns:
        (centroid, axes as the columns of a right-handed rotation ordered by
        descending eigenvalue, eigenvalues)

    Raises:
        PCADegenerate: fewer than four points or all points on a line
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 4:
        raise PCADegenerate(f"Need at least 4 points for principal axes, got {len(points)}")
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered / len(points)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    values = np.maximum(values[order], 0.0)
    vectors = vectors[:, order]
    if values[0] <= 1e-18 or values[1] <= 1e-12 * values[0]:
        raise PCADegenerate("Point cloud is collinear")
    axes = np.empty((3, 3))
    axes[:, 0] = vectors[:, 0] / np.linalg.norm(vectors[:, 0])
    second = vectors[:, 1] - axes[:, 0] * (axes[:, 0] @ vectors[:, 1])
    axes[:, 1] = second / np.linalg.norm(second)
    axes[:, 2] = np.cross(axes[:, 0], axes[:, 1])
    return centroid, axes, values


@dataclass(frozen=True)
class AxisCandidate:
    """Proper rotation assigning model axes to cloud axes"""
    index: int
    rotation: Tuple[float, float, float, float]  # quaternion x, y, z, w

    def __post_init__(self):
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-9:
            raise ValueError(f"Candidate {self.index} rotation is not a unit quaternion")

    def matrix(self) -> np.ndarray:
        return Rotation.from_quat(self.rotation).as_matrix()


def _permutation_parity(perm: Tuple[int, ...]) -> int:
    inversions = sum(1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j])
    return inversions % 2


def axis_candidates(mode: str = "all-24") -> List[AxisCandidate]:
    """Signed axis permutations with determinant +1, identity first.

    ``all-24`` is the full rotation group of the cube; ``even-12`` keeps
    the even (cyclic) permutations with every proper choice of signs.
    """
    if mode not in CANDIDATE_MODES:
        raise ValueError(f"Unknown candidate mode {mode}, expected one of {CANDIDATE_MODES}")
    matrices = []
    for perm in itertools.permutations(range(3)):
        if mode == "even-12" and _permutation_parity(perm):
            continue
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, col in enumerate(perm):
                m[row, col] = signs[row]
            if np.linalg.det(m) > 0:
                matrices.append(m)
    return [
        AxisCandidate(i, tuple(float(v) for v in Rotation.from_matrix(m).as_quat()))
        for i, m in enumerate(matrices)
    ]


def kabsch(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares rigid transform with ``R @ source + t ~ target``"""
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape or len(source) == 0:
        raise ValueError(f"Point sets must be nonempty and paired, got {source.shape} and {target.shape}")
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    h = (source - mu_s).T @ (target - mu_t)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    correction = np.diag([1.0, 1.0, d])
    rotation = vt.T @ correction @ u.T
    return rotation, mu_t - rotation @ mu_s


@dataclass
class IcpResult:
    transform: np.ndarray
    score: float
    iterations: int


def icp(
    model: np.ndarray,
    target: np.ndarray,
    initial: Optional[np.ndarray] = None,
    max_iterations: int = 60,
    tolerance: float = 1e-10,
    model_tree: Optional[cKDTree] = None
) -> IcpResult:
    """Align model points to a target cloud.

    Each target point is matched to its nearest model point, then the
    optimal rigid motion is recomputed. Stops when the mean squared error
    changes by less than ``tolerance``.

    Args:
        model: Model points in the object frame
        target: Observed points
        initial: 4x4 initial object-to-target transform
        max_iterations: Iteration budget
        tolerance: Convergence threshold on the MSE change
        model_tree: Prebuilt KD-tree over ``model``

    Returns:
        IcpResult with the best transform found and its MSE
    """
    model = np.asarray(model, dtype=float)
    target = np.asarray(target, dtype=float)
    if len(model) == 0 or len(target) == 0:
        raise ValueError("ICP needs nonempty model and target clouds")
    tree = model_tree if model_tree is not None else cKDTree(model)
    transform = np.eye(4) if initial is None else np.array(initial, dtype=float)

    def evaluate(t: np.ndarray) -> Tuple[float, np.ndarray]:
        # target points expressed in the model frame
        local = (target - t[:3, 3]) @ t[:3, :3]
        distances, idx = tree.query(local)
        return float(np.mean(distances ** 2)), idx

    score, idx = evaluate(transform)
    best = IcpResult(transform.copy(), score, 0)
    for iteration in range(1, max_iterations + 1):
        rotation, translation = kabsch(model[idx], target)
        candidate = np.eye(4)
        candidate[:3, :3] = rotation
        candidate[:3, 3] = translation
        new_score, idx = evaluate(candidate)
        if new_score < best.score:
            best = IcpResult(candidate, new_score, iteration)
        converged = abs(score - new_score) < tolerance
        transform, score = candidate, new_score
        if converged:
            break
    return best

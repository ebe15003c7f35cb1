"""Task functions evaluated every control tick.

Each task function maps the current observables to rows ``lower <= J q_dot <= upper``.
Soft rows are relaxed by a weighted slack; hard rows must hold exactly.
"""

from dataclasses import dataclass
import math
from typing import List, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from ..worldmodel.world import WorldState
from .problem import PAIR_WIDTH, ControlConfig, Frames, KinematicModel, ObservableLayout


@dataclass
class TickContext:
    """What a task function sees at one tick"""
    observables: np.ndarray
    frames: Frames
    layout: ObservableLayout
    model: KinematicModel
    config: ControlConfig

    def slice(self, name: str) -> np.ndarray:
        return self.observables[self.layout[name]]


@dataclass
class TaskRows:
    jacobian: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def empty(cls, n_vars: int) -> "TaskRows":
        return cls(np.zeros((0, n_vars)), np.zeros(0), np.zeros(0))


def skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def inverse_left_jacobian(phi: np.ndarray) -> np.ndarray:
    """Maps angular velocity to the time derivative of a rotation vector"""
    theta = float(np.linalg.norm(phi))
    hat = skew(phi)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * hat + hat @ hat / 12.0
    coeff = 1.0 / theta ** 2 - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    return np.eye(3) - 0.5 * hat + coeff * hat @ hat


def _limit_norm(v: np.ndarray, limit: float) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    return v if norm <= limit else v * (limit / norm)


class TaskFunction:
    """Base class of goal and constraint rows.

    Args:
        name: Unique name within a control problem
        weight: Slack weight for soft rows (ignored for hard rows)
        hard: Whether the rows must hold exactly
        converges: Whether the task takes part in the convergence check
    """

    def __init__(self, name: str, weight: float = 1.0, hard: bool = False, converges: bool = False):
        self.name = name
        self.weight = weight
        self.hard = hard
        self.converges = converges

    def declare(self, layout: ObservableLayout) -> None:
        """Reserve goal observables; default has none"""

    def initial_values(self) -> Optional[np.ndarray]:
        return None

    def value(self, ctx: TickContext) -> np.ndarray:
        """Current task function value f(o)"""
        raise NotImplementedError

    def rows(self, ctx: TickContext) -> TaskRows:
        raise NotImplementedError

    def error(self, ctx: TickContext) -> float:
        return 0.0

    def converged(self, ctx: TickContext) -> bool:
        return True

    def __repr__(self) -> str:
        kind = "hard" if self.hard else f"soft w={self.weight:g}"
        return f"{type(self).__name__}({self.name}, {kind})"


class CartesianPoseGoal(TaskFunction):
    """Drive a frame to a world pose.

    The goal pose is stored in the observables as a flattened 4x4 matrix.
    A positive ``rotation_band`` accepts any orientation within that
    per-axis rotation-vector error.
    """

    def __init__(
        self,
        frame: str,
        target: np.ndarray,
        weight: float,
        rotation_band: float = 0.0,
        position_only: bool = False
    ):
        super().__init__(f"cartesian:{frame}", weight, hard=False, converges=True)
        self.frame = frame
        self.target = np.asarray(target, dtype=float)
        self.rotation_band = rotation_band
        self.position_only = position_only

    def declare(self, layout: ObservableLayout) -> None:
        layout.add(f"goal:{self.name}", 16)

    def initial_values(self) -> np.ndarray:
        return self.target.reshape(-1)

    def _errors(self, ctx: TickContext):
        goal = ctx.slice(f"goal:{self.name}").reshape(4, 4)
        current = ctx.frames.transform(self.frame)
        e_t = current[:3, 3] - goal[:3, 3]
        e_r = Rotation.from_matrix(current[:3, :3] @ goal[:3, :3].T).as_rotvec()
        return current, e_t, e_r

    def rows(self, ctx: TickContext) -> TaskRows:
        cfg = ctx.config
        current, e_t, e_r = self._errors(ctx)
        jac = ctx.frames.jacobian(self.frame, current[:3, 3])
        v = _limit_norm(-cfg.translation_gain * e_t, cfg.max_linear_velocity)
        if self.position_only:
            return TaskRows(jac[:3], v, v.copy())
        j_rot = inverse_left_jacobian(e_r) @ jac[3:]
        if self.rotation_band > 0.0:
            lo = -cfg.rotation_gain * (e_r + self.rotation_band)
            hi = -cfg.rotation_gain * (e_r - self.rotation_band)
            lo = np.clip(lo, -cfg.max_angular_velocity, cfg.max_angular_velocity)
            hi = np.clip(hi, -cfg.max_angular_velocity, cfg.max_angular_velocity)
        else:
            lo = _limit_norm(-cfg.rotation_gain * e_r, cfg.max_angular_velocity)
            hi = lo.copy()
        return TaskRows(np.vstack([jac[:3], j_rot]), np.concatenate([v, lo]), np.concatenate([v, hi]))

    def value(self, ctx: TickContext) -> np.ndarray:
        _, e_t, e_r = self._errors(ctx)
        return e_t if self.position_only else np.concatenate([e_t, e_r])

    def error(self, ctx: TickContext) -> float:
        _, e_t, e_r = self._errors(ctx)
        if self.position_only:
            return float(np.linalg.norm(e_t))
        excess = np.maximum(np.abs(e_r) - self.rotation_band, 0.0)
        return float(np.linalg.norm(e_t) + np.linalg.norm(excess))

    def converged(self, ctx: TickContext) -> bool:
        cfg = ctx.config
        _, e_t, e_r = self._errors(ctx)
        if np.linalg.norm(e_t) > cfg.translation_tolerance:
            return False
        if self.position_only:
            return True
        return bool(np.all(np.abs(e_r) <= self.rotation_band + cfg.rotation_tolerance))


class JointPositionGoal(TaskFunction):
    """Drive named DOFs to target positions"""

    def __init__(self, targets: dict, weight: float, name: str = "joints", tolerance: Optional[float] = None):
        super().__init__(f"joint-position:{name}", weight, hard=False, converges=True)
        self.tolerance = tolerance
        self.dofs = list(targets)
        self.targets = np.array([targets[d] for d in self.dofs], dtype=float)

    def declare(self, layout: ObservableLayout) -> None:
        layout.add(f"goal:{self.name}", len(self.dofs))

    def initial_values(self) -> np.ndarray:
        return self.targets

    def _errors(self, ctx: TickContext) -> np.ndarray:
        q = ctx.slice("joints")
        idx = [ctx.model.dof_index[d] for d in self.dofs]
        return q[idx] - ctx.slice(f"goal:{self.name}")

    def rows(self, ctx: TickContext) -> TaskRows:
        err = self._errors(ctx)
        jac = np.zeros((len(self.dofs), ctx.model.n_vars))
        for row, dof in enumerate(self.dofs):
            jac[row, ctx.model.var_index[dof]] = 1.0
        desired = -ctx.config.joint_gain * err
        return TaskRows(jac, desired, desired.copy())

    def value(self, ctx: TickContext) -> np.ndarray:
        return self._errors(ctx)

    def error(self, ctx: TickContext) -> float:
        return float(np.linalg.norm(self._errors(ctx)))

    def converged(self, ctx: TickContext) -> bool:
        tolerance = ctx.config.joint_tolerance if self.tolerance is None else self.tolerance
        return bool(np.all(np.abs(self._errors(ctx)) <= tolerance))


class KeepVertical(TaskFunction):
    """Keep a local axis of a frame aligned with world z (hard funnel)"""

    def __init__(self, frame: str, axis=(0.0, 0.0, 1.0), tolerance: float = 0.03):
        super().__init__(f"keep-vertical:{frame}", hard=True)
        self.frame = frame
        self.axis = np.asarray(axis, dtype=float)
        self.tolerance = tolerance

    def rows(self, ctx: TickContext) -> TaskRows:
        current = ctx.frames.transform(self.frame)
        world_axis = current[:3, :3] @ self.axis
        jac_ang = ctx.frames.jacobian(self.frame)[3:]
        # d(Ra)/dt = w x Ra = -[Ra]x w
        jac = (-skew(world_axis) @ jac_ang)[:2]
        f = world_axis[:2]
        gain = ctx.config.damper_gain / ctx.config.dt
        lo = gain * (-self.tolerance - f)
        hi = gain * (self.tolerance - f)
        # a tilted start still admits standing still
        lo = np.minimum(lo, 0.0)
        hi = np.maximum(hi, 0.0)
        return TaskRows(jac, lo, hi)

    def value(self, ctx: TickContext) -> np.ndarray:
        current = ctx.frames.transform(self.frame)
        return (current[:3, :3] @ self.axis)[:2]


class LookAt(TaskFunction):
    """Point the camera x axis at a point attached to a link (or fixed in the world)"""

    def __init__(self, camera: str, target, weight: float, link: Optional[str] = None, goal: bool = False):
        super().__init__(f"look-at:{link or 'world'}", weight, hard=False, converges=goal)
        self.camera = camera
        self.target = np.asarray(target, dtype=float)
        self.link = link
        self.tolerance = 0.05

    def declare(self, layout: ObservableLayout) -> None:
        layout.add(f"goal:{self.name}", 3)

    def initial_values(self) -> np.ndarray:
        return self.target

    def _geometry(self, ctx: TickContext):
        cam = ctx.frames.transform(self.camera)
        local = ctx.slice(f"goal:{self.name}")
        if self.link is not None:
            point = (ctx.frames.transform(self.link) @ np.append(local, 1.0))[:3]
        else:
            point = local
        d = cam[:3, :3].T @ (point - cam[:3, 3])
        return cam, point, d

    def rows(self, ctx: TickContext) -> TaskRows:
        cam, point, d = self._geometry(ctx)
        norm = max(float(np.linalg.norm(d)), 1e-6)
        # f = lateral components of the unit direction in the camera frame
        f = d[1:] / norm
        dfdd = np.eye(3)[1:] / norm - np.outer(d[1:], d) / norm ** 3
        jac_c = ctx.frames.jacobian(self.camera, cam[:3, 3])
        jac_p = ctx.frames.jacobian(self.link, point) if self.link is not None else np.zeros_like(jac_c)
        u = point - cam[:3, 3]
        # d/dt of R^T u = R^T (u x w_c + v_p - v_c)
        dd = cam[:3, :3].T @ (skew(u) @ jac_c[3:] + jac_p[:3] - jac_c[:3])
        desired = -ctx.config.rotation_gain * f
        return TaskRows(dfdd @ dd, desired, desired.copy())

    def value(self, ctx: TickContext) -> np.ndarray:
        _, _, d = self._geometry(ctx)
        return d[1:] / max(float(np.linalg.norm(d)), 1e-6)

    def error(self, ctx: TickContext) -> float:
        _, _, d = self._geometry(ctx)
        return float(np.linalg.norm(d[1:]) / max(np.linalg.norm(d), 1e-6))

    def converged(self, ctx: TickContext) -> bool:
        _, _, d = self._geometry(ctx)
        return bool(d[0] > 0 and self.error(ctx) <= self.tolerance)


class JointLimits(TaskFunction):
    """Velocity bounds with a position funnel near the limits"""

    def __init__(self):
        super().__init__("joint-limits", hard=True)

    def bounds(self, ctx: TickContext, lower: np.ndarray, upper: np.ndarray, velocity: np.ndarray):
        cfg = ctx.config
        q = ctx.slice("joints")[ctx.model.controlled_positions]
        margin = cfg.limit_margin * np.where(np.isfinite(upper - lower), upper - lower, 0.0)
        lo = -velocity.copy()
        hi = velocity.copy()
        finite = np.isfinite(lower) & np.isfinite(upper)
        # slow down inside the margin band, never beyond the limit in one tick
        near_hi = finite & (q > upper - margin)
        near_lo = finite & (q < lower + margin)
        hi[near_hi] = np.minimum(hi[near_hi], velocity[near_hi] * (upper[near_hi] - q[near_hi]) / np.maximum(margin[near_hi], 1e-9))
        lo[near_lo] = np.maximum(lo[near_lo], -velocity[near_lo] * (q[near_lo] - lower[near_lo]) / np.maximum(margin[near_lo], 1e-9))
        hi[finite] = np.minimum(hi[finite], (upper[finite] - q[finite]) / cfg.dt)
        lo[finite] = np.maximum(lo[finite], (lower[finite] - q[finite]) / cfg.dt)
        hi = np.maximum(hi, 0.0)
        lo = np.minimum(lo, 0.0)
        return lo, hi


class JointCentering(TaskFunction):
    """Weak pull of DOFs toward the middle of their range"""

    def __init__(self, dofs: List[str], centers: np.ndarray, weight: float):
        super().__init__("joint-centering", weight)
        self.dofs = list(dofs)
        self.centers = np.asarray(centers, dtype=float)

    def value(self, ctx: TickContext) -> np.ndarray:
        q = ctx.slice("joints")
        return q[[ctx.model.dof_index[d] for d in self.dofs]] - self.centers

    def rows(self, ctx: TickContext) -> TaskRows:
        q = ctx.slice("joints")
        jac = np.zeros((len(self.dofs), ctx.model.n_vars))
        for row, dof in enumerate(self.dofs):
            jac[row, ctx.model.var_index[dof]] = 1.0
        err = q[[ctx.model.dof_index[d] for d in self.dofs]] - self.centers
        desired = -ctx.config.centering_gain * err
        return TaskRows(jac, desired, desired.copy())


class CollisionRows(TaskFunction):
    """One distance row per monitored pair.

    The hard variant forbids approaching closer than the hard distance;
    the soft variant keeps the soft standoff.
    """

    def __init__(self, pairs, hard: bool, weight: float = 1.0):
        super().__init__("collision-hard" if hard else "collision-soft", weight, hard=hard)
        self.pairs = pairs

    def rows(self, ctx: TickContext) -> TaskRows:
        cfg = ctx.config
        data = ctx.slice("pairs")
        jac_rows, lower = [], []
        for k, pair in enumerate(self.pairs):
            row = data[k * PAIR_WIDTH:(k + 1) * PAIR_WIDTH]
            d = row[6]
            if not np.isfinite(d) or d > cfg.activation_distance:
                continue
            pa, pb, normal = row[0:3], row[3:6], row[7:10]
            j = normal @ ctx.frames.jacobian(pair.robot_body.link, pa)[:3]
            if pair.obstacle.link is not None:
                j = j - normal @ ctx.frames.jacobian(pair.obstacle.link, pb)[:3]
            if not np.any(j):
                continue
            if self.hard:
                lo = min(0.0, -cfg.damper_gain * (d - cfg.hard_distance) / cfg.dt)
            else:
                lo = cfg.soft_collision_gain * (cfg.soft_distance - d)
            jac_rows.append(j)
            lower.append(lo)
        if not jac_rows:
            return TaskRows.empty(ctx.model.n_vars)
        lower = np.array(lower)
        return TaskRows(np.array(jac_rows), lower, np.full(len(lower), np.inf))


class HandleTracking(TaskFunction):
    """Keep the tool frame on a container handle while the container moves"""

    def __init__(
        self,
        tool_frame: str,
        handle_link: str,
        handle_offset: np.ndarray,
        grip_offset: np.ndarray,
        weight: float,
        rotation_band: float
    ):
        super().__init__(f"handle-tracking:{handle_link}", weight)
        self.tool_frame = tool_frame
        self.handle_link = handle_link
        self.handle_offset = np.asarray(handle_offset, dtype=float)
        # desired tool pose relative to the handle frame
        self.grip_offset = np.asarray(grip_offset, dtype=float)
        self.rotation_band = rotation_band

    def _errors(self, ctx: TickContext):
        handle = ctx.frames.transform(self.handle_link) @ self.handle_offset
        goal = handle @ self.grip_offset
        tool = ctx.frames.transform(self.tool_frame)
        e_t = tool[:3, 3] - goal[:3, 3]
        e_r = Rotation.from_matrix(tool[:3, :3] @ goal[:3, :3].T).as_rotvec()
        return tool, e_t, e_r

    def value(self, ctx: TickContext) -> np.ndarray:
        _, e_t, e_r = self._errors(ctx)
        return np.concatenate([e_t, e_r])

    def tracking_error(self, ctx: TickContext) -> float:
        return float(np.linalg.norm(self._errors(ctx)[1]))

    def rows(self, ctx: TickContext) -> TaskRows:
        cfg = ctx.config
        tool, e_t, e_r = self._errors(ctx)
        j_tool = ctx.frames.jacobian(self.tool_frame, tool[:3, 3])
        j_handle = ctx.frames.jacobian(self.handle_link, tool[:3, 3])
        jac = j_tool - j_handle
        v = -cfg.translation_gain * e_t
        lo = -cfg.rotation_gain * (e_r + self.rotation_band)
        hi = -cfg.rotation_gain * (e_r - self.rotation_band)
        j_rot = inverse_left_jacobian(e_r) @ jac[3:]
        return TaskRows(np.vstack([jac[:3], j_rot]), np.concatenate([v, lo]), np.concatenate([v, hi]))


# ---------------------------------------------------------------------------
# Built-in goals
# ---------------------------------------------------------------------------

def cartesian_pose(frame: str, goal: np.ndarray, weight: float, rotation_band: float = 0.0) -> List[TaskFunction]:
    return [CartesianPoseGoal(frame, goal, weight, rotation_band=rotation_band)]


def keep_vertical(world: WorldState, frame: str, tolerance: float) -> List[TaskFunction]:
    """Hold the frame axis that currently points up"""
    rotation = world.link_transform(frame)[:3, :3]
    return [KeepVertical(frame, rotation.T @ np.array([0.0, 0.0, 1.0]), tolerance)]


def look_at(camera: str, target, weight: float, link: Optional[str] = None, goal: bool = False) -> List[TaskFunction]:
    return [LookAt(camera, target, weight, link=link, goal=goal)]


def joint_centering(world: WorldState, dofs: List[str], weight: float) -> List[TaskFunction]:
    tree = world.robot.tree
    centers = np.array([0.5 * (tree.lower[tree.dof_index(d)] + tree.upper[tree.dof_index(d)]) for d in dofs])
    return [JointCentering(dofs, centers, weight)]


def follow_articulation(
    world: WorldState,
    container_id: str,
    tool_frame: str,
    target: float,
    config: ControlConfig
) -> List[TaskFunction]:
    """Move a container joint to ``target`` while the tool keeps its grip on the handle.

    Raises:
        ValueError: when the target lies outside the container joint limits
    """
    container = world.container(container_id)
    joint = world.environment.tree.joints[container.joint]
    lo, hi = joint.dof_limits()[0]
    if not lo - 1e-9 <= target <= hi + 1e-9:
        raise ValueError(f"Target {target} of {container_id} outside limits [{lo}, {hi}]")
    handle = world.handle_transform(container_id)
    grip_offset = np.linalg.inv(handle) @ world.link_transform(tool_frame)
    return [
        HandleTracking(
            tool_frame,
            container.handle_link,
            container.handle_offset.matrix(),
            grip_offset,
            config.weight_interaction,
            config.articulation_rotation_band,
        ),
        JointPositionGoal(
            {joint.dof_names[0]: target},
            config.weight_interaction,
            name=container_id,
            tolerance=config.articulation_tolerance,
        ),
    ]

"""Geometric heuristics grounding symbolic locations to pose distributions"""

from dataclasses import dataclass
from typing import Any, Optional
import math

import numpy as np

from ..models.designator import Designator
from ..models.domain import FailureCategory, LocationUnreachable, Pose
from ..worldmodel.geometry import segments_hit_box, world_aabb
from ..worldmodel.world import WorldState
from .distributions import PoseDistribution, PoseGrid

LOCATION_KINDS = ("reachable-for", "visible-for", "on", "in", "pose")
# Free objects whose lowest point is below this height block the base
FLOOR_OBJECT_HEIGHT = 0.3


@dataclass
class HeuristicConfig:
    """Constants of the location heuristics"""
    resolution: float = 0.05
    theta_bins: int = 16
    base_radius: float = 0.36
    obstacle_max_height: float = 1.5
    reach_inner: float = 0.4
    reach_outer: float = 0.9
    reach_heading: float = 0.6
    visible_min: float = 0.6
    visible_max: float = 2.0
    camera_fov: float = 0.8
    camera_height: float = 1.3
    sight_margin: float = 0.05
    placement_clearance: float = 0.02

    def __post_init__(self):
        """Validate radii and bands"""
        if not 0 < self.reach_inner < self.reach_outer:
            raise ValueError(f"Reach annulus needs 0 < inner < outer, got {self.reach_inner}, {self.reach_outer}")
        if not 0 < self.visible_min < self.visible_max:
            raise ValueError(f"Visibility band needs 0 < min < max, got {self.visible_min}, {self.visible_max}")
        if self.resolution <= 0 or self.theta_bins <= 0:
            raise ValueError("Grid resolution and theta bins must be positive")


def base_grid(world: WorldState, config: HeuristicConfig) -> PoseGrid:
    (x0, x1), (y0, y1) = world.environment.footprint
    return PoseGrid.covering((x0, x1), (y0, y1), config.resolution, config.theta_bins)


def occupancy(world: WorldState, grid: PoseGrid, radius: float, max_height: float = 1.5) -> np.ndarray:
    """Cells where a disc of ``radius`` around the cell center hits furniture or floor objects.

    Returns:
        Boolean array of shape (nx, ny)
    """
    X, Y = grid.mesh()
    (fx0, fx1), (fy0, fy1) = world.environment.footprint
    occupied = (X - radius < fx0) | (X + radius > fx1) | (Y - radius < fy0) | (Y + radius > fy1)
    boxes = [world_aabb(b.shape, b.transform) for b in world.environment_bodies()]
    floor_objects = [world_aabb(b.shape, b.transform) for b in world.object_bodies() if b.link is None]
    boxes += [box for box in floor_objects if box[0][2] < FLOOR_OBJECT_HEIGHT]
    for low, high in boxes:
        if low[2] > max_height:
            continue
        dx = np.maximum(np.maximum(low[0] - X, X - high[0]), 0.0)
        dy = np.maximum(np.maximum(low[1] - Y, Y - high[1]), 0.0)
        occupied |= dx ** 2 + dy ** 2 < radius ** 2
    return occupied


def target_point(term: Any, world: WorldState) -> np.ndarray:
    """World point named by an object designator, pose, container, location or point"""
    if isinstance(term, Designator):
        if "pose" in term:
            return term["pose"].translation.copy()
        name = term.get("name")
        if name is not None:
            return target_point(name, world)
        raise ValueError(f"Designator {term.describe()} has no pose or name")
    if isinstance(term, Pose):
        return term.translation.copy()
    if isinstance(term, str):
        if term in world.objects:
            return world.objects[term].pose.translation.copy()
        if term in world.environment.containers:
            return world.handle_transform(term)[:3, 3].copy()
        if term in world.environment.locations:
            return world.location_transform(term)[:3, 3].copy()
        raise ValueError(f"Unknown target {term}")
    point = np.asarray(term, dtype=float)
    if point.shape != (3,):
        raise ValueError(f"Cannot interpret {term!r} as a target point")
    return point


def location_kind(location: Designator) -> str:
    kinds = [k for k in LOCATION_KINDS if k in location]
    if len(kinds) != 1:
        raise ValueError(f"Location designator needs exactly one of {LOCATION_KINDS}, got {list(location.keys())}")
    return kinds[0]


class LocationGrounder:
    """Turns location designators into uniform distributions over valid cells.

    Args:
        config: Heuristic constants
    """

    def __init__(self, config: Optional[HeuristicConfig] = None):
        self.config = config or HeuristicConfig()

    def ground(self, location: Designator, world: WorldState) -> PoseDistribution:
        """Uniform distribution over the cells satisfying the location's predicate.

        Raises:
            LocationUnreachable: no free cell satisfies the predicate
            ValueError: unrecognized location designator
        """
        kind = location_kind(location)
        if kind == "reachable-for":
            dist = self.reachable_for(target_point(location["reachable-for"], world), world)
        elif kind == "visible-for":
            dist = self.visible_for(target_point(location["visible-for"], world), world)
        elif kind in ("on", "in"):
            region = location[kind]
            if isinstance(region, Designator):
                region = region.get("name")
            dist = self.placement(region, world, location.get("for"))
        else:
            dist = self.single_pose(location["pose"], world)
        if dist.empty:
            category = FailureCategory.NAVIGATION if kind in ("reachable-for", "visible-for") else FailureCategory.MANIPULATION
            raise LocationUnreachable(f"no valid cell for {kind} {dist.label}", category)
        return dist

    def free_cells(self, world: WorldState, grid: PoseGrid) -> np.ndarray:
        cfg = self.config
        return ~occupancy(world, grid, cfg.base_radius, cfg.obstacle_max_height)

    def _headings(self, grid: PoseGrid, point: np.ndarray, window: float) -> np.ndarray:
        X, Y = grid.mesh()
        bearing = np.arctan2(point[1] - Y, point[0] - X)
        delta = bearing[..., None] - grid.thetas()[None, None, :]
        delta = (delta + math.pi) % (2.0 * math.pi) - math.pi
        return np.abs(delta) <= window

    def reachable_for(self, point: np.ndarray, world: WorldState) -> PoseDistribution:
        """Annulus around the target, robot facing it, minus occupied cells"""
        cfg = self.config
        grid = base_grid(world, cfg)
        X, Y = grid.mesh()
        distance = np.hypot(X - point[0], Y - point[1])
        ring = (distance >= cfg.reach_inner) & (distance <= cfg.reach_outer) & self.free_cells(world, grid)
        mask = ring[..., None] & self._headings(grid, point, cfg.reach_heading)
        return PoseDistribution.uniform(grid, mask, f"reachable-for {np.round(point, 3).tolist()}")

    def visible_for(self, point: np.ndarray, world: WorldState) -> PoseDistribution:
        """Distance band with an unobstructed line of sight and the target in the field of view"""
        cfg = self.config
        grid = base_grid(world, cfg)
        X, Y = grid.mesh()
        distance = np.hypot(X - point[0], Y - point[1])
        band = (distance >= cfg.visible_min) & (distance <= cfg.visible_max) & self.free_cells(world, grid)
        ix, iy = np.nonzero(band)
        if len(ix):
            starts = np.column_stack([X[ix, iy], Y[ix, iy], np.full(len(ix), cfg.camera_height)])
            direction = point - starts
            length = np.linalg.norm(direction, axis=1, keepdims=True)
            ends = point - direction / np.maximum(length, 1e-9) * cfg.sight_margin
            blocked = np.zeros(len(ix), dtype=bool)
            for body in world.environment_bodies():
                blocked |= segments_hit_box(starts, ends, body.shape, body.transform)
            band[ix[blocked], iy[blocked]] = False
        mask = band[..., None] & self._headings(grid, point, cfg.camera_fov)
        return PoseDistribution.uniform(grid, mask, f"visible-for {np.round(point, 3).tolist()}")

    def placement(self, region: str, world: WorldState, for_object: Any = None) -> PoseDistribution:
        """Uniform over a surface or container region minus occupied object footprints.

        Cells are positions of the placed object's center; the distribution
        has a single theta bin.
        """
        cfg = self.config
        if region not in world.environment.locations:
            raise ValueError(f"Unknown location {region}")
        loc = world.location(region)
        transform = world.location_transform(region)
        hx, hy = loc.half_extents
        corners = np.array([[sx * hx, sy * hy, 0.0, 1.0] for sx in (-1, 1) for sy in (-1, 1)]) @ transform.T
        grid = PoseGrid.covering(
            (corners[:, 0].min(), corners[:, 0].max()),
            (corners[:, 1].min(), corners[:, 1].max()),
            cfg.resolution,
            1,
        )
        X, Y = grid.mesh()
        local = np.linalg.inv(transform) @ np.vstack([X.ravel(), Y.ravel(), np.full(X.size, transform[2, 3]), np.ones(X.size)])
        lx = local[0].reshape(X.shape)
        ly = local[1].reshape(X.shape)

        radius = 0.0
        placed_id = None
        if isinstance(for_object, Designator):
            placed_id = for_object.get("name")
            object_type = for_object.get("type")
            if object_type in world.environment.object_types:
                half = world.environment.object_types[object_type].shape.local_extents()
                radius = float(math.hypot(half[0], half[1]))
        inside = (np.abs(lx) <= hx - radius) & (np.abs(ly) <= hy - radius)
        for obj in world.objects.values():
            if obj.id == placed_id or world.attached_to_robot(obj.id):
                continue
            if not world.location_contains(region, obj.pose.translation, 0.05):
                continue
            low, high = world_aabb(obj.shape, obj.pose.matrix())
            dx = np.maximum(np.maximum(low[0] - X, X - high[0]), 0.0)
            dy = np.maximum(np.maximum(low[1] - Y, Y - high[1]), 0.0)
            inside &= dx ** 2 + dy ** 2 >= (radius + cfg.placement_clearance) ** 2
        return PoseDistribution.uniform(grid, inside[..., None], f"{loc.kind} {region}")

    def single_pose(self, pose: Any, world: WorldState) -> PoseDistribution:
        """Point mass on the cell of a fixed base pose (empty when that cell is occupied)"""
        cfg = self.config
        if isinstance(pose, Pose):
            pose = pose.xy_theta()
        grid = base_grid(world, cfg)
        weights = np.zeros(grid.shape)
        idx = grid.index(*pose)
        if idx is not None and self.free_cells(world, grid)[idx[0], idx[1]]:
            weights[idx] = 1.0
        return PoseDistribution(grid, weights, f"pose {tuple(round(v, 3) for v in pose)}")


def ground_location(location: Designator, world: WorldState, config: Optional[HeuristicConfig] = None) -> PoseDistribution:
    """Functional form of :meth:`LocationGrounder.ground`"""
    return LocationGrounder(config).ground(location, world)


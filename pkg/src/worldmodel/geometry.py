"""Collision shapes and exact closest-point queries.

Every shape is a core (point, segment or box) swept by a radius: a sphere is
a point with radius, a capsule a segment with radius and a box a box with
zero radius. Signed distances are core distances minus both radii, so the
narrow phase only has to handle the six core pairings.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union
import itertools
import math

import numpy as np

from ..models.domain import Pose

EPS = 1e-12

# Unit cube corners and the 12 edges between them, shared by all box queries
_CORNER_SIGNS = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
_EDGES = np.array([
    (i, j) for i in range(8) for j in range(i + 1, 8)
    if np.sum(_CORNER_SIGNS[i] != _CORNER_SIGNS[j]) == 1
])


class ShapeKind(str, Enum):
    """Supported primitive shapes"""
    SPHERE = "sphere"
    CAPSULE = "capsule"
    BOX = "box"


@dataclass(frozen=True)
class Shape:
    """Primitive collision shape. Capsules run along the local z axis."""
    kind: ShapeKind
    radius: float = 0.0
    half_length: float = 0.0
    half_extents: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        """Validate dimensions for the given kind"""
        kind = ShapeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "half_extents", tuple(float(v) for v in self.half_extents))
        if kind in (ShapeKind.SPHERE, ShapeKind.CAPSULE) and self.radius <= 0:
            raise ValueError(f"{kind.value} radius must be positive, got {self.radius}")
        if kind == ShapeKind.CAPSULE and self.half_length <= 0:
            raise ValueError(f"Capsule half length must be positive, got {self.half_length}")
        if kind == ShapeKind.BOX and min(self.half_extents) <= 0:
            raise ValueError(f"Box half extents must be positive, got {self.half_extents}")

    @classmethod
    def sphere(cls, radius: float) -> "Shape":
        return cls(ShapeKind.SPHERE, radius=radius)

    @classmethod
    def capsule(cls, radius: float, half_length: float) -> "Shape":
        return cls(ShapeKind.CAPSULE, radius=radius, half_length=half_length)

    @classmethod
    def box(cls, hx: float, hy: float, hz: float) -> "Shape":
        return cls(ShapeKind.BOX, half_extents=(hx, hy, hz))

    @property
    def core_radius(self) -> float:
        return 0.0 if self.kind == ShapeKind.BOX else self.radius

    def bounding_radius(self) -> float:
        if self.kind == ShapeKind.SPHERE:
            return self.radius
        if self.kind == ShapeKind.CAPSULE:
            return self.radius + self.half_length
        return float(np.linalg.norm(self.half_extents))

    def local_extents(self) -> np.ndarray:
        """Half extents of the local axis-aligned bounding box"""
        if self.kind == ShapeKind.SPHERE:
            return np.full(3, self.radius)
        if self.kind == ShapeKind.CAPSULE:
            return np.array([self.radius, self.radius, self.radius + self.half_length])
        return np.array(self.half_extents)

    def width_across(self, axis: np.ndarray) -> float:
        """Extent of the shape along a unit direction given in the shape frame"""
        axis = np.asarray(axis, dtype=float)
        if self.kind == ShapeKind.SPHERE:
            return 2.0 * self.radius
        if self.kind == ShapeKind.CAPSULE:
            return 2.0 * (self.radius + self.half_length * abs(axis[2]))
        return 2.0 * float(np.dot(np.abs(axis), self.half_extents))

    def to_dict(self) -> dict:
        if self.kind == ShapeKind.SPHERE:
            return {"type": "sphere", "radius": self.radius}
        if self.kind == ShapeKind.CAPSULE:
            return {"type": "capsule", "radius": self.radius, "half_length": self.half_length}
        return {"type": "box", "half_extents": list(self.half_extents)}


@dataclass
class Contact:
    """Closest points between two shapes.

    ``distance`` is negative on penetration. ``normal`` is a unit vector
    pointing from shape b toward shape a, so that
    ``point_a - point_b == distance * normal``.
    """
    point_a: np.ndarray
    point_b: np.ndarray
    distance: float
    normal: np.ndarray


Transform = Union[Pose, np.ndarray]


def as_matrix(transform: Transform) -> np.ndarray:
    if isinstance(transform, Pose):
        return transform.matrix()
    return np.asarray(transform, dtype=float)


def box_corners(center: np.ndarray, rotation: np.ndarray, half: np.ndarray) -> np.ndarray:
    return center + (_CORNER_SIGNS * half) @ rotation.T


def world_aabb(shape: Shape, transform: Transform) -> Tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounding box of a posed shape"""
    m = as_matrix(transform)
    center = m[:3, 3]
    if shape.kind == ShapeKind.SPHERE:
        ext = np.full(3, shape.radius)
    elif shape.kind == ShapeKind.CAPSULE:
        ext = np.abs(m[:3, 2]) * shape.half_length + shape.radius
    else:
        ext = np.abs(m[:3, :3]) @ np.array(shape.half_extents)
    return center - ext, center + ext


# ---------------------------------------------------------------------------
# Core primitives
# ---------------------------------------------------------------------------

def _any_perpendicular(v: np.ndarray) -> np.ndarray:
    axis = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    perp = np.cross(v, axis)
    return perp / np.linalg.norm(perp)


def closest_point_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom <= EPS:
        return a.copy()
    t = min(max(float((p - a) @ ab) / denom, 0.0), 1.0)
    return a + t * ab


def closest_points_segments(p0, p1, q0, q1) -> Tuple[np.ndarray, np.ndarray]:
    """Closest points between segments [p0, p1] and [q0, q1]"""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= EPS and e <= EPS:
        return p0.copy(), q0.copy()
    if a <= EPS:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= EPS:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > EPS else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    return p0 + s * d1, q0 + t * d2


def _closest_points_segments_batch(p0, p1, q0, q1) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized segment/segment closest points for arrays of shape (N, 3).

    Degenerate segments are not expected here (box edges).
    """
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    safe = denom > EPS
    s = np.where(safe, np.clip((b * f - c * e) / np.where(safe, denom, 1.0), 0.0, 1.0), 0.0)
    t = (b * s + f) / e
    low = t < 0.0
    high = t > 1.0
    s = np.where(low, np.clip(-c / a, 0.0, 1.0), s)
    s = np.where(high, np.clip((b - c) / a, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    return p0 + s[:, None] * d1, q0 + t[:, None] * d2


def _points_to_box(points: np.ndarray, center, rotation, half) -> Tuple[np.ndarray, np.ndarray]:
    """Closest box points and distances for points outside (or on) a box"""
    local = (points - center) @ rotation
    clamped = np.clip(local, -half, half)
    closest = center + clamped @ rotation.T
    return closest, np.linalg.norm(points - closest, axis=1)


def _segment_intersects_box(p0, p1, center, rotation, half) -> bool:
    """Slab test in the box frame"""
    a = rotation.T @ (p0 - center)
    d = rotation.T @ (p1 - p0)
    t_min, t_max = 0.0, 1.0
    for i in range(3):
        if abs(d[i]) < EPS:
            if abs(a[i]) > half[i]:
                return False
            continue
        t1 = (-half[i] - a[i]) / d[i]
        t2 = (half[i] - a[i]) / d[i]
        if t1 > t2:
            t1, t2 = t2, t1
        t_min = max(t_min, t1)
        t_max = min(t_max, t2)
        if t_min > t_max:
            return False
    return True


def segments_hit_box(starts: np.ndarray, ends: np.ndarray, shape: Shape, transform: Transform) -> np.ndarray:
    """Vectorized slab test: which segments pass through a posed box"""
    m = as_matrix(transform)
    rotation = m[:3, :3]
    center = m[:3, 3]
    if shape.kind == ShapeKind.BOX:
        half = np.array(shape.half_extents)
    else:
        half = shape.local_extents()
    a = (starts - center) @ rotation
    d = (ends - starts) @ rotation
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - a) / d
        t2 = (half - a) / d
    parallel = np.abs(d) < EPS
    outside = parallel & (np.abs(a) > half)
    lo = np.where(parallel, -np.inf, np.minimum(t1, t2))
    hi = np.where(parallel, np.inf, np.maximum(t1, t2))
    t_min = np.maximum(lo.max(axis=1), 0.0)
    t_max = np.minimum(hi.min(axis=1), 1.0)
    return (t_min <= t_max) & ~outside.any(axis=1)


def _sat_axes_overlap(axes, center_delta, radius_fn) -> Tuple[float, np.ndarray]:
    """Minimum overlap over candidate axes; negative means separated"""
    best = math.inf
    best_axis = None
    for axis in axes:
        norm = np.linalg.norm(axis)
        if norm < 1e-9:
            continue
        axis = axis / norm
        overlap = radius_fn(axis) - abs(float(axis @ center_delta))
        if overlap < best:
            best = overlap
            best_axis = axis
    return best, best_axis


# ---------------------------------------------------------------------------
# Core pairings. Each returns (core point a, core point b, signed core
# distance, normal from b toward a).
# ---------------------------------------------------------------------------

def _unit(vector: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if norm > EPS:
        return vector / norm
    norm = np.linalg.norm(fallback)
    return fallback / norm if norm > EPS else np.array([0.0, 0.0, 1.0])


def _point_point(pa, pb):
    delta = pa - pb
    d = float(np.linalg.norm(delta))
    normal = delta / d if d > EPS else np.array([0.0, 0.0, 1.0])
    return pa, pb, d, normal


def _point_segment(pa, b0, b1):
    q = closest_point_on_segment(pa, b0, b1)
    delta = pa - q
    d = float(np.linalg.norm(delta))
    if d > EPS:
        return pa, q, d, delta / d
    axis = b1 - b0
    normal = _any_perpendicular(axis / np.linalg.norm(axis)) if np.linalg.norm(axis) > EPS else np.array([0.0, 0.0, 1.0])
    return pa, q, 0.0, normal


def _point_box(pa, center, rotation, half):
    local = rotation.T @ (pa - center)
    if np.any(np.abs(local) > half):
        clamped = np.clip(local, -half, half)
        q = center + rotation @ clamped
        delta = pa - q
        d = float(np.linalg.norm(delta))
        return pa, q, d, delta / d
    depths = half - np.abs(local)
    axis = int(np.argmin(depths))
    sign = 1.0 if local[axis] >= 0 else -1.0
    normal = rotation[:, axis] * sign
    surface = local.copy()
    surface[axis] = sign * half[axis]
    return pa, center + rotation @ surface, -float(depths[axis]), normal


def _segment_segment(a0, a1, b0, b1):
    ca, cb = closest_points_segments(a0, a1, b0, b1)
    delta = ca - cb
    d = float(np.linalg.norm(delta))
    if d > EPS:
        return ca, cb, d, delta / d
    cross = np.cross(a1 - a0, b1 - b0)
    if np.linalg.norm(cross) > 1e-9:
        normal = cross / np.linalg.norm(cross)
    else:
        normal = _any_perpendicular((a1 - a0) / max(np.linalg.norm(a1 - a0), EPS))
    return ca, cb, 0.0, normal


def _segment_box(a0, a1, center, rotation, half):
    if not _segment_intersects_box(a0, a1, center, rotation, half):
        ends = np.vstack([a0, a1])
        q, d = _points_to_box(ends, center, rotation, half)
        best = int(np.argmin(d))
        best_a, best_b, best_d = ends[best], q[best], float(d[best])
        corners = box_corners(center, rotation, half)
        n_edges = len(_EDGES)
        sa, sb = _closest_points_segments_batch(
            np.repeat(a0[None], n_edges, axis=0),
            np.repeat(a1[None], n_edges, axis=0),
            corners[_EDGES[:, 0]],
            corners[_EDGES[:, 1]],
        )
        dist = np.linalg.norm(sa - sb, axis=1)
        k = int(np.argmin(dist))
        if dist[k] < best_d:
            best_a, best_b, best_d = sa[k], sb[k], float(dist[k])
        return best_a, best_b, best_d, _unit(best_a - best_b, best_a - center)
    mid = 0.5 * (a0 + a1)
    half_seg = 0.5 * (a1 - a0)
    seg_dir = half_seg / max(np.linalg.norm(half_seg), EPS)
    axes = [rotation[:, i] for i in range(3)] + [np.cross(seg_dir, rotation[:, i]) for i in range(3)]
    overlap, axis = _sat_axes_overlap(
        axes,
        mid - center,
        lambda ax: float(np.abs(rotation.T @ ax) @ half) + abs(float(ax @ half_seg)),
    )
    if axis is None:
        axis = rotation[:, 2]
    if float(axis @ (mid - center)) < 0:
        axis = -axis
    deepest = a0 if float(axis @ a0) <= float(axis @ a1) else a1
    return deepest, deepest + overlap * axis, -overlap, axis


def _box_box(ca, ra, ha, cb, rb, hb):
    delta = ca - cb
    axes = [ra[:, i] for i in range(3)] + [rb[:, i] for i in range(3)]
    axes += [np.cross(ra[:, i], rb[:, j]) for i in range(3) for j in range(3)]
    overlap, axis = _sat_axes_overlap(
        axes,
        delta,
        lambda ax: float(np.abs(ra.T @ ax) @ ha + np.abs(rb.T @ ax) @ hb),
    )
    if overlap < 0:
        corners_a = box_corners(ca, ra, ha)
        corners_b = box_corners(cb, rb, hb)
        qa, da = _points_to_box(corners_a, cb, rb, hb)
        qb, db = _points_to_box(corners_b, ca, ra, ha)
        candidates = [
            (float(da.min()), corners_a[int(da.argmin())], qa[int(da.argmin())]),
            (float(db.min()), qb[int(db.argmin())], corners_b[int(db.argmin())]),
        ]
        ia, ib = np.meshgrid(np.arange(len(_EDGES)), np.arange(len(_EDGES)), indexing="ij")
        ia = ia.ravel()
        ib = ib.ravel()
        sa, sb = _closest_points_segments_batch(
            corners_a[_EDGES[ia, 0]], corners_a[_EDGES[ia, 1]],
            corners_b[_EDGES[ib, 0]], corners_b[_EDGES[ib, 1]],
        )
        dist = np.linalg.norm(sa - sb, axis=1)
        k = int(np.argmin(dist))
        candidates.append((float(dist[k]), sa[k], sb[k]))
        d, pa, pb = min(candidates, key=lambda item: item[0])
        return pa, pb, d, _unit(pa - pb, delta)
    if float(axis @ delta) < 0:
        axis = -axis
    # deepest corner of a against the separating direction
    support = ca + ra @ (-np.sign(ra.T @ axis) * ha)
    return support, support + overlap * axis, -overlap, axis


# ---------------------------------------------------------------------------
# Public query
# ---------------------------------------------------------------------------

_ORDER = {ShapeKind.SPHERE: 0, ShapeKind.CAPSULE: 1, ShapeKind.BOX: 2}


def _core(shape: Shape, m: np.ndarray):
    if shape.kind == ShapeKind.SPHERE:
        return (m[:3, 3],)
    if shape.kind == ShapeKind.CAPSULE:
        axis = m[:3, 2] * shape.half_length
        return (m[:3, 3] - axis, m[:3, 3] + axis)
    return (m[:3, 3], m[:3, :3], np.array(shape.half_extents))


def _core_pair(kind_a: ShapeKind, core_a, kind_b: ShapeKind, core_b):
    if _ORDER[kind_a] > _ORDER[kind_b]:
        cb, ca, d, normal = _core_pair(kind_b, core_b, kind_a, core_a)
        return ca, cb, d, -normal
    pair = (kind_a, kind_b)
    if pair == (ShapeKind.SPHERE, ShapeKind.SPHERE):
        return _point_point(core_a[0], core_b[0])
    if pair == (ShapeKind.SPHERE, ShapeKind.CAPSULE):
        return _point_segment(core_a[0], *core_b)
    if pair == (ShapeKind.SPHERE, ShapeKind.BOX):
        return _point_box(core_a[0], *core_b)
    if pair == (ShapeKind.CAPSULE, ShapeKind.CAPSULE):
        return _segment_segment(*core_a, *core_b)
    if pair == (ShapeKind.CAPSULE, ShapeKind.BOX):
        return _segment_box(*core_a, *core_b)
    return _box_box(*core_a, *core_b)


def closest_points(shape_a: Shape, pose_a: Transform, shape_b: Shape, pose_b: Transform) -> Contact:
    """Closest points and signed distance between two posed shapes.

    Args:
        shape_a: First shape
        pose_a: Pose (or 4x4 matrix) of the first shape
        shape_b: Second shape
        pose_b: Pose (or 4x4 matrix) of the second shape

    Returns:
        Contact with the normal pointing from b toward a
    """
    ma = as_matrix(pose_a)
    mb = as_matrix(pose_b)
    ca, cb, core_distance, normal = _core_pair(
        shape_a.kind, _core(shape_a, ma), shape_b.kind, _core(shape_b, mb)
    )
    ra = shape_a.core_radius
    rb = shape_b.core_radius
    point_a = ca - ra * normal
    point_b = cb + rb * normal
    return Contact(point_a, point_b, core_distance - ra - rb, normal)


def point_distance(shape: Shape, transform: Transform, points: np.ndarray) -> np.ndarray:
    """Unsigned distance from points to the surface of a posed shape (0 inside)"""
    m = as_matrix(transform)
    points = np.atleast_2d(points)
    if shape.kind == ShapeKind.SPHERE:
        return np.maximum(np.linalg.norm(points - m[:3, 3], axis=1) - shape.radius, 0.0)
    if shape.kind == ShapeKind.CAPSULE:
        axis = m[:3, 2]
        rel = points - m[:3, 3]
        t = np.clip(rel @ axis, -shape.half_length, shape.half_length)
        nearest = m[:3, 3] + t[:, None] * axis
        return np.maximum(np.linalg.norm(points - nearest, axis=1) - shape.radius, 0.0)
    _, d = _points_to_box(points, m[:3, 3], m[:3, :3], np.array(shape.half_extents))
    return d


# ---------------------------------------------------------------------------
# Surface samples
# ---------------------------------------------------------------------------

def _box_face_grid(half: np.ndarray, count: int) -> Tuple[np.ndarray, np.ndarray]:
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]]) * 4.0
    spacing = math.sqrt(2.0 * areas.sum() / max(count, 1))
    points, normals = [], []
    for axis in range(3):
        u, v = [i for i in range(3) if i != axis]
        nu = max(int(round(2 * half[u] / spacing)), 1)
        nv = max(int(round(2 * half[v] / spacing)), 1)
        gu = (np.arange(nu) + 0.5) / nu * 2 * half[u] - half[u]
        gv = (np.arange(nv) + 0.5) / nv * 2 * half[v] - half[v]
        uu, vv = np.meshgrid(gu, gv, indexing="ij")
        for sign in (-1.0, 1.0):
            face = np.zeros((uu.size, 3))
            face[:, u] = uu.ravel()
            face[:, v] = vv.ravel()
            face[:, axis] = sign * half[axis]
            normal = np.zeros(3)
            normal[axis] = sign
            points.append(face)
            normals.append(np.repeat(normal[None], len(face), axis=0))
    return np.vstack(points), np.vstack(normals)


def _fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * k / count)
    theta = math.pi * (1.0 + math.sqrt(5.0)) * k
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def structured_surface_points(shape: Shape, count: int = 500) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic, symmetry-preserving surface samples in the shape frame.

    Returns:
        (points, outward normals), each (N, 3)
    """
    if shape.kind == ShapeKind.BOX:
        return _box_face_grid(np.array(shape.half_extents), count)
    if shape.kind == ShapeKind.SPHERE:
        normals = _fibonacci_sphere(count)
        return normals * shape.radius, normals
    r, h = shape.radius, shape.half_length
    side_area = 4.0 * math.pi * r * h
    cap_area = 4.0 * math.pi * r * r
    n_side = max(int(count * side_area / (side_area + cap_area)), 8)
    n_rings = max(int(round(math.sqrt(n_side * h / (math.pi * r)))), 2)
    n_around = max(n_side // n_rings, 8)
    angles = 2.0 * math.pi * np.arange(n_around) / n_around
    heights = (np.arange(n_rings) + 0.5) / n_rings * 2 * h - h
    aa, hh = np.meshgrid(angles, heights, indexing="ij")
    side_normals = np.column_stack([np.cos(aa.ravel()), np.sin(aa.ravel()), np.zeros(aa.size)])
    side_points = side_normals * r
    side_points[:, 2] = hh.ravel()
    cap_normals = _fibonacci_sphere(max(count - len(side_points), 16))
    cap_points = cap_normals * r
    cap_points[:, 2] += np.where(cap_normals[:, 2] >= 0, h, -h)
    return np.vstack([side_points, cap_points]), np.vstack([side_normals, cap_normals])


def random_surface_points(shape: Shape, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Area-weighted random surface samples in the shape frame"""
    if shape.kind == ShapeKind.SPHERE:
        normals = rng.normal(size=(count, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return normals * shape.radius, normals
    if shape.kind == ShapeKind.CAPSULE:
        r, h = shape.radius, shape.half_length
        side_area = 4.0 * math.pi * r * h
        on_side = rng.random(count) < side_area / (side_area + 4.0 * math.pi * r * r)
        normals = rng.normal(size=(count, 3))
        normals[on_side, 2] = 0.0
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        points = normals * r
        points[on_side, 2] = rng.uniform(-h, h, size=int(on_side.sum()))
        caps = ~on_side
        points[caps, 2] += np.where(normals[caps, 2] >= 0, h, -h)
        return points, normals
    half = np.array(shape.half_extents)
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    axis = rng.choice(3, size=count, p=areas / areas.sum())
    sign = rng.choice((-1.0, 1.0), size=count)
    points = rng.uniform(-half, half, size=(count, 3))
    points[np.arange(count), axis] = sign * half[axis]
    normals = np.zeros((count, 3))
    normals[np.arange(count), axis] = sign
    return points, normals

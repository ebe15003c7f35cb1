"""Kinematic trees: links, joints, forward kinematics and Jacobians"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple
import math

import numpy as np

from ..models.domain import KinematicsError, Pose
from .geometry import Shape


class JointType(str, Enum):
    """Joint types; a planar base contributes three DOFs (x, y, theta)"""
    FIXED = "fixed"
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    PLANAR = "planar"


DOF_SUFFIXES = {
    JointType.FIXED: (),
    JointType.REVOLUTE: ("",),
    JointType.PRISMATIC: ("",),
    JointType.PLANAR: ("/x", "/y", "/theta"),
}


@dataclass
class Link:
    """Rigid body with collision shapes given relative to the link frame"""
    name: str
    shapes: List[Tuple[Shape, Pose]] = field(default_factory=list)


@dataclass
class Joint:
    """Joint between a parent and a child link.

    ``lower``/``upper`` bound each DOF of the joint. For planar joints they
    bound x and y; theta is unbounded.
    """
    name: str
    type: JointType
    parent: str
    child: str
    origin: Pose = field(default_factory=Pose.identity)
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    lower: float = -math.inf
    upper: float = math.inf
    velocity_limit: float = 1.0

    def __post_init__(self):
        """Validate joint limits and axis"""
        self.type = JointType(self.type)
        self.axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(self.axis)
        if self.type in (JointType.REVOLUTE, JointType.PRISMATIC) and norm < 1e-9:
            raise KinematicsError(f"Joint {self.name} needs a non-zero axis")
        if norm > 0:
            self.axis = self.axis / norm
        if self.lower > self.upper:
            raise KinematicsError(f"Joint {self.name} has lower limit {self.lower} above upper {self.upper}")
        if self.velocity_limit <= 0:
            raise KinematicsError(f"Joint {self.name} needs a positive velocity limit")
        self.origin_matrix = self.origin.matrix()

    @property
    def dof_names(self) -> List[str]:
        return [self.name + suffix for suffix in DOF_SUFFIXES[self.type]]

    def dof_limits(self) -> List[Tuple[float, float]]:
        if self.type == JointType.PLANAR:
            return [(self.lower, self.upper), (self.lower, self.upper), (-math.inf, math.inf)]
        return [(self.lower, self.upper)] * len(self.dof_names)

    def motion(self, values: Sequence[float]) -> np.ndarray:
        """Transform contributed by the joint's DOF values (after the origin)"""
        m = np.eye(4)
        if self.type == JointType.REVOLUTE:
            m[:3, :3] = _axis_angle(self.axis, values[0])
        elif self.type == JointType.PRISMATIC:
            m[:3, 3] = self.axis * values[0]
        elif self.type == JointType.PLANAR:
            c, s = math.cos(values[2]), math.sin(values[2])
            m[:2, :2] = [[c, -s], [s, c]]
            m[0, 3] = values[0]
            m[1, 3] = values[1]
        return m


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    t = 1.0 - c
    return np.array([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])


class KinematicTree:
    """Tree of links connected by joints, rooted at the world frame.

    DOFs are ordered depth-first from the root, children in declaration
    order. Positions are passed around as vectors in that order.
    """

    def __init__(self, name: str, links: Sequence[Link], joints: Sequence[Joint]):
        self.name = name
        self.links: Dict[str, Link] = {}
        for link in links:
            if link.name in self.links:
                raise KinematicsError(f"Duplicate link name {link.name} in {name}")
            self.links[link.name] = link

        self.joints: Dict[str, Joint] = {}
        self._parent_joint: Dict[str, Joint] = {}
        self._children: Dict[str, List[Joint]] = {n: [] for n in self.links}
        for joint in joints:
            if joint.name in self.joints:
                raise KinematicsError(f"Duplicate joint name {joint.name} in {name}")
            for end in (joint.parent, joint.child):
                if end not in self.links:
                    raise KinematicsError(f"Joint {joint.name} references unknown link {end}")
            if joint.child in self._parent_joint:
                raise KinematicsError(f"Link {joint.child} has more than one parent joint")
            self.joints[joint.name] = joint
            self._parent_joint[joint.child] = joint
            self._children[joint.parent].append(joint)

        roots = [n for n in self.links if n not in self._parent_joint]
        if len(roots) != 1:
            raise KinematicsError(f"Tree {name} must have exactly one root link, found {roots}")
        self.root = roots[0]
        if sum(1 for j in self.joints.values() if j.type == JointType.PLANAR) > 1:
            raise KinematicsError(f"Tree {name} has more than one planar base joint")

        # depth-first joint order, also detects unreachable links (cycles)
        stack = [self.root]
        visited = set()
        while stack:
            link = stack.pop()
            visited.add(link)
            for joint in reversed(self._children[link]):
                stack.append(joint.child)
        if len(visited) != len(self.links):
            raise KinematicsError(f"Tree {name} contains a cycle or disconnected links")
        self._order = self._depth_first(self.root)

        self.dof_names: List[str] = []
        self._dof_slices: Dict[str, slice] = {}
        lower, upper, velocity = [], [], []
        for joint in self._order:
            start = len(self.dof_names)
            self.dof_names.extend(joint.dof_names)
            self._dof_slices[joint.name] = slice(start, len(self.dof_names))
            for lo, hi in joint.dof_limits():
                lower.append(lo)
                upper.append(hi)
                velocity.append(joint.velocity_limit)
        self._dof_index = {n: i for i, n in enumerate(self.dof_names)}
        self.lower = np.array(lower)
        self.upper = np.array(upper)
        self.velocity_limits = np.array(velocity)

        self._chains: Dict[str, List[Joint]] = {}
        for link_name in self.links:
            chain = []
            current = link_name
            while current in self._parent_joint:
                joint = self._parent_joint[current]
                chain.append(joint)
                current = joint.parent
            self._chains[link_name] = list(reversed(chain))

    def _depth_first(self, link: str) -> List[Joint]:
        order = []
        for joint in self._children[link]:
            order.append(joint)
            order.extend(self._depth_first(joint.child))
        return order

    @property
    def dof_count(self) -> int:
        return len(self.dof_names)

    def has_link(self, name: str) -> bool:
        return name in self.links

    def dof_index(self, name: str) -> int:
        try:
            return self._dof_index[name]
        except KeyError:
            raise KinematicsError(f"Unknown DOF {name} in tree {self.name}") from None

    def joint_dofs(self, joint_name: str) -> List[int]:
        if joint_name not in self._dof_slices:
            raise KinematicsError(f"Unknown joint {joint_name} in tree {self.name}")
        s = self._dof_slices[joint_name]
        return list(range(s.start, s.stop))

    def chain(self, link: str) -> List[Joint]:
        """Joints from the root down to the given link"""
        if link not in self._chains:
            raise KinematicsError(f"Unknown link {link} in tree {self.name}")
        return self._chains[link]

    def parent_joint(self, link: str) -> Optional[Joint]:
        return self._parent_joint.get(link)

    def subtree_links(self, link: str) -> List[str]:
        names = [link]
        for joint in self._children[link]:
            names.extend(self.subtree_links(joint.child))
        return names

    def vector(self, positions: Dict[str, float]) -> np.ndarray:
        return np.array([positions.get(n, 0.0) for n in self.dof_names])

    def link_transforms(self, q: np.ndarray) -> Dict[str, np.ndarray]:
        """World transform of every link and joint frame for the position vector q.

        Joint frames (after origin, before motion) are stored under
        ``joint:<name>``.
        """
        transforms = {self.root: np.eye(4)}
        for joint in self._order:
            frame = transforms[joint.parent] @ joint.origin_matrix
            transforms["joint:" + joint.name] = frame
            values = q[self._dof_slices[joint.name]]
            transforms[joint.child] = frame @ joint.motion(values)
        return transforms

    def forward_kinematics(self, q: np.ndarray, link: str) -> np.ndarray:
        if link not in self.links:
            raise KinematicsError(f"Unknown link {link} in tree {self.name}")
        m = np.eye(4)
        for joint in self._chains[link]:
            m = m @ joint.origin_matrix @ joint.motion(q[self._dof_slices[joint.name]])
        return m

    def jacobian(
        self,
        q: np.ndarray,
        link: str,
        point: Optional[np.ndarray] = None,
        transforms: Optional[Dict[str, np.ndarray]] = None
    ) -> np.ndarray:
        """Geometric Jacobian (6 x n, linear rows first) of a point rigidly attached to a link.

        Args:
            q: Position vector of this tree
            link: Link the point is attached to
            point: Reference point in world coordinates; defaults to the link origin
            transforms: Precomputed output of link_transforms(q)

        Returns:
            Jacobian mapping DOF velocities to the point's linear and the link's angular velocity
        """
        if link not in self.links:
            raise KinematicsError(f"Unknown link {link} in tree {self.name}")
        if transforms is None:
            transforms = self.link_transforms(q)
        if point is None:
            point = transforms[link][:3, 3]
        jac = np.zeros((6, self.dof_count))
        for joint in self._chains[link]:
            frame = transforms["joint:" + joint.name]
            rot = frame[:3, :3]
            cols = self._dof_slices[joint.name]
            if joint.type == JointType.REVOLUTE:
                z = rot @ joint.axis
                jac[:3, cols.start] = np.cross(z, point - frame[:3, 3])
                jac[3:, cols.start] = z
            elif joint.type == JointType.PRISMATIC:
                jac[:3, cols.start] = rot @ joint.axis
            elif joint.type == JointType.PLANAR:
                values = q[cols]
                jac[:3, cols.start] = rot[:, 0]
                jac[:3, cols.start + 1] = rot[:, 1]
                z = rot[:, 2]
                origin = frame[:3, 3] + rot[:, 0] * values[0] + rot[:, 1] * values[1]
                jac[:3, cols.start + 2] = np.cross(z, point - origin)
                jac[3:, cols.start + 2] = z
        return jac

    def within_limits(self, q: np.ndarray, tolerance: float = 1e-9) -> bool:
        return bool(np.all(q >= self.lower - tolerance) and np.all(q <= self.upper + tolerance))

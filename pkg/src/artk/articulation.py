"""Rotation kernels and rigid part motions (revolute / prismatic)."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .core import (
    AXIS_UNIT_TOL,
    Mesh,
    MotionParameters,
    MotionType,
    NonUnitAxisError,
    PointCloud,
    PoseSpec,
    UnknownPartError,
)

UP = np.array([0.0, 1.0, 0.0])
RIGHT = np.array([1.0, 0.0, 0.0])
VIEW = np.array([0.0, 0.0, 1.0])


def _unit_axis(axis) -> np.ndarray:
    a = np.asarray(axis, dtype=np.float64).reshape(3)
    norm = float(np.linalg.norm(a))
    if not abs(norm - 1.0) <= AXIS_UNIT_TOL:
        raise NonUnitAxisError(f"axis norm {norm!r} is not 1")
    return a


def axis_angle_matrix(axis, theta: float) -> np.ndarray:
    """Rodrigues' formula: R = I + sin(t) K + (1 - cos(t)) K^2."""
    x, y, z = _unit_axis(axis)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


def euler_to_rotation(pose: PoseSpec) -> np.ndarray:
    """Object rotation for a pose: in-plane(Z) . elevation(X) . azimuth(Y)."""
    az, el, ip = (math.radians(a) for a in pose.as_tuple())
    return axis_angle_matrix(VIEW, ip) @ axis_angle_matrix(RIGHT, el) @ axis_angle_matrix(UP, az)


def apply_pose(points: np.ndarray, pose: PoseSpec) -> np.ndarray:
    """Rotate object-frame points about the object center into the camera frame."""
    return np.asarray(points, dtype=np.float64) @ euler_to_rotation(pose).T


def rodrigues_rotate(p, axis, origin, theta: float) -> np.ndarray:
    """Rotate point(s) ``p`` by ``theta`` about the line ``origin + s * axis``.

    Accepts a single 3-vector or an (n, 3) array.
    """
    k = _unit_axis(axis)
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    v = np.asarray(p, dtype=np.float64) - o
    c, s = math.cos(theta), math.sin(theta)
    kv = v @ k
    return o + v * c + np.cross(k, v) * s + np.multiply.outer(kv, k) * (1.0 - c)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation is not a proper orthonormal matrix")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_motion(cls, motion: MotionParameters) -> "RigidTransform":
        axis = _unit_axis(motion.axis)
        if motion.motion_type is MotionType.PRISMATIC:
            return cls(np.eye(3), motion.magnitude * axis)
        r = axis_angle_matrix(axis, motion.magnitude)
        o = np.asarray(motion.origin)
        return cls(r, o - r @ o)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self`` after ``other``."""
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def move_points(points: np.ndarray, motion: MotionParameters) -> np.ndarray:
    """Apply ``motion`` to every row of ``points``."""
    if motion.motion_type is MotionType.PRISMATIC:
        return points + motion.magnitude * _unit_axis(motion.axis)
    return rodrigues_rotate(points, motion.axis, motion.origin, motion.magnitude)


def split_seams(mesh: Mesh, face_moving: np.ndarray) -> tuple[Mesh, np.ndarray]:
    """Duplicate vertices shared by moving and static faces.

    Returns the (possibly) enlarged mesh and a per-vertex mask of vertices
    that belong exclusively to moving faces.
    """
    nv = len(mesh.vertices)
    faces = mesh.faces
    used_moving = np.zeros(nv, dtype=bool)
    used_static = np.zeros(nv, dtype=bool)
    used_moving[faces[face_moving].ravel()] = True
    used_static[faces[~face_moving].ravel()] = True
    seam = np.flatnonzero(used_moving & used_static)
    if len(seam) == 0:
        return mesh, used_moving
    remap = np.arange(nv)
    remap[seam] = nv + np.arange(len(seam))
    new_faces = faces.copy()
    new_faces[face_moving] = remap[faces[face_moving]]
    new_verts = np.concatenate([mesh.vertices, mesh.vertices[seam]])
    vmask = np.concatenate([used_moving & ~used_static, np.ones(len(seam), dtype=bool)])
    return Mesh(new_verts, new_faces, mesh.parts), vmask


def _check_parts(known: Iterable[str], part_ids: Iterable[str]) -> set[str]:
    wanted = set(part_ids)
    missing = sorted(wanted - set(known))
    if missing:
        raise UnknownPartError(missing[0])
    return wanted


def apply_motion(geometry, moveable, motion: MotionParameters):
    """Rigidly move the selected part(s) of a mesh or point cloud.

    ``moveable`` is a collection of part ids, or for point clouds optionally
    a boolean per-point mask. Unselected elements are returned bit-identical.
    """
    if isinstance(moveable, np.ndarray) and moveable.dtype == bool:
        if not isinstance(geometry, PointCloud):
            raise TypeError("boolean masks are only supported for point clouds")
        mask = moveable
        if len(mask) != geometry.n:
            raise ValueError("mask length does not match point count")
    elif isinstance(geometry, Mesh):
        wanted = _check_parts(geometry.part_ids, moveable)
        face_moving = np.isin(geometry.face_part_ids(), list(wanted))
        _unit_axis(motion.axis)
        if motion.magnitude == 0.0 or not face_moving.any():
            return geometry
        mesh, vmask = split_seams(geometry, face_moving)
        verts = mesh.vertices.copy()
        verts[vmask] = move_points(verts[vmask], motion)
        return mesh.with_vertices(verts)
    else:
        if geometry.part_ids is None:
            raise ValueError("point cloud has no part labels; pass a boolean mask")
        wanted = set(moveable)
        mask = geometry.mask_for(wanted)

    _unit_axis(motion.axis)
    if motion.magnitude == 0.0 or not mask.any():
        return geometry
    pts = geometry.points.copy()
    pts[mask] = move_points(pts[mask], motion)
    return PointCloud(pts, geometry.part_ids)


def invert_motion(motion: MotionParameters) -> MotionParameters:
    return replace(motion, magnitude=-motion.magnitude)


def interpolate_motion(motion: MotionParameters, t: float) -> MotionParameters:
    """Scale the magnitude by ``t``: 0 is the rest state, t > 1 extrapolates."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    return replace(motion, magnitude=motion.magnitude * t)


def animate(
    mesh: Mesh, moveable: Iterable[str], motion: MotionParameters, frames: int, t_max: float = 1.0
) -> list[Mesh]:
    """Frames at evenly spaced t in [0, t_max]; frame 0 is the rest state."""
    if frames < 2:
        raise ValueError("frames must be >= 2")
    moveable = list(moveable)
    return [
        apply_motion(mesh, moveable, interpolate_motion(motion, t_max * k / (frames - 1)))
        for k in range(frames)
    ]

"""Shared domain types for articulated objects, poses and per-scene records.

All geometry lives in the normalized object frame: the unit box is the
centered cube [-0.5, 0.5]^3, Y is up and the object front faces -Z.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

AXIS_UNIT_TOL = 1e-9
ZERO_AXIS_TOL = 1e-9

AZIMUTH_BINS = 24
ELEVATION_BINS = 12
INPLANE_BINS = 24
EULER_NAMES = ("azimuth", "elevation", "inplane")
BIN_COUNTS = (AZIMUTH_BINS, ELEVATION_BINS, INPLANE_BINS)

FOV_RANGE_DEG = (20.0, 60.0)


class ArtkError(Exception):
    """Base class for all errors raised by this package."""


class ZeroAxisError(ArtkError, ValueError):
    pass


class NonUnitAxisError(ArtkError, ValueError):
    pass


class UnknownPartError(ArtkError, KeyError):
    def __init__(self, part_id: str):
        super().__init__(part_id)
        self.part_id = part_id

    def __str__(self) -> str:
        return f"unknown part id {self.part_id!r}"


class LengthMismatchError(ArtkError, ValueError):
    pass


class SceneMismatchError(ArtkError, ValueError):
    def __init__(self, message: str, missing: Sequence[str] = ()):
        super().__init__(message)
        self.missing = tuple(missing)


class MotionType(str, enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"


# index order of PredictionRecord.motion_type_scores
MOTION_CLASSES = (MotionType.REVOLUTE, MotionType.PRISMATIC)


def _vec3(v: Sequence[float], name: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


def normalize_axis(v: Sequence[float]) -> np.ndarray:
    """Return ``v / |v|``; raises ZeroAxisError for (near) zero vectors."""
    arr = np.asarray(v, dtype=np.float64).reshape(3)
    norm = float(np.linalg.norm(arr))
    if not norm >= ZERO_AXIS_TOL:
        raise ZeroAxisError(f"axis norm {norm:g} is below {ZERO_AXIS_TOL:g}")
    return arr / norm


def wrap_degrees(angle: float) -> float:
    """Wrap an angle into [-180, 180); in-range values are returned unchanged."""
    angle = float(angle)
    if -180.0 <= angle < 180.0:
        return angle
    wrapped = (angle + 180.0) % 360.0 - 180.0
    # fmod rounding can land exactly on +180 for inputs just below -180
    return -180.0 if wrapped >= 180.0 else wrapped


# ---------------------------------------------------------------------------
# Mesh and point cloud


@dataclass(frozen=True)
class PartGroup:
    part_id: str
    face_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "face_indices", tuple(int(i) for i in self.face_indices))

    @property
    def part_class(self) -> str:
        """Semantic class of the part, e.g. ``"drawer"`` for ``"drawer_2"``."""
        head, sep, tail = self.part_id.rpartition("_")
        return head if sep and tail.isdigit() else self.part_id


def _frozen_array(a: Any, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle mesh with named part groups.

    Construction only coerces array types; use :func:`validate_mesh` to check
    index consistency and part coverage.
    """

    vertices: np.ndarray
    faces: np.ndarray
    parts: tuple[PartGroup, ...]

    def __post_init__(self):
        verts = _frozen_array(self.vertices, np.float64).reshape(-1, 3)
        faces = _frozen_array(self.faces, np.int64)
        if faces.size == 0:
            faces = _frozen_array(np.zeros((0, 3)), np.int64)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def part_ids(self) -> tuple[str, ...]:
        return tuple(p.part_id for p in self.parts)

    def part(self, part_id: str) -> PartGroup:
        for p in self.parts:
            if p.part_id == part_id:
                return p
        raise UnknownPartError(part_id)

    def face_part_index(self) -> np.ndarray:
        """Index into ``parts`` for every face (-1 where no part claims it)."""
        out = np.full(len(self.faces), -1, dtype=np.int64)
        for k, p in enumerate(self.parts):
            idx = np.asarray(p.face_indices, dtype=np.int64)
            idx = idx[(idx >= 0) & (idx < len(out))]
            out[idx] = k
        return out

    def face_part_ids(self) -> np.ndarray:
        ids = np.array(self.part_ids + ("",), dtype=object)
        return ids[self.face_part_index()]

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices, self.faces, self.parts)


def validate_mesh(mesh: Mesh) -> list[str]:
    """List every violated Mesh invariant; an empty list means the mesh is valid."""
    problems: list[str] = []
    nv = len(mesh.vertices)
    faces = mesh.faces
    if nv == 0:
        problems.append("mesh has no vertices")
    if faces.ndim != 2 or (faces.size and faces.shape[1] != 3):
        problems.append(f"faces must be triangles, got array of shape {faces.shape}")
        return problems
    nf = len(faces)
    if nf == 0:
        problems.append("mesh has no faces")
    if not np.all(np.isfinite(mesh.vertices)):
        bad = np.flatnonzero(~np.all(np.isfinite(mesh.vertices), axis=1))
        problems.append(f"vertex {int(bad[0])}: non-finite coordinate")
    for fi in np.flatnonzero(np.any((faces < 0) | (faces >= nv), axis=1)):
        problems.append(f"face {int(fi)}: index out of range")

    owner = np.full(nf, -1, dtype=np.int64)
    seen_ids: set[str] = set()
    for k, part in enumerate(mesh.parts):
        if part.part_id in seen_ids:
            problems.append(f"part {part.part_id!r}: duplicate part id")
        seen_ids.add(part.part_id)
        if not part.face_indices:
            problems.append(f"part {part.part_id!r}: empty")
        local: set[int] = set()
        for fi in part.face_indices:
            if fi in local:
                problems.append(f"part {part.part_id!r}: duplicate face {fi}")
                continue
            local.add(fi)
            if fi < 0 or fi >= nf:
                problems.append(f"part {part.part_id!r}: face {fi} out of range")
                continue
            if owner[fi] != -1:
                problems.append(f"parts overlap at face {fi}")
            else:
                owner[fi] = k
    for fi in np.flatnonzero(owner == -1):
        problems.append(f"face {int(fi)}: not covered by any part")
    return problems


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    part_ids: np.ndarray | None = None

    def __post_init__(self):
        pts = _frozen_array(self.points, np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", pts)
        if self.part_ids is not None:
            ids = _frozen_array(self.part_ids, object).reshape(-1)
            if len(ids) != len(pts):
                raise LengthMismatchError(
                    f"part_ids has length {len(ids)}, expected {len(pts)}"
                )
            object.__setattr__(self, "part_ids", ids)

    @property
    def n(self) -> int:
        return len(self.points)

    def mask_for(self, part_ids) -> np.ndarray:
        if self.part_ids is None:
            raise ValueError("point cloud carries no part labels")
        return np.isin(self.part_ids, list(part_ids))


# ---------------------------------------------------------------------------
# Motion and pose


@dataclass(frozen=True)
class MotionParameters:
    """Single-DoF part motion in the object frame.

    ``magnitude`` is radians for revolute joints and normalized length for
    prismatic ones. ``origin`` is kept for prismatic joints but never used.
    """

    motion_type: MotionType
    axis: tuple[float, float, float]
    origin: tuple[float, float, float]
    magnitude: float

    def __post_init__(self):
        object.__setattr__(self, "motion_type", MotionType(self.motion_type))
        axis = _vec3(self.axis, "axis")
        norm = math.sqrt(sum(c * c for c in axis))
        if abs(norm - 1.0) > AXIS_UNIT_TOL:
            raise NonUnitAxisError(f"motion axis norm {norm!r} is not 1")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "origin", _vec3(self.origin, "origin"))
        mag = float(self.magnitude)
        if not math.isfinite(mag):
            raise ValueError("motion magnitude must be finite")
        object.__setattr__(self, "magnitude", mag)

    def to_dict(self) -> dict:
        return {
            "motion_type": self.motion_type.value,
            "axis": list(self.axis),
            "origin": list(self.origin),
            "magnitude": self.magnitude,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MotionParameters":
        return cls(d["motion_type"], d["axis"], d["origin"], d["magnitude"])


@dataclass(frozen=True)
class PoseSpec:
    azimuth_deg: float
    elevation_deg: float
    inplane_deg: float

    def __post_init__(self):
        az, el, ip = (float(self.azimuth_deg), float(self.elevation_deg), float(self.inplane_deg))
        if not (-180.0 <= az < 180.0):
            raise ValueError(f"azimuth {az} outside [-180, 180)")
        if not (-90.0 <= el <= 90.0):
            raise ValueError(f"elevation {el} outside [-90, 90]")
        if not (-180.0 <= ip < 180.0):
            raise ValueError(f"in-plane angle {ip} outside [-180, 180)")
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "elevation_deg", el)
        object.__setattr__(self, "inplane_deg", ip)

    @classmethod
    def from_degrees(cls, azimuth: float, elevation: float, inplane: float) -> "PoseSpec":
        """Build a pose, wrapping azimuth and in-plane angles into [-180, 180)."""
        return cls(wrap_degrees(azimuth), elevation, wrap_degrees(inplane))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.azimuth_deg, self.elevation_deg, self.inplane_deg)

    def to_dict(self) -> dict:
        return {
            "azimuth_deg": self.azimuth_deg,
            "elevation_deg": self.elevation_deg,
            "inplane_deg": self.inplane_deg,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PoseSpec":
        return cls(d["azimuth_deg"], d["elevation_deg"], d["inplane_deg"])


class OutOfRangeBinError(ArtkError, ValueError):
    pass


@dataclass(frozen=True)
class PoseBinned:
    """Bin index plus fractional in-bin offset for (azimuth, elevation, in-plane).

    Offsets live in [0, 1); the single value 1.0 is accepted so that the top
    of the closed elevation range (+90) stays representable.
    """

    bins: tuple[int, int, int]
    offsets: tuple[float, float, float]

    def __post_init__(self):
        bins = tuple(int(b) for b in self.bins)
        offsets = tuple(float(o) for o in self.offsets)
        if len(bins) != 3 or len(offsets) != 3:
            raise ValueError("PoseBinned needs exactly three bins and three offsets")
        for name, b, count in zip(EULER_NAMES, bins, BIN_COUNTS):
            if not 0 <= b < count:
                raise OutOfRangeBinError(f"{name} bin {b} outside [0, {count})")
        for name, o in zip(EULER_NAMES, offsets):
            if not 0.0 <= o <= 1.0:
                raise OutOfRangeBinError(f"{name} offset {o} outside [0, 1)")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "offsets", offsets)

    def to_dict(self) -> dict:
        return {"bins": list(self.bins), "offsets": list(self.offsets)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PoseBinned":
        return cls(tuple(d["bins"]), tuple(d["offsets"]))


# ---------------------------------------------------------------------------
# Records


def _split_extras(d: Mapping[str, Any], known: Sequence[str]) -> dict:
    return {k: v for k, v in d.items() if k not in known}


@dataclass(frozen=True)
class AnnotationRecord:
    scene_id: str
    object_id: str
    mesh_path: str
    pose: PoseSpec
    fov_deg: float
    moved_part_id: str
    motion: MotionParameters
    pointcloud_seed: int
    extras: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    FIELDS = (
        "scene_id", "object_id", "mesh_path", "pose", "fov_deg",
        "moved_part_id", "motion", "pointcloud_seed",
    )

    def __post_init__(self):
        fov = float(self.fov_deg)
        if not FOV_RANGE_DEG[0] <= fov <= FOV_RANGE_DEG[1]:
            raise ValueError(f"fov_deg {fov} outside {list(FOV_RANGE_DEG)}")
        object.__setattr__(self, "fov_deg", fov)
        object.__setattr__(self, "pointcloud_seed", int(self.pointcloud_seed))
        object.__setattr__(self, "extras", MappingProxyType(dict(self.extras)))

    def check_mesh(self, mesh: Mesh) -> None:
        """Raise UnknownPartError if the moved part is not in ``mesh``."""
        mesh.part(self.moved_part_id)

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "object_id": self.object_id,
            "mesh_path": self.mesh_path,
            "pose": self.pose.to_dict(),
            "fov_deg": self.fov_deg,
            "moved_part_id": self.moved_part_id,
            "motion": self.motion.to_dict(),
            "pointcloud_seed": self.pointcloud_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AnnotationRecord":
        return cls(
            scene_id=str(d["scene_id"]),
            object_id=str(d["object_id"]),
            mesh_path=str(d["mesh_path"]),
            pose=PoseSpec.from_dict(d["pose"]),
            fov_deg=d["fov_deg"],
            moved_part_id=str(d["moved_part_id"]),
            motion=MotionParameters.from_dict(d["motion"]),
            pointcloud_seed=d["pointcloud_seed"],
            extras=_split_extras(d, cls.FIELDS),
        )


@dataclass(frozen=True)
class PredictionRecord:
    """A predictor's output for one scene.

    ``point_moveable_prob`` is either a sequence indexed by evaluation point
    (see :func:`artk.metrics.eval_points`) or a mapping ``part_id -> prob``
    that applies to every point on that part. ``pose_logits`` is optional and
    only needed for pose-loss scoring.
    """

    scene_id: str
    pose: PoseBinned
    motion_type_scores: tuple[float, float]
    axis: tuple[float, float, float]
    origin: tuple[float, float, float]
    magnitude: float
    point_moveable_prob: tuple[float, ...] | Mapping[str, float]
    pose_logits: Mapping[str, tuple[float, ...]] | None = None
    extras: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    FIELDS = (
        "scene_id", "pose", "motion_type_scores", "axis", "origin",
        "magnitude", "point_moveable_prob", "pose_logits",
    )

    def __post_init__(self):
        scores = tuple(float(s) for s in self.motion_type_scores)
        if len(scores) != 2 or not all(math.isfinite(s) for s in scores):
            raise ValueError("motion_type_scores must be two finite numbers")
        object.__setattr__(self, "motion_type_scores", scores)
        object.__setattr__(self, "axis", _vec3(self.axis, "axis"))
        object.__setattr__(self, "origin", _vec3(self.origin, "origin"))
        mag = float(self.magnitude)
        if not math.isfinite(mag):
            raise ValueError("magnitude must be finite")
        object.__setattr__(self, "magnitude", mag)

        probs = self.point_moveable_prob
        if isinstance(probs, Mapping):
            clean = {str(k): float(v) for k, v in probs.items()}
            values = clean.values()
            probs = MappingProxyType(clean)
        else:
            probs = tuple(float(v) for v in probs)
            values = probs
        if not all(0.0 <= v <= 1.0 for v in values):
            raise ValueError("moveable probabilities must lie in [0, 1]")
        object.__setattr__(self, "point_moveable_prob", probs)

        if self.pose_logits is not None:
            logits = {}
            for name, count in zip(EULER_NAMES, BIN_COUNTS):
                row = tuple(float(v) for v in self.pose_logits[name])
                if len(row) != count:
                    raise LengthMismatchError(f"{name} logits need {count} values, got {len(row)}")
                logits[name] = row
            object.__setattr__(self, "pose_logits", MappingProxyType(logits))
        object.__setattr__(self, "extras", MappingProxyType(dict(self.extras)))

    @property
    def predicted_type(self) -> MotionType:
        s = self.motion_type_scores
        return MOTION_CLASSES[0] if s[0] >= s[1] else MOTION_CLASSES[1]

    def to_dict(self) -> dict:
        probs = self.point_moveable_prob
        d = {
            "scene_id": self.scene_id,
            "pose": self.pose.to_dict(),
            "motion_type_scores": list(self.motion_type_scores),
            "axis": list(self.axis),
            "origin": list(self.origin),
            "magnitude": self.magnitude,
            "point_moveable_prob": dict(probs) if isinstance(probs, Mapping) else list(probs),
        }
        if self.pose_logits is not None:
            d["pose_logits"] = {k: list(v) for k, v in self.pose_logits.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PredictionRecord":
        return cls(
            scene_id=str(d["scene_id"]),
            pose=PoseBinned.from_dict(d["pose"]),
            motion_type_scores=tuple(d["motion_type_scores"]),
            axis=d["axis"],
            origin=d["origin"],
            magnitude=d["magnitude"],
            point_moveable_prob=d["point_moveable_prob"],
            pose_logits=d.get("pose_logits"),
            extras=_split_extras(d, cls.FIELDS),
        )


# ---------------------------------------------------------------------------
# Seeding


def derive_seed(*keys: int) -> int:
    """Deterministic 64-bit seed from a tuple of non-negative integers.

    Uses numpy's SeedSequence hashing, so results are stable across platforms
    and independent of call order.
    """
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; every random draw in the package goes through this."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def scene_seed(seed: int, scene_id: str) -> int:
    """Seed for per-scene draws that depends on the scene id, not list position."""
    digest = hashlib.sha256(scene_id.encode("utf-8")).digest()
    return derive_seed(seed, int.from_bytes(digest[:8], "little"))

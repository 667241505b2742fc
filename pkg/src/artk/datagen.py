"""Procedural articulated objects and annotated scene sampling.

Objects are assemblies of closed boxes (one box per part) built around a body
of width/height/depth drawn from ``BODY_DIM_RANGE``, then normalized to the
unit box. Conventions: Y is up, the front of the object faces -Z.

Seeds: object ``i`` of a dataset uses ``derive_seed(seed, 0, i)``, scene ``k``
of object ``i`` uses ``derive_seed(seed, 1, i, k)``, and a scene's point cloud
seed is ``derive_seed(scene_seed, 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .articulation import apply_motion, apply_pose
from .core import (
    AnnotationRecord,
    ArtkError,
    Mesh,
    MotionParameters,
    MotionType,
    PointCloud,
    PoseSpec,
    derive_seed,
    make_rng,
)
from .geometry import AREA_THRESHOLD, filter_small_parts, merge_meshes, normalize_to_unit_box, sample_pointcloud
from .parallel import parallel_map

KINDS = ("cabinet-drawers", "cabinet-doors", "mixed", "lid-box")

BODY_DIM_RANGE = (0.4, 1.0)
PANEL_THICKNESS = 0.02
PANEL_GAP = 0.01
FRONT_MARGIN = 0.02
DRAWER_DEPTH_FRACTION = 0.85

REVOLUTE_RANGE = (0.0, math.radians(120.0))
PRISMATIC_DEPTH_FRACTION = 0.4

AZIMUTH_RANGE = (-90.0, 90.0)
ELEVATION_RANGE = (-45.0, 45.0)
INPLANE_RANGE = (-20.0, 20.0)
FOV_RANGE = (20.0, 60.0)

POINTS_PER_CLOUD = 2500
SCENES_PER_OBJECT = 256
TRAIN_RATIO = 0.965
MAX_REGENERATIONS = 100


class TooFewObjectsError(ArtkError, ValueError):
    pass


@dataclass(frozen=True)
class JointSpec:
    part_id: str
    motion_type: MotionType
    axis: tuple[float, float, float]
    origin: tuple[float, float, float]
    limits: tuple[float, float]

    def motion(self, magnitude: float) -> MotionParameters:
        return MotionParameters(self.motion_type, self.axis, self.origin, magnitude)


@dataclass(frozen=True, eq=False)
class ArticulatedObject:
    object_id: str
    kind: str
    mesh: Mesh
    joints: tuple[JointSpec, ...]
    body_dims: tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def mesh_path(self) -> str:
        return f"{self.object_id}.obj"

    def joint(self, part_id: str) -> JointSpec:
        for j in self.joints:
            if j.part_id == part_id:
                return j
        raise KeyError(part_id)


@dataclass(frozen=True, eq=False)
class SceneSample:
    record: AnnotationRecord
    rest_cloud: PointCloud | None = None
    cloud: PointCloud | None = None


# ---------------------------------------------------------------------------
# box assembly


_BOX_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # -z
        [4, 5, 6], [4, 6, 7],  # +z
        [0, 1, 5], [0, 5, 4],  # -y
        [3, 7, 6], [3, 6, 2],  # +y
        [0, 4, 7], [0, 7, 3],  # -x
        [1, 2, 6], [1, 6, 5],  # +x
    ],
    dtype=np.int64,
)


def box(lo: Sequence[float], hi: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Closed axis-aligned box with outward-facing triangles."""
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    v = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
        ],
        dtype=np.float64,
    )
    return v, _BOX_FACES.copy()


@dataclass
class _Builder:
    pieces: list = field(default_factory=list)
    joints: list = field(default_factory=list)

    def add(self, part_id, lo, hi):
        v, f = box(lo, hi)
        self.pieces.append((part_id, v, f))

    def joint(self, part_id, motion_type, axis, origin, limits):
        self.joints.append((part_id, motion_type, axis, origin, limits))


def _stack(y0: float, y1: float, n: int) -> list[tuple[float, float]]:
    step = (y1 - y0) / n
    return [(y0 + i * step + PANEL_GAP / 2, y0 + (i + 1) * step - PANEL_GAP / 2) for i in range(n)]


def _add_drawers(b: _Builder, dims, y0, y1, n, start=0):
    w, h, d = dims
    x0, x1 = -w / 2 + FRONT_MARGIN, w / 2 - FRONT_MARGIN
    z0, z1 = -d / 2 - PANEL_THICKNESS, -d / 2 + DRAWER_DEPTH_FRACTION * d
    for i, (ya, yb) in enumerate(_stack(y0, y1, n)):
        pid = f"drawer_{start + i}"
        b.add(pid, (x0, ya, z0), (x1, yb, z1))
        center = ((x0 + x1) / 2, (ya + yb) / 2, (z0 + z1) / 2)
        b.joint(pid, MotionType.PRISMATIC, (0.0, 0.0, -1.0), center, ("depth", PRISMATIC_DEPTH_FRACTION))


def _add_side_doors(b: _Builder, dims, y0, y1, n, rng, start=0):
    """Doors hinged on a vertical edge; they swing out towards -Z."""
    w, h, d = dims
    zf = -d / 2
    x0, x1 = -w / 2 + FRONT_MARGIN, w / 2 - FRONT_MARGIN
    if n == 1:
        spans = [(x0, x1, "left" if rng.random() < 0.5 else "right")]
    else:
        xm = (x0 + x1) / 2
        spans = [(x0, xm - PANEL_GAP / 2, "left"), (xm + PANEL_GAP / 2, x1, "right")]
    for i, (xa, xb, side) in enumerate(spans):
        pid = f"door_{start + i}"
        b.add(pid, (xa, y0, zf - PANEL_THICKNESS), (xb, y1, zf))
        # right-hand rule: +Y swings the free (+x) edge of a left-hinged door to -Z;
        # the hinge sits on the outer face so the door never sweeps into the body
        hinge_x, axis = (xa, (0.0, 1.0, 0.0)) if side == "left" else (xb, (0.0, -1.0, 0.0))
        origin = (hinge_x, (y0 + y1) / 2, zf - PANEL_THICKNESS)
        b.joint(pid, MotionType.REVOLUTE, axis, origin, REVOLUTE_RANGE)


def _add_flip_door(b: _Builder, dims, y0, y1, start=0):
    """Door hinged on its bottom edge that folds down towards -Z."""
    w, h, d = dims
    zf = -d / 2
    x0, x1 = -w / 2 + FRONT_MARGIN, w / 2 - FRONT_MARGIN
    pid = f"door_{start}"
    b.add(pid, (x0, y0, zf - PANEL_THICKNESS), (x1, y1, zf))
    b.joint(pid, MotionType.REVOLUTE, (-1.0, 0.0, 0.0), (0.0, y0, zf - PANEL_THICKNESS), REVOLUTE_RANGE)


def _add_lid(b: _Builder, dims, rng):
    """Lid on top of the body, hinged on the back or the left top edge."""
    w, h, d = dims
    yt = h / 2
    b.add("lid_0", (-w / 2, yt, -d / 2), (w / 2, yt + PANEL_THICKNESS, d / 2))
    if rng.random() < 0.5:
        axis, origin = (1.0, 0.0, 0.0), (0.0, yt, d / 2)
    else:
        axis, origin = (0.0, 0.0, 1.0), (-w / 2, yt, 0.0)
    b.joint("lid_0", MotionType.REVOLUTE, axis, origin, REVOLUTE_RANGE)


def _build(kind: str, rng: np.random.Generator) -> tuple[_Builder, tuple[float, float, float]]:
    dims = tuple(float(x) for x in rng.uniform(*BODY_DIM_RANGE, size=3))
    w, h, d = dims
    b = _Builder()
    b.add("body", (-w / 2, -h / 2, -d / 2), (w / 2, h / 2, d / 2))
    y0, y1 = -h / 2 + FRONT_MARGIN, h / 2 - FRONT_MARGIN
    if kind == "cabinet-drawers":
        _add_drawers(b, dims, y0, y1, int(rng.integers(1, 5)))
    elif kind == "cabinet-doors":
        _add_side_doors(b, dims, y0, y1, int(rng.integers(1, 3)), rng)
    elif kind == "mixed":
        ys = y0 + (y1 - y0) * float(rng.uniform(0.4, 0.6))
        _add_drawers(b, dims, ys + PANEL_GAP / 2, y1, 1)
        if rng.random() < 0.5:
            _add_flip_door(b, dims, y0, ys - PANEL_GAP / 2)
        else:
            _add_side_doors(b, dims, y0, ys - PANEL_GAP / 2, int(rng.integers(1, 3)), rng)
    elif kind == "lid-box":
        _add_lid(b, dims, rng)
    else:
        raise ValueError(f"unknown object kind {kind!r}; expected one of {KINDS}")
    return b, dims


def generate_object(kind: str, seed: int, object_id: str = "obj") -> ArticulatedObject:
    """Build a normalized articulated object of the given kind.

    Rebuilds with a derived seed until every moveable part covers at least
    5% of the total surface area.
    """
    for attempt in range(MAX_REGENERATIONS):
        rng = make_rng(seed if attempt == 0 else derive_seed(seed, attempt))
        b, dims = _build(kind, rng)
        raw = merge_meshes(b.pieces)
        mesh, scale, translation = normalize_to_unit_box(raw)
        passing = set(filter_small_parts(mesh, AREA_THRESHOLD))
        if all(j[0] in passing for j in b.joints):
            break
    else:
        raise RuntimeError(f"could not build a {kind} object with large enough parts")

    depth = dims[2] * scale
    joints = []
    for part_id, mtype, axis, origin, limits in b.joints:
        if limits[0] == "depth":
            limits = (0.0, limits[1] * depth)
        o = (np.asarray(origin) + translation) * scale
        joints.append(JointSpec(part_id, mtype, axis, tuple(float(c) for c in o), tuple(limits)))
    norm_dims = tuple(float(x * scale) for x in dims)
    return ArticulatedObject(object_id, kind, mesh, tuple(joints), norm_dims)


# ---------------------------------------------------------------------------
# scenes


def sample_pose(rng: np.random.Generator) -> PoseSpec:
    return PoseSpec(
        float(rng.uniform(*AZIMUTH_RANGE)),
        float(rng.uniform(*ELEVATION_RANGE)),
        float(rng.uniform(*INPLANE_RANGE)),
    )


def sample_scene(
    obj: ArticulatedObject, seed: int, scene_id: str | None = None, with_cloud: bool = True
) -> SceneSample:
    """One annotated scene: random pose, FOV, moving part and magnitude.

    With ``with_cloud`` the sample also carries the 2500-point rest cloud and
    the articulated, posed cloud standing in for the image (re-normalized to
    the unit box).
    """
    if not obj.joints:
        raise ValueError(f"object {obj.object_id!r} has no joints")
    rng = make_rng(seed)
    pose = sample_pose(rng)
    fov = float(rng.uniform(*FOV_RANGE))
    joint = obj.joints[int(rng.integers(len(obj.joints)))]
    magnitude = float(rng.uniform(*joint.limits))
    record = AnnotationRecord(
        scene_id=scene_id or f"{obj.object_id}_{seed}",
        object_id=obj.object_id,
        mesh_path=obj.mesh_path,
        pose=pose,
        fov_deg=fov,
        moved_part_id=joint.part_id,
        motion=joint.motion(magnitude),
        pointcloud_seed=derive_seed(seed, 2),
    )
    if not with_cloud:
        return SceneSample(record)
    rest = sample_pointcloud(obj.mesh, POINTS_PER_CLOUD, record.pointcloud_seed)
    return SceneSample(record, rest, articulated_cloud(rest, record))


def articulated_cloud(rest: PointCloud, record: AnnotationRecord) -> PointCloud:
    moved = apply_motion(rest, {record.moved_part_id}, record.motion)
    posed = PointCloud(apply_pose(moved.points, record.pose), moved.part_ids)
    return normalize_to_unit_box(posed)[0]


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class Dataset:
    train: list[AnnotationRecord]
    val: list[AnnotationRecord]
    objects: list[ArticulatedObject]
    config: dict

    @property
    def meshes(self) -> dict[str, Mesh]:
        return {o.mesh_path: o.mesh for o in self.objects}


def split_counts(n_objects: int, scenes_per_object: int, train_ratio: float) -> list[int]:
    """Per-object train counts for the per-image split.

    The global train total is ``floor(train_ratio * n_objects * scenes)``; it
    is spread evenly with the remainder going to the first objects, and every
    object keeps at least one scene on each side when it has two or more.
    """
    total = int(math.floor(train_ratio * n_objects * scenes_per_object))
    base, extra = divmod(total, n_objects)
    counts = [base + (1 if i < extra else 0) for i in range(n_objects)]
    if scenes_per_object >= 2:
        counts = [min(max(c, 1), scenes_per_object - 1) for c in counts]
    return counts


def _make_object(args) -> ArticulatedObject:
    seed, i, kinds = args
    obj_seed = derive_seed(seed, 0, i)
    kind = kinds[int(make_rng(obj_seed).integers(len(kinds)))]
    return generate_object(kind, obj_seed, object_id=f"obj_{i:04d}")


def _make_scenes(args) -> list[AnnotationRecord]:
    seed, i, obj, n = args
    return [
        sample_scene(obj, derive_seed(seed, 1, i, k), f"{obj.object_id}_s{k:04d}", with_cloud=False).record
        for k in range(n)
    ]


def generate_dataset(
    n_objects: int,
    scenes_per_object: int = SCENES_PER_OBJECT,
    split: str = "image",
    seed: int = 0,
    train_ratio: float = TRAIN_RATIO,
    kinds: Sequence[str] = KINDS,
) -> Dataset:
    """Objects plus train/val scene records.

    ``split="image"`` divides each object's scenes; ``split="object"`` divides
    the objects themselves so no object id appears on both sides.
    """
    if split not in ("image", "object"):
        raise ValueError(f"split must be 'image' or 'object', got {split!r}")
    if n_objects < 1 or scenes_per_object < 1:
        raise ValueError("need at least one object and one scene per object")
    if split == "object" and n_objects < 2:
        raise TooFewObjectsError("per-object split needs ≥2 objects")
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown object kind {k!r}")
    kinds = tuple(kinds)

    objects = parallel_map(_make_object, [(seed, i, kinds) for i in range(n_objects)])
    scenes = parallel_map(
        _make_scenes, [(seed, i, obj, scenes_per_object) for i, obj in enumerate(objects)]
    )

    train: list[AnnotationRecord] = []
    val: list[AnnotationRecord] = []
    if split == "image":
        for recs, n_train in zip(scenes, split_counts(n_objects, scenes_per_object, train_ratio)):
            train.extend(recs[:n_train])
            val.extend(recs[n_train:])
    else:
        n_train = min(max(int(math.floor(train_ratio * n_objects)), 1), n_objects - 1)
        perm = make_rng(derive_seed(seed, 3)).permutation(n_objects)
        train_ids = set(int(i) for i in perm[:n_train])
        for i, recs in enumerate(scenes):
            (train if i in train_ids else val).extend(recs)

    config = {
        "n_objects": n_objects,
        "scenes_per_object": scenes_per_object,
        "split": split,
        "seed": seed,
        "train_ratio": train_ratio,
        "kinds": list(kinds),
        "points_per_cloud": POINTS_PER_CLOUD,
        "pose_ranges_deg": {
            "azimuth": list(AZIMUTH_RANGE),
            "elevation": list(ELEVATION_RANGE),
            "inplane": list(INPLANE_RANGE),
        },
        "fov_range_deg": list(FOV_RANGE),
        "revolute_range_rad": list(REVOLUTE_RANGE),
        "prismatic_depth_fraction": PRISMATIC_DEPTH_FRACTION,
    }
    return Dataset(train, val, list(objects), config)

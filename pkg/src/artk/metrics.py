"""Evaluation metrics and their aggregation into a report.

Per-scene random draws are keyed off the ground-truth record's
``pointcloud_seed``:

* segmentation points: 1000 samples, seed ``derive_seed(pcs, SEG_PURPOSE)``
* moved-part inference: 100 samples per part, seed ``derive_seed(pcs, INFER_PURPOSE)``
* reconstruction clouds: 10^4 samples, seed ``derive_seed(pcs, RECON_PURPOSE)``

A per-point ``point_moveable_prob`` list is indexed by the segmentation points
of :func:`eval_points`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .articulation import apply_motion
from .core import (
    AnnotationRecord,
    ArtkError,
    LengthMismatchError,
    Mesh,
    MotionParameters,
    PartGroup,
    MotionType,
    PointCloud,
    PoseBinned,
    PoseSpec,
    PredictionRecord,
    SceneMismatchError,
    derive_seed,
    normalize_axis,
)
from .geometry import EmptyCloudError, NearestNeighborIndex, sample_pointcloud, triangle_areas
from .parallel import parallel_map
from .pose import pose_error_deg

POSE_THRESHOLD_DEG = 30.0
# strict "<" on the threshold, ignoring round-off in the geodesic
POSE_BOUNDARY_EPS = 1e-9
SEG_POINTS = 1000
RECON_POINTS = 10_000
F_SCORE_TAU = 0.1
CHAMFER_SCALE = 100.0
PROB_THRESHOLD = 0.5
SAMPLES_PER_PART = 100

SEG_PURPOSE = 10
INFER_PURPOSE = 11
RECON_PURPOSE = 12


class MissingMeshError(ArtkError, KeyError):
    pass


# ---------------------------------------------------------------------------
# single metrics


def pose_acc30(pairs: Iterable[tuple[PoseSpec | PoseBinned, PoseSpec | PoseBinned]]) -> float:
    """Percentage of (gt, pred) pose pairs with geodesic error below 30 degrees."""
    errs = [pose_error_deg(gt, pred) for gt, pred in pairs]
    if not errs:
        return float("nan")
    hits = sum(e < POSE_THRESHOLD_DEG - POSE_BOUNDARY_EPS for e in errs)
    return 100.0 * hits / len(errs)


def axis_error_deg(a_pred, a_gt) -> float:
    """Sign-sensitive angle between two axes, in [0, 180]."""
    a = normalize_axis(a_pred)
    b = normalize_axis(a_gt)
    return math.degrees(math.atan2(float(np.linalg.norm(np.cross(a, b))), float(a @ b)))


def origin_error_l1(o_pred, o_gt, predicted_type: MotionType) -> float | None:
    """L1 origin distance, or None when the prediction is not revolute."""
    if MotionType(predicted_type) is not MotionType.REVOLUTE:
        return None
    return float(np.abs(np.asarray(o_pred, float) - np.asarray(o_gt, float)).sum())


def magnitude_errors(pred_magnitude: float, gt: MotionParameters) -> tuple[str, float]:
    """``("mag_r", degrees)`` for revolute ground truth, else ``("mag_p", L1)``."""
    diff = abs(float(pred_magnitude) - gt.magnitude)
    if gt.motion_type is MotionType.REVOLUTE:
        return "mag_r", math.degrees(diff)
    return "mag_p", diff


def seg_accuracy(pred_probs, gt_mask) -> float:
    p = np.asarray(pred_probs, dtype=np.float64).reshape(-1)
    y = np.asarray(gt_mask, dtype=bool).reshape(-1)
    if len(p) != len(y):
        raise LengthMismatchError(f"{len(p)} probabilities for {len(y)} points")
    if len(p) == 0:
        raise LengthMismatchError("no points to score")
    return 100.0 * float(np.mean((p > PROB_THRESHOLD) == y))


def _points(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyCloudError("metric needs non-empty clouds")
    return pts


def nn_distances(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Distances from each point of ``a`` to ``b`` and from each point of ``b`` to ``a``."""
    pa, pb = _points(a), _points(b)
    return NearestNeighborIndex(pb).query_many(pa)[1], NearestNeighborIndex(pa).query_many(pb)[1]


def _chamfer(d_ab: np.ndarray, d_ba: np.ndarray) -> float:
    return CHAMFER_SCALE * (float(np.mean(d_ab**2)) + float(np.mean(d_ba**2)))


def _fscore(d_ab: np.ndarray, d_ba: np.ndarray, tau: float) -> float:
    precision = float(np.mean(d_ab < tau))
    recall = float(np.mean(d_ba < tau))
    if precision + recall == 0.0:
        return 0.0
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def chamfer(cloud_a, cloud_b) -> float:
    """100 x (mean squared NN distance a->b + mean squared NN distance b->a)."""
    return _chamfer(*nn_distances(cloud_a, cloud_b))


def f_score(cloud_a, cloud_b, tau: float = F_SCORE_TAU) -> float:
    return _fscore(*nn_distances(cloud_a, cloud_b), tau)


# ---------------------------------------------------------------------------
# segmentation / part inference


def eval_points(mesh: Mesh, record: AnnotationRecord, n: int = SEG_POINTS) -> PointCloud:
    """The fixed per-scene points used for segmentation scoring."""
    return sample_pointcloud(mesh, n, derive_seed(record.pointcloud_seed, SEG_PURPOSE))


def point_probs(
    probs: Sequence[float] | Mapping[str, float], cloud: PointCloud
) -> np.ndarray:
    """Per-point moveable probability on ``cloud`` from either prediction form."""
    if isinstance(probs, Mapping):
        return np.array([probs.get(pid, 0.0) for pid in cloud.part_ids], dtype=np.float64)
    arr = np.asarray(probs, dtype=np.float64).reshape(-1)
    if len(arr) != cloud.n:
        raise LengthMismatchError(f"{len(arr)} point probabilities for {cloud.n} evaluation points")
    return arr


def _part_submesh(mesh: Mesh, part_index: int) -> Mesh:
    part = mesh.parts[part_index]
    faces = mesh.faces[np.asarray(part.face_indices, dtype=np.int64)]
    return Mesh(mesh.vertices, faces, (PartGroup(part.part_id, tuple(range(len(faces)))),))


def infer_moved_parts(
    mesh: Mesh,
    pred_probs: Sequence[float] | Mapping[str, float] | Callable[[np.ndarray, str], np.ndarray],
    seed: int,
    eval_cloud: PointCloud | None = None,
    threshold: float = PROB_THRESHOLD,
    samples_per_part: int = SAMPLES_PER_PART,
) -> set[str]:
    """Parts on which strictly more than half of the sampled points are moveable.

    Each part gets ``samples_per_part`` area-weighted samples (seed
    ``derive_seed(seed, part_index)``) and a point counts as moveable when its
    probability exceeds ``threshold``. ``pred_probs`` may be

    * a mapping ``part_id -> prob`` applied to all of a part's samples,
    * a sequence aligned with ``eval_cloud``; each sample takes the value of
      its nearest evaluation point on the same part (nearest overall if the
      part has no evaluation points),
    * a callable ``(points, part_id) -> probs``.
    """
    if not mesh.parts:
        raise ValueError("mesh has no parts")
    per_point = None
    if not isinstance(pred_probs, Mapping) and not callable(pred_probs):
        if eval_cloud is None:
            raise ValueError("per-point probabilities need the evaluation cloud")
        per_point = point_probs(pred_probs, eval_cloud)
        global_index = NearestNeighborIndex(eval_cloud)
    areas = triangle_areas(mesh.vertices, mesh.faces)
    moved: set[str] = set()
    for k, part in enumerate(mesh.parts):
        idx = np.asarray(part.face_indices, dtype=np.int64)
        if not areas[idx].sum() > 0.0:
            continue
        if isinstance(pred_probs, Mapping):
            p = float(pred_probs.get(part.part_id, 0.0))
            hits = samples_per_part if p > threshold else 0
        else:
            samples = sample_pointcloud(_part_submesh(mesh, k), samples_per_part, derive_seed(seed, k))
            if per_point is None:
                probs = np.asarray(pred_probs(samples.points, part.part_id), dtype=np.float64)
            else:
                on_part = np.flatnonzero(eval_cloud.part_ids == part.part_id)
                if len(on_part):
                    nn, _ = NearestNeighborIndex(eval_cloud.points[on_part]).query_many(samples.points)
                    probs = per_point[on_part[nn]]
                else:
                    nn, _ = global_index.query_many(samples.points)
                    probs = per_point[nn]
            hits = int(np.count_nonzero(probs > threshold))
        if 2 * hits > samples_per_part:
            moved.add(part.part_id)
    return moved


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class MetricsReport:
    pose_acc30: float
    type_acc: float
    axis_err_deg: float
    origin_err_l1: float | None
    mag_r_deg: float | None
    mag_p_l1: float | None
    seg_acc: float
    chamfer: float | None
    f1_at_0_1: float | None
    n_scenes: int
    n_revolute: int
    n_prismatic: int

    def to_dict(self) -> dict:
        """Flat dict; metrics without eligible scenes are omitted."""
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsReport":
        names = cls.__dataclass_fields__
        return cls(**{k: d.get(k) for k in names})


def predicted_motion(pred: PredictionRecord) -> MotionParameters:
    return MotionParameters(
        pred.predicted_type, tuple(normalize_axis(pred.axis)), pred.origin, pred.magnitude
    )


def scene_metrics(
    gt: AnnotationRecord, pred: PredictionRecord, mesh: Mesh, with_3d: bool = True
) -> dict:
    """All per-scene metric contributions (gated ones may be None)."""
    out: dict = {}
    out["pose_hit"] = pose_acc30([(gt.pose, pred.pose)]) == 100.0
    out["type_hit"] = pred.predicted_type is gt.motion.motion_type
    out["axis_err"] = axis_error_deg(pred.axis, gt.motion.axis)
    out["origin_err"] = origin_error_l1(pred.origin, gt.motion.origin, pred.predicted_type)
    kind, err = magnitude_errors(pred.magnitude, gt.motion)
    out[kind] = err

    seg_cloud = eval_points(mesh, gt)
    gt_mask = seg_cloud.part_ids == gt.moved_part_id
    out["seg"] = seg_accuracy(point_probs(pred.point_moveable_prob, seg_cloud), gt_mask)

    if with_3d:
        moved = infer_moved_parts(
            mesh, pred.point_moveable_prob, derive_seed(gt.pointcloud_seed, INFER_PURPOSE), seg_cloud
        )
        rest = sample_pointcloud(mesh, RECON_POINTS, derive_seed(gt.pointcloud_seed, RECON_PURPOSE))
        gt_cloud = apply_motion(rest, {gt.moved_part_id}, gt.motion)
        pred_cloud = apply_motion(rest, moved, predicted_motion(pred))
        d_ab, d_ba = nn_distances(pred_cloud, gt_cloud)
        out["chamfer"] = _chamfer(d_ab, d_ba)
        out["f1"] = _fscore(d_ab, d_ba, F_SCORE_TAU)
    return out


def _mean(values: list[float]) -> float | None:
    # fsum is exactly rounded, so the mean does not depend on scene order
    return math.fsum(values) / len(values) if values else None


def align_records(
    gt: Sequence[AnnotationRecord], pred: Sequence[PredictionRecord]
) -> list[tuple[AnnotationRecord, PredictionRecord]]:
    """Pair records by scene id, sorted by id; raises SceneMismatchError."""
    gt_by = {}
    for r in gt:
        if r.scene_id in gt_by:
            raise SceneMismatchError(f"duplicate ground-truth scene {r.scene_id!r}", [r.scene_id])
        gt_by[r.scene_id] = r
    pred_by = {}
    for r in pred:
        if r.scene_id in pred_by:
            raise SceneMismatchError(f"duplicate prediction scene {r.scene_id!r}", [r.scene_id])
        pred_by[r.scene_id] = r
    missing = sorted(set(gt_by) ^ set(pred_by))
    if missing:
        raise SceneMismatchError(
            f"{len(missing)} scene ids are not present on both sides", missing
        )
    return [(gt_by[s], pred_by[s]) for s in sorted(gt_by)]


def evaluate(
    gt: Sequence[AnnotationRecord],
    pred: Sequence[PredictionRecord],
    meshes: Mapping[str, Mesh],
    with_3d: bool = True,
) -> MetricsReport:
    """Aggregate every metric over scene-aligned (ground truth, prediction) pairs."""
    pairs = align_records(gt, pred)
    if not pairs:
        raise SceneMismatchError("no scenes to evaluate")
    for g, _ in pairs:
        if g.mesh_path not in meshes:
            raise MissingMeshError(g.mesh_path)

    rows = parallel_map(lambda gp: scene_metrics(gp[0], gp[1], meshes[gp[0].mesh_path], with_3d), pairs)

    def col(key):
        return [r[key] for r in rows if r.get(key) is not None]

    n_rev = sum(g.motion.motion_type is MotionType.REVOLUTE for g, _ in pairs)
    return MetricsReport(
        pose_acc30=100.0 * _mean([float(h) for h in col("pose_hit")]),
        type_acc=100.0 * _mean([float(h) for h in col("type_hit")]),
        axis_err_deg=_mean(col("axis_err")),
        origin_err_l1=_mean(col("origin_err")),
        mag_r_deg=_mean(col("mag_r")),
        mag_p_l1=_mean(col("mag_p")),
        seg_acc=_mean(col("seg")),
        chamfer=_mean(col("chamfer")),
        f1_at_0_1=_mean(col("f1")),
        n_scenes=len(pairs),
        n_revolute=n_rev,
        n_prismatic=len(pairs) - n_rev,
    )

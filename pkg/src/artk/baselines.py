"""Heuristic predictors built from training annotations.

``randmot_predict`` copies the labels of a random training record and moves a
random part. ``freqmot_predict`` samples a random pose but predicts the most
common motion parameters (via k-means) and the part whose surface area is
closest to the typical moved part. ``oracle_prediction`` turns a ground-truth
record into a prediction, which is handy for checking the evaluator.

Per-scene randomness is keyed on ``(seed, scene_id)`` so predictions do not
depend on the order of the evaluation set.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    BIN_COUNTS,
    EULER_NAMES,
    MOTION_CLASSES,
    AnnotationRecord,
    ArtkError,
    Mesh,
    MotionType,
    PartGroup,
    PredictionRecord,
    make_rng,
    scene_seed,
)
from .datagen import sample_pose
from .geometry import part_areas
from .metrics import MissingMeshError
from .pose import encode_pose

KMEANS_K = 10
KMEANS_ITERS = 50

__all__ = [
    "EmptyTrainSetError",
    "TrainStats",
    "kmeans",
    "largest_cluster_mean",
    "build_train_stats",
    "randmot_predict",
    "freqmot_predict",
    "oracle_prediction",
]


class EmptyTrainSetError(ArtkError, ValueError):
    pass


def _type_scores(motion_type: MotionType, confidence: float = 1.0) -> tuple[float, float]:
    return (confidence, -confidence) if MotionType(motion_type) is MOTION_CLASSES[0] else (-confidence, confidence)


def _one_part(mesh: Mesh, part_id: str) -> dict[str, float]:
    return {pid: 1.0 if pid == part_id else 0.0 for pid in mesh.part_ids}


def _check_parts(mesh: Mesh) -> None:
    if not mesh.parts:
        raise ValueError("evaluation mesh has no parts")


def oracle_prediction(record: AnnotationRecord, mesh: Mesh, confidence: float = 10.0) -> PredictionRecord:
    """The prediction a perfect model would make for ``record``."""
    record.check_mesh(mesh)
    binned = encode_pose(record.pose)
    logits = {
        name: tuple(confidence if i == b else 0.0 for i in range(count))
        for name, b, count in zip(EULER_NAMES, binned.bins, BIN_COUNTS)
    }
    m = record.motion
    return PredictionRecord(
        scene_id=record.scene_id,
        pose=binned,
        motion_type_scores=_type_scores(m.motion_type, confidence),
        axis=m.axis,
        origin=m.origin,
        magnitude=m.magnitude,
        point_moveable_prob=_one_part(mesh, record.moved_part_id),
        pose_logits=logits,
    )


# ---------------------------------------------------------------------------
# RandMot


def randmot_predict(
    train: Sequence[AnnotationRecord], eval_record: AnnotationRecord, mesh: Mesh, seed: int
) -> PredictionRecord:
    if not train:
        raise EmptyTrainSetError("RandMot needs at least one training record")
    _check_parts(mesh)
    rng = make_rng(scene_seed(seed, eval_record.scene_id))
    src = train[int(rng.integers(len(train)))]
    part = mesh.part_ids[int(rng.integers(len(mesh.part_ids)))]
    m = src.motion
    return PredictionRecord(
        scene_id=eval_record.scene_id,
        pose=encode_pose(src.pose),
        motion_type_scores=_type_scores(m.motion_type),
        axis=m.axis,
        origin=m.origin,
        magnitude=m.magnitude,
        point_moveable_prob=_one_part(mesh, part),
    )


# ---------------------------------------------------------------------------
# clustering


def _mean(rows: np.ndarray) -> np.ndarray:
    # offsets from the first row keep the mean of identical rows exact
    return rows[0] + (rows - rows[0]).mean(axis=0)


def kmeans(values, k: int = KMEANS_K, iters: int = KMEANS_ITERS, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's k-means with seeded farthest-point initialization.

    Returns ``(centers, labels)``. Fewer than ``k`` centers come back when the
    data has fewer distinct points. Empty clusters keep their previous center.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) == 0:
        raise EmptyTrainSetError("cannot cluster an empty set")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = make_rng(seed)
    centers = [x[int(rng.integers(len(x)))]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    while len(centers) < k:
        i = int(np.argmax(d2))
        if d2[i] == 0.0:
            break
        centers.append(x[i])
        d2 = np.minimum(d2, np.sum((x - x[i]) ** 2, axis=1))
    c = np.array(centers)
    labels = np.zeros(len(x), dtype=np.int64)
    for _ in range(iters):
        dist = np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist, axis=1)
        new_c = c.copy()
        for j in range(len(c)):
            members = x[new_labels == j]
            if len(members):
                new_c[j] = _mean(members)
        converged = np.array_equal(new_labels, labels) and np.array_equal(new_c, c)
        labels, c = new_labels, new_c
        if converged:
            break
    return c, labels


def largest_cluster_mean(values, k: int = KMEANS_K, iters: int = KMEANS_ITERS, seed: int = 0) -> np.ndarray:
    """Mean of the most populous k-means cluster (ties go to the lower cluster index)."""
    x = np.asarray(values, dtype=np.float64)
    flat = x.ndim == 1
    centers, labels = kmeans(x, k, iters, seed)
    counts = np.bincount(labels, minlength=len(centers))
    best = int(np.argmax(counts))
    mean = _mean((x[:, None] if flat else x)[labels == best])
    return mean[0] if flat else mean


# ---------------------------------------------------------------------------
# FreqMot


@dataclass(frozen=True)
class TrainStats:
    records: tuple[AnnotationRecord, ...]
    motion_type: MotionType
    axis: tuple[float, float, float]
    origin: tuple[float, float, float]
    magnitude: float
    magnitude_by_type: Mapping[MotionType, float]
    part_class: str
    mean_area: float


def _part_class(part_id: str) -> str:
    return PartGroup(part_id, ()).part_class


def _most_common(items, order) -> object:
    counts = Counter(items)
    top = max(counts.values())
    return min((x for x, c in counts.items() if c == top), key=order)


def build_train_stats(
    train: Sequence[AnnotationRecord],
    meshes: Mapping[str, Mesh],
    k: int = KMEANS_K,
    seed: int = 0,
    iters: int = KMEANS_ITERS,
) -> TrainStats:
    """Summaries FreqMot predicts from.

    ``meshes`` maps ``mesh_path`` to the rest mesh and is used to measure the
    area of moved parts. The predicted magnitude is the largest-cluster mean
    over all magnitudes together; per-type means are kept alongside.
    Origins are clustered over revolute records only (prismatic origins carry
    no meaning) unless there are none.
    """
    train = tuple(train)
    if not train:
        raise EmptyTrainSetError("FreqMot needs at least one training record")
    motion_type = _most_common((r.motion.motion_type for r in train), MOTION_CLASSES.index)

    axes = np.array([r.motion.axis for r in train], dtype=np.float64)
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    axis = largest_cluster_mean(axes, k, iters, seed)
    norm = np.linalg.norm(axis)
    if norm > 0:
        axis = axis / norm

    revolute = [r for r in train if r.motion.motion_type is MotionType.REVOLUTE]
    origin = largest_cluster_mean(
        np.array([r.motion.origin for r in (revolute or train)], dtype=np.float64), k, iters, seed
    )

    mags = np.array([r.motion.magnitude for r in train], dtype=np.float64)
    magnitude = float(largest_cluster_mean(mags, k, iters, seed))
    by_type = {}
    for t in MOTION_CLASSES:
        sel = [r.motion.magnitude for r in train if r.motion.motion_type is t]
        if sel:
            by_type[t] = float(largest_cluster_mean(np.array(sel), k, iters, seed))

    part_class = _most_common((_part_class(r.moved_part_id) for r in train), str)
    areas = []
    cache: dict[str, dict[str, float]] = {}
    for r in train:
        if _part_class(r.moved_part_id) != part_class:
            continue
        if r.mesh_path not in cache:
            if r.mesh_path not in meshes:
                raise MissingMeshError(r.mesh_path)
            cache[r.mesh_path] = part_areas(meshes[r.mesh_path])
        areas.append(cache[r.mesh_path][r.moved_part_id])

    return TrainStats(
        records=train,
        motion_type=MotionType(motion_type),
        axis=tuple(float(v) for v in axis),
        origin=tuple(float(v) for v in origin),
        magnitude=magnitude,
        magnitude_by_type=by_type,
        part_class=str(part_class),
        mean_area=float(np.mean(areas)),
    )


def closest_area_part(mesh: Mesh, target_area: float) -> str:
    """Part whose area is nearest ``target_area``; exact ties pick the smallest id."""
    _check_parts(mesh)
    areas = part_areas(mesh)
    return min(sorted(areas), key=lambda pid: abs(areas[pid] - target_area))


def freqmot_predict(stats: TrainStats, eval_record: AnnotationRecord, mesh: Mesh, seed: int) -> PredictionRecord:
    rng = make_rng(scene_seed(seed, eval_record.scene_id))
    part = closest_area_part(mesh, stats.mean_area)
    return PredictionRecord(
        scene_id=eval_record.scene_id,
        pose=encode_pose(sample_pose(rng)),
        motion_type_scores=_type_scores(stats.motion_type),
        axis=stats.axis,
        origin=stats.origin,
        magnitude=stats.magnitude,
        point_moveable_prob=_one_part(mesh, part),
    )

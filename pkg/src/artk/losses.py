"""Training objective terms as pure scoring functions.

Reductions are means (over vector components and over segmentation
points); the weighted total uses pose 2, motion class 1, motion
regression 8, segmentation 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    EULER_NAMES,
    MOTION_CLASSES,
    AnnotationRecord,
    ArtkError,
    LengthMismatchError,
    MotionParameters,
    MotionType,
    PoseBinned,
    PredictionRecord,
    SceneMismatchError,
)
from .pose import encode_pose

HUBER_DELTA = 1.0
PROB_EPS = 1e-12
WEIGHTS = {"pose": 2.0, "motion_class": 1.0, "motion_reg": 8.0, "segmentation": 1.0}


class LabelOutOfRangeError(ArtkError, ValueError):
    pass


class MissingLogitsError(ArtkError, ValueError):
    pass


@dataclass(frozen=True)
class LossBreakdown:
    pose: float
    motion_class: float
    motion_reg: float
    segmentation: float
    total: float

    @classmethod
    def from_components(
        cls, pose: float, motion_class: float, motion_reg: float, segmentation: float
    ) -> "LossBreakdown":
        total = (
            WEIGHTS["pose"] * pose
            + WEIGHTS["motion_class"] * motion_class
            + WEIGHTS["motion_reg"] * motion_reg
            + WEIGHTS["segmentation"] * segmentation
        )
        return cls(float(pose), float(motion_class), float(motion_reg), float(segmentation), float(total))


def huber(pred, gt, delta: float = HUBER_DELTA) -> float:
    p = np.atleast_1d(np.asarray(pred, dtype=np.float64))
    g = np.atleast_1d(np.asarray(gt, dtype=np.float64))
    if p.shape != g.shape:
        raise LengthMismatchError(f"huber: shapes {p.shape} and {g.shape} differ")
    d = np.abs(p - g)
    per = np.where(d <= delta, 0.5 * d * d, delta * (d - 0.5 * delta))
    return float(per.mean())


def cross_entropy(logits, label: int) -> float:
    """``-log softmax(logits)[label]`` with max subtraction."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if not 0 <= label < len(z):
        raise LabelOutOfRangeError(f"label {label} outside [0, {len(z)})")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    shifted = z - z.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def pose_loss(
    pred_logits: Mapping[str, Sequence[float]],
    pred_offsets: Sequence[float],
    gt: PoseBinned,
) -> float:
    """Sum over azimuth/elevation/in-plane of CE(bin) + Huber(offset)."""
    total = 0.0
    for j, name in enumerate(EULER_NAMES):
        total += cross_entropy(pred_logits[name], gt.bins[j])
        total += huber(pred_offsets[j], gt.offsets[j])
    return total


def motion_class_loss(pred_scores: Sequence[float], gt_type: MotionType) -> float:
    return cross_entropy(pred_scores, MOTION_CLASSES.index(MotionType(gt_type)))


def motion_reg_loss(
    pred_scores: Sequence[float],
    pred_axis: Sequence[float],
    pred_origin: Sequence[float],
    pred_magnitude: float,
    gt: MotionParameters,
) -> float:
    """Axis + magnitude Huber, plus origin Huber when the *predicted* class is revolute."""
    loss = huber(pred_axis, gt.axis) + huber(pred_magnitude, gt.magnitude)
    if MOTION_CLASSES[int(np.argmax(pred_scores))] is MotionType.REVOLUTE:
        loss += huber(pred_origin, gt.origin)
    return loss


def segmentation_loss(pred_probs, gt_mask) -> float:
    """Mean binary cross-entropy over points.

    ``pred_probs`` holds moveable probabilities, or (M, 2) logits ordered
    (static, moveable).
    """
    p = np.asarray(pred_probs, dtype=np.float64)
    y = np.asarray(gt_mask, dtype=bool).reshape(-1)
    if p.ndim == 2:
        if p.shape != (len(y), 2):
            raise LengthMismatchError(f"expected logits of shape ({len(y)}, 2), got {p.shape}")
        shifted = p - p.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(shifted).sum(axis=1))
        return float(np.mean(logsum - shifted[np.arange(len(y)), y.astype(int)]))
    p = p.reshape(-1)
    if len(p) != len(y):
        raise LengthMismatchError(f"{len(p)} probabilities for {len(y)} points")
    if len(p) == 0:
        raise LengthMismatchError("segmentation loss needs at least one point")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(np.mean(np.where(y, -np.log(p), -np.log1p(-p))))


def _point_probs(pred: PredictionRecord, n: int, point_part_ids) -> np.ndarray:
    probs = pred.point_moveable_prob
    if isinstance(probs, Mapping):
        if point_part_ids is None:
            raise ValueError("per-part probabilities need point_part_ids to expand")
        return np.array([probs.get(pid, 0.0) for pid in point_part_ids], dtype=np.float64)
    arr = np.asarray(probs, dtype=np.float64)
    if len(arr) != n:
        raise LengthMismatchError(f"{len(arr)} point probabilities for {n} points")
    return arr


def total_loss(
    pred: PredictionRecord,
    gt: AnnotationRecord,
    gt_mask,
    point_part_ids=None,
) -> LossBreakdown:
    """Weighted objective for one scene.

    ``gt_mask`` flags the moved part on the scored points; ``point_part_ids``
    is only needed when the prediction gives per-part probabilities.
    """
    if pred.scene_id != gt.scene_id:
        raise SceneMismatchError(
            f"prediction {pred.scene_id!r} scored against {gt.scene_id!r}", [gt.scene_id]
        )
    if pred.pose_logits is None:
        raise MissingLogitsError(f"scene {pred.scene_id!r}: pose loss needs pose_logits")
    gt_mask = np.asarray(gt_mask, dtype=bool)
    lp = pose_loss(pred.pose_logits, pred.pose.offsets, encode_pose(gt.pose))
    lmc = motion_class_loss(pred.motion_type_scores, gt.motion.motion_type)
    lm = motion_reg_loss(pred.motion_type_scores, pred.axis, pred.origin, pred.magnitude, gt.motion)
    ls = segmentation_loss(_point_probs(pred, len(gt_mask), point_part_ids), gt_mask)
    return LossBreakdown.from_components(lp, lmc, lm, ls)

"""Bin/offset pose encoding and geodesic rotation error.

Bin layout: azimuth and in-plane use 24 bins of 15 degrees starting at -180;
elevation uses 12 bins of 15 degrees starting at -90. Offsets are the
fractional position inside the bin.
"""
from __future__ import annotations

import math

import numpy as np

from .articulation import euler_to_rotation
from .core import BIN_COUNTS, ArtkError, OutOfRangeBinError, PoseBinned, PoseSpec

BIN_WIDTH_DEG = 15.0
BIN_STARTS_DEG = (-180.0, -90.0, -180.0)
ROTATION_TOL = 1e-6
_MAX_ULP_STEPS = 256

__all__ = [
    "BIN_WIDTH_DEG",
    "BIN_STARTS_DEG",
    "NotARotationError",
    "OutOfRangeBinError",
    "encode_pose",
    "decode_pose",
    "geodesic_deg",
    "pose_error_deg",
]


class NotARotationError(ArtkError, ValueError):
    pass


def _bin_angle(start: float, b: int, offset: float) -> float:
    # bin starts are exact multiples of 15, so only the final add rounds
    return (start + BIN_WIDTH_DEG * b) + BIN_WIDTH_DEG * offset


def encode_angle(angle: float, start: float, count: int) -> tuple[int, float]:
    b = min(max(int(math.floor((angle - start) / BIN_WIDTH_DEG)), 0), count - 1)
    # bin edges are exact, so fix any off-by-one from the rounded division
    while b > 0 and start + BIN_WIDTH_DEG * b > angle:
        b -= 1
    while b + 1 < count and start + BIN_WIDTH_DEG * (b + 1) <= angle:
        b += 1
    o = (angle - (start + BIN_WIDTH_DEG * b)) / BIN_WIDTH_DEG
    # an offset of 1.0 is only kept in the last bin (elevation +90)
    last = b == count - 1
    if o >= 1.0 and not last:
        return b + 1, 0.0
    # then walk the offset until decoding reproduces the angle bit-for-bit
    for _ in range(_MAX_ULP_STEPS):
        got = _bin_angle(start, b, o)
        if got == angle:
            break
        o_next = math.nextafter(o, math.inf if got < angle else -math.inf)
        if o_next < 0.0 or o_next > 1.0 or (o_next == 1.0 and not last):
            break
        o = o_next
    return b, o


def encode_pose(pose: PoseSpec) -> PoseBinned:
    bins, offsets = [], []
    for angle, start, count in zip(pose.as_tuple(), BIN_STARTS_DEG, BIN_COUNTS):
        b, o = encode_angle(angle, start, count)
        bins.append(b)
        offsets.append(o)
    return PoseBinned(tuple(bins), tuple(offsets))


def decode_pose(binned: PoseBinned) -> PoseSpec:
    angles = []
    for b, o, start, count in zip(binned.bins, binned.offsets, BIN_STARTS_DEG, BIN_COUNTS):
        if not 0 <= b < count:
            raise OutOfRangeBinError(f"bin {b} outside [0, {count})")
        angles.append(_bin_angle(start, b, o))
    az, el, ip = angles
    # an offset of exactly 1.0 in the last azimuth/in-plane bin lands on +180
    return PoseSpec.from_degrees(az, min(el, 90.0), ip)


def _check_rotation(r: np.ndarray, name: str) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise NotARotationError(f"{name} has shape {r.shape}, expected (3, 3)")
    if np.abs(r.T @ r - np.eye(3)).max() > ROTATION_TOL or abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
        raise NotARotationError(f"{name} is not a proper rotation")
    return r


def geodesic_deg(r1, r2) -> float:
    """Angle of the relative rotation R1^T R2, in degrees within [0, 180].

    Evaluated as atan2(sin, cos) of the relative rotation, which equals
    arccos((trace - 1) / 2) but keeps full precision near 0 and 180.
    """
    rel = _check_rotation(r1, "R1").T @ _check_rotation(r2, "R2")
    cos_t = (np.trace(rel) - 1.0) / 2.0
    skew = np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
    sin_t = np.linalg.norm(skew) / 2.0
    return float(min(max(math.degrees(math.atan2(sin_t, cos_t)), 0.0), 180.0))


def pose_error_deg(a: PoseSpec | PoseBinned, b: PoseSpec | PoseBinned) -> float:
    if isinstance(a, PoseBinned):
        a = decode_pose(a)
    if isinstance(b, PoseBinned):
        b = decode_pose(b)
    return geodesic_deg(euler_to_rotation(a), euler_to_rotation(b))

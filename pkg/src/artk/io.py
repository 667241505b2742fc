"""OBJ meshes and JSON-lines records on disk.

OBJ subset: ``v x y z``, triangular ``f a b c`` (1-based; negative indices
and ``a/b/c`` corner syntax are accepted), and ``g name`` to start a part.
Faces that appear before any ``g`` line belong to a part called ``mesh``.
Other statements (``vn``, ``vt``, ``o``, ``usemtl``...) are ignored.
"""
from __future__ import annotations

import json
import os
import warnings
from pathlib import Path
from typing import Iterable, Type, TypeVar, Union

import numpy as np

from .core import AnnotationRecord, ArtkError, Mesh, MotionParameters, PartGroup, PredictionRecord

PathLike = Union[str, os.PathLike]
R = TypeVar("R", AnnotationRecord, PredictionRecord)

DEFAULT_PART = "mesh"

__all__ = [
    "ObjParseError",
    "RecordParseError",
    "parse_obj",
    "format_obj",
    "read_obj",
    "write_obj",
    "read_records",
    "write_records",
    "read_motion",
    "write_json",
]


class ObjParseError(ArtkError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class RecordParseError(ArtkError, ValueError):
    pass


# ---------------------------------------------------------------------------
# OBJ


def _vertex_index(token: str, n_vertices: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        i = int(head)
    except ValueError:
        raise ObjParseError(f"bad face index {token!r}", lineno) from None
    if i == 0:
        raise ObjParseError("face index 0 (OBJ indices are 1-based)", lineno)
    idx = i - 1 if i > 0 else n_vertices + i
    if not 0 <= idx < n_vertices:
        raise ObjParseError(f"face index {i} refers to a missing vertex", lineno)
    return idx


def parse_obj(text: str) -> Mesh:
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    groups: dict[str, list[int]] = {}
    current = DEFAULT_PART
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise ObjParseError("vertex needs 3 coordinates", lineno)
            try:
                vertices.append((float(rest[0]), float(rest[1]), float(rest[2])))
            except ValueError:
                raise ObjParseError(f"bad vertex {line!r}", lineno) from None
        elif tag == "f":
            if len(rest) != 3:
                raise ObjParseError(
                    f"only triangles are supported, got a face with {len(rest)} vertices", lineno
                )
            faces.append(tuple(_vertex_index(t, len(vertices), lineno) for t in rest))
            groups.setdefault(current, []).append(len(faces) - 1)
        elif tag == "g":
            if not rest:
                raise ObjParseError("group statement needs a name", lineno)
            current = " ".join(rest)
    if not vertices:
        raise ObjParseError("no vertices")
    if not faces:
        raise ObjParseError("no faces")
    parts = tuple(PartGroup(pid, tuple(idx)) for pid, idx in groups.items())
    return Mesh(np.array(vertices, dtype=np.float64), np.array(faces, dtype=np.int64), parts)


def format_obj(mesh: Mesh) -> str:
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices.tolist()]
    for part in mesh.parts:
        lines.append(f"g {part.part_id}")
        for i in part.face_indices:
            a, b, c = mesh.faces[i]
            lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return "\n".join(lines) + "\n"


def read_obj(path: PathLike) -> Mesh:
    return parse_obj(Path(path).read_text(encoding="utf-8"))


def write_obj(path: PathLike, mesh: Mesh) -> None:
    Path(path).write_text(format_obj(mesh), encoding="utf-8")


# ---------------------------------------------------------------------------
# JSON lines


def read_records(path: PathLike, cls: Type[R]) -> list[R]:
    """Parse one record per non-blank line; unknown fields land in ``extras``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(cls.from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise RecordParseError(f"{path}:{lineno}: {exc!r}") from exc
    return out


def write_records(path: PathLike, records: Iterable[AnnotationRecord | PredictionRecord]) -> None:
    dropped: set[str] = set()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            dropped.update(r.extras)
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    if dropped:
        warnings.warn(f"dropped unknown fields on write: {sorted(dropped)}", stacklevel=2)


def read_motion(path: PathLike) -> MotionParameters:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    # accept a bare motion object or anything carrying a "motion" entry
    if isinstance(d, dict) and "motion" in d and isinstance(d["motion"], dict):
        d = d["motion"]
    try:
        return MotionParameters.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise RecordParseError(f"{path}: not a motion description ({exc!r})") from exc


def write_json(path: PathLike, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

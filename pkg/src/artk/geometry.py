"""Mesh and point-cloud kernels: areas, sampling, normalization, NN search,
connected components."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TypeVar

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components
from scipy.spatial import cKDTree

from .core import ArtkError, Mesh, PartGroup, PointCloud, make_rng

DEFAULT_WELD_EPS = 1e-6
AREA_THRESHOLD = 0.05


class ZeroAreaMeshError(ArtkError, ValueError):
    pass


class DegenerateExtentError(ArtkError, ValueError):
    pass


class EmptyCloudError(ArtkError, ValueError):
    pass


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def surface_area(mesh: Mesh, part_id: str | None = None) -> float:
    areas = triangle_areas(mesh.vertices, mesh.faces)
    if part_id is None:
        return float(areas.sum())
    idx = np.asarray(mesh.part(part_id).face_indices, dtype=np.int64)
    return float(areas[idx].sum())


def part_areas(mesh: Mesh) -> dict[str, float]:
    areas = triangle_areas(mesh.vertices, mesh.faces)
    return {
        p.part_id: float(areas[np.asarray(p.face_indices, dtype=np.int64)].sum())
        for p in mesh.parts
    }


def filter_small_parts(mesh: Mesh, threshold: float = AREA_THRESHOLD) -> list[str]:
    """Part ids whose share of the total surface area is at least ``threshold``."""
    per_part = part_areas(mesh)
    total = sum(per_part.values())
    if total <= 0.0:
        return []
    return [pid for pid, a in per_part.items() if a / total >= threshold]


def sample_pointcloud(mesh: Mesh, n: int, seed: int) -> PointCloud:
    """Area-weighted uniform surface sampling with per-point part labels.

    Triangles are picked by inverting the cumulative area table with one
    uniform draw per point; positions use the square-root barycentric map
    so that samples are uniform within each triangle.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = triangle_areas(mesh.vertices, mesh.faces)
    total = float(areas.sum())
    if not total > 0.0:
        raise ZeroAreaMeshError("mesh has zero surface area")
    rng = make_rng(seed)
    cdf = np.cumsum(areas)
    pick = rng.random(n) * cdf[-1]
    face_idx = np.searchsorted(cdf, pick, side="right")
    np.minimum(face_idx, len(areas) - 1, out=face_idx)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    tri = mesh.faces[face_idx]
    a = mesh.vertices[tri[:, 0]]
    b = mesh.vertices[tri[:, 1]]
    c = mesh.vertices[tri[:, 2]]
    pts = (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    labels = mesh.face_part_ids()[face_idx]
    return PointCloud(pts, labels)


G = TypeVar("G", Mesh, PointCloud, np.ndarray)


def _points_of(geom) -> np.ndarray:
    if isinstance(geom, Mesh):
        return geom.vertices
    if isinstance(geom, PointCloud):
        return geom.points
    return np.asarray(geom, dtype=np.float64).reshape(-1, 3)


def _with_points(geom: G, pts: np.ndarray) -> G:
    if isinstance(geom, Mesh):
        return geom.with_vertices(pts)
    if isinstance(geom, PointCloud):
        return PointCloud(pts, geom.part_ids)
    return pts


def normalize_to_unit_box(geom: G) -> tuple[G, float, np.ndarray]:
    """Center the bounding box at the origin and scale its longest side to 1.

    Returns ``(normalized, scale, translation)`` with
    ``normalized = (p + translation) * scale``.
    """
    pts = _points_of(geom)
    if len(pts) == 0:
        raise DegenerateExtentError("no points to normalize")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float((hi - lo).max())
    if not extent > 0.0:
        raise DegenerateExtentError("bounding box has zero extent")
    translation = -(lo + hi) / 2.0
    scale = 1.0 / extent
    return _with_points(geom, (pts + translation) * scale), scale, translation


def denormalize(geom: G, scale: float, translation: np.ndarray) -> G:
    """Invert :func:`normalize_to_unit_box`."""
    pts = _points_of(geom)
    return _with_points(geom, pts / scale - np.asarray(translation))


class NearestNeighborIndex:
    """Exact nearest-neighbour queries over a fixed point set (kd-tree)."""

    def __init__(self, points):
        pts = _points_of(points)
        if len(pts) == 0:
            raise EmptyCloudError("cannot index an empty point cloud")
        self.points = pts
        self._tree = cKDTree(pts)

    def __len__(self) -> int:
        return len(self.points)

    def query(self, point) -> tuple[int, float]:
        dist, idx = self._tree.query(np.asarray(point, dtype=np.float64).reshape(3), k=1)
        return int(idx), float(dist)

    def query_many(self, points, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        pts = _points_of(points)
        if len(pts) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        dist, idx = self._tree.query(pts, k=1, workers=workers)
        return idx.astype(np.int64), dist


def build_nn_index(cloud) -> NearestNeighborIndex:
    return NearestNeighborIndex(cloud)


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    face_component: np.ndarray
    count: int

    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.face_component == k) for k in range(self.count)]


def weld_pairs(vertices: np.ndarray, weld_eps: float) -> np.ndarray:
    """Vertex index pairs (i < j) strictly closer than ``weld_eps``."""
    if weld_eps <= 0.0 or len(vertices) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    tree = cKDTree(vertices)
    pairs = tree.query_pairs(weld_eps, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    d = np.linalg.norm(vertices[pairs[:, 0]] - vertices[pairs[:, 1]], axis=1)
    return pairs[d < weld_eps].astype(np.int64)


def connected_components(
    mesh: Mesh, weld_eps: float = DEFAULT_WELD_EPS
) -> tuple[ComponentLabeling, Mesh]:
    """Label faces connected through shared or welded vertices.

    Component ids are numbered in order of each component's first face, and
    the returned mesh carries one ``cc_<k>`` part group per component.
    """
    if weld_eps < 0:
        raise ValueError("weld_eps must be >= 0")
    nv = len(mesh.vertices)
    faces = mesh.faces
    edges = [faces[:, [0, 1]], faces[:, [1, 2]], weld_pairs(mesh.vertices, weld_eps)]
    e = np.concatenate(edges, axis=0)
    graph = coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(nv, nv))
    _, vlabel = _csgraph_components(graph, directed=False)
    raw = vlabel[faces[:, 0]]
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    face_component = order[inverse].astype(np.int64)
    count = int(len(first))
    labeling = ComponentLabeling(face_component, count)
    parts = tuple(
        PartGroup(f"cc_{k}", tuple(int(i) for i in idx))
        for k, idx in enumerate(labeling.groups())
    )
    return labeling, Mesh(mesh.vertices, mesh.faces, parts)


def merge_meshes(named: Iterable[tuple[str, np.ndarray, np.ndarray]]) -> Mesh:
    """Concatenate ``(part_id, vertices, faces)`` pieces into one mesh, one part each."""
    verts, faces, parts = [], [], []
    v_off = f_off = 0
    for part_id, v, f in named:
        v = np.asarray(v, dtype=np.float64)
        f = np.asarray(f, dtype=np.int64)
        verts.append(v)
        faces.append(f + v_off)
        parts.append(PartGroup(part_id, tuple(range(f_off, f_off + len(f)))))
        v_off += len(v)
        f_off += len(f)
    return Mesh(np.concatenate(verts), np.concatenate(faces), tuple(parts))

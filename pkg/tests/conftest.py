from __future__ import annotations

import numpy as np
import pytest

from artk.core import Mesh, PartGroup
from artk.datagen import box
from artk.geometry import merge_meshes

ACCEPTANCE_LINES: list[str] = []


def unit_cube(part_id: str = "body") -> Mesh:
    v, f = box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    return Mesh(v, f, (PartGroup(part_id, tuple(range(len(f)))),))


def boxes(*named) -> Mesh:
    """Mesh with one closed box per ``(part_id, lo, hi)``."""
    return merge_meshes([(pid, *box(lo, hi)) for pid, lo, hi in named])


def square(part_id: str, x0: float, side: float = 1.0):
    """A flat square in the z=0 plane made of two triangles."""
    v = np.array([[x0, 0, 0], [x0 + side, 0, 0], [x0 + side, side, 0], [x0, side, 0]], float)
    f = np.array([[0, 1, 2], [0, 2, 3]])
    return part_id, v, f


def random_soup(rng, n_tris: int, spread: float = 3.0) -> Mesh:
    """Triangles with some shared vertices and some near-duplicates."""
    verts = list(rng.random((n_tris, 3)) * spread)
    faces = []
    for _ in range(n_tris):
        if len(verts) > 3 and rng.random() < 0.5:
            a = int(rng.integers(len(verts)))
        else:
            verts.append(rng.random(3) * spread)
            a = len(verts) - 1
        b = len(verts)
        verts.append(verts[a] + rng.normal(scale=0.05, size=3))
        if rng.random() < 0.3:
            # near-duplicate of an existing vertex, to be welded
            verts.append(verts[int(rng.integers(len(verts)))] + rng.normal(scale=1e-8, size=3))
        else:
            verts.append(verts[a] + rng.normal(scale=0.05, size=3))
        faces.append([a, b, len(verts) - 1])
    v = np.array(verts)
    return Mesh(v, faces, (PartGroup("soup", tuple(range(len(faces)))),))


@pytest.fixture
def cube() -> Mesh:
    return unit_cube()


@pytest.fixture
def cabinet() -> Mesh:
    return boxes(
        ("body", (-0.5, -0.5, -0.4), (0.5, 0.5, 0.5)),
        ("drawer_0", (-0.45, 0.0, -0.5), (0.45, 0.45, 0.3)),
        ("door_0", (-0.45, -0.45, -0.5), (0.45, -0.05, -0.45)),
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import math

import numpy as np
import pytest

from surf_rd.assembly import assemble_operators
from surf_rd.mesh import SurfaceMesh, generate_icosphere


def oriented_outward(vertices, triangles):
    """Flip triangles whose normal points toward the centroid."""
    vertices = np.asarray(vertices, dtype=float)
    centroid = vertices.mean(axis=0)
    out = []
    for tri in triangles:
        a, b, c = (vertices[i] for i in tri)
        normal = np.cross(b - a, c - a)
        if normal @ ((a + b + c) / 3.0 - centroid) < 0:
            tri = (tri[0], tri[2], tri[1])
        out.append(tri)
    return np.array(out)


def violating_tetrahedron() -> SurfaceMesh:
    """Edge AB (vertices 0, 1) sees two opposite angles of 100 degrees each."""
    d = 1.0 / math.tan(math.radians(50.0))
    c30, s30 = math.cos(math.radians(30.0)), math.sin(math.radians(30.0))
    vertices = np.array([
        [-1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, d * c30, d * s30],
        [0.0, d * c30, -d * s30],
    ])
    triangles = [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)]
    return SurfaceMesh(vertices, oriented_outward(vertices, triangles))


def regular_tetrahedron() -> SurfaceMesh:
    vertices = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3.0)
    triangles = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    return SurfaceMesh(vertices, oriented_outward(vertices, triangles))


@pytest.fixture(scope="session")
def icosphere():
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = generate_icosphere(level)
        return cache[level]

    return get


@pytest.fixture(scope="session")
def operators(icosphere):
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = assemble_operators(icosphere(level))
        return cache[level]

    return get


@pytest.fixture
def bad_mesh():
    return violating_tetrahedron()


@pytest.fixture
def tetrahedron():
    return regular_tetrahedron()

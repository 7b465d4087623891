"""
surf_rd.mesh - closed triangulated surfaces.

A SurfaceMesh holds the vertex coordinates (one Vertex per row of an
(N, 3) float array) and counterclockwise-oriented triangles (one Triangle
per row of an (F, 3) int array). Meshes are immutable once built.

Generators:
  generate_icosphere(level)            subdivided icosahedron on the unit sphere
  generate_fibonacci_delaunay(n)       Fibonacci lattice + convex hull

Checks:
  validate(mesh)                       closedness, orientation, connectivity, areas
  check_angle_condition(mesh)          opposite-angle sums per edge (Delaunay)

I/O: read_off / write_off (ASCII OFF, 0-based indices).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, cKDTree

from .errors import MeshError

logger = logging.getLogger(__name__)

MAX_ICOSPHERE_LEVEL = 8
MIN_TRIANGLE_AREA = 1e-14
ANGLE_TOLERANCE = 1e-12

PathLike = Union[str, Path]
Edge = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64)
        triangles = np.array(self.triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must have shape (N, 3), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"triangles must have shape (F, 3), got {triangles.shape}")
        bad = np.flatnonzero(~np.isfinite(vertices).all(axis=1))
        if bad.size:
            raise MeshError("non-finite vertex coordinates", bad)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            rows = np.flatnonzero(((triangles < 0) | (triangles >= len(vertices))).any(axis=1))
            raise MeshError("triangle references a vertex out of range", rows)
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def corners(self) -> np.ndarray:
        """(F, 3, 3) array: the three corner positions of every triangle."""
        return self.vertices[self.triangles]

    @cached_property
    def areas(self) -> np.ndarray:
        R = self.corners
        cross = np.cross(R[:, 1] - R[:, 0], R[:, 2] - R[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    @cached_property
    def half_edges(self) -> np.ndarray:
        """(3F, 2) directed edges (a->b, b->c, c->a), triangle-major order."""
        t = self.triangles
        return np.stack([t, np.roll(t, -1, axis=1)], axis=2).reshape(-1, 2)

    @cached_property
    def _edge_index(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys = np.sort(self.half_edges, axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        return self._edge_index[0]

    @cached_property
    def edge_map(self) -> Dict[Edge, Tuple[int, ...]]:
        """Unordered vertex pair -> incident triangle indices."""
        edges, inverse, _ = self._edge_index
        owners: Dict[Edge, List[int]] = {}
        for half, edge_id in enumerate(inverse):
            key = (int(edges[edge_id, 0]), int(edges[edge_id, 1]))
            owners.setdefault(key, []).append(half // 3)
        return {k: tuple(v) for k, v in owners.items()}

    def scaled(self, factor: float) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices * float(factor), self.triangles)


def _orient_outward(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    # valid for surfaces star-shaped about the origin (all generated spheres)
    R = vertices[triangles]
    normals = np.cross(R[:, 1] - R[:, 0], R[:, 2] - R[:, 0])
    flip = np.einsum("ij,ij->i", normals, R.mean(axis=1)) < 0
    out = triangles.copy()
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    vertices = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    triangles = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    return vertices, triangles


def _subdivide(vertices: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = len(vertices)
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    pairs = np.concatenate([np.stack([a, b], 1), np.stack([b, c], 1), np.stack([c, a], 1)])
    edges, inverse = np.unique(np.sort(pairs, axis=1), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    midpoints /= np.linalg.norm(midpoints, axis=1, keepdims=True)
    f = len(triangles)
    ab, bc, ca = (n + inverse[:f], n + inverse[f:2 * f], n + inverse[2 * f:])
    new_triangles = np.concatenate([
        np.stack([a, ab, ca], 1),
        np.stack([b, bc, ab], 1),
        np.stack([c, ca, bc], 1),
        np.stack([ab, bc, ca], 1),
    ])
    return np.vstack([vertices, midpoints]), new_triangles


def generate_icosphere(level: int) -> SurfaceMesh:
    """Icosahedron subdivided `level` times, vertices projected onto the unit sphere.

    V = 10*4**level + 2 and F = 20*4**level.
    """
    if not isinstance(level, (int, np.integer)) or level < 0 or level > MAX_ICOSPHERE_LEVEL:
        raise MeshError(f"icosphere level must be an integer in [0, {MAX_ICOSPHERE_LEVEL}], got {level!r}")
    vertices, triangles = _icosahedron()
    for _ in range(int(level)):
        vertices, triangles = _subdivide(vertices, triangles)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    triangles = _orient_outward(vertices, triangles)
    logger.info("icosphere level %d: N=%d F=%d", level, len(vertices), len(triangles))
    return SurfaceMesh(vertices, triangles)


def fibonacci_points(n_points: int) -> np.ndarray:
    i = np.arange(n_points, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n_points
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    points = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def triangulate_sphere_points(points: np.ndarray) -> SurfaceMesh:
    """Spherical Delaunay triangulation of points on the unit sphere via their convex hull."""
    points = np.asarray(points, dtype=np.float64)
    pairs = cKDTree(points).query_pairs(r=1e-10, output_type="ndarray")
    if len(pairs):
        raise MeshError("coincident points cannot be triangulated", np.unique(pairs))
    hull = ConvexHull(points)
    missing = np.setdiff1d(np.arange(len(points)), hull.vertices)
    if missing.size:
        raise MeshError("points do not lie on the convex hull", missing)
    triangles = _orient_outward(points, np.asarray(hull.simplices, dtype=np.int64))
    return SurfaceMesh(points, triangles)


def generate_fibonacci_delaunay(n_points: int) -> SurfaceMesh:
    if n_points < 12:
        raise MeshError(f"fibonacci mesh needs at least 12 points, got {n_points}")
    mesh = triangulate_sphere_points(fibonacci_points(int(n_points)))
    logger.info("fibonacci mesh: N=%d F=%d", mesh.n_vertices, mesh.n_triangles)
    return mesh


def mesh_size(mesh: SurfaceMesh) -> float:
    """Maximum triangle diameter, i.e. the longest edge."""
    e = mesh.half_edges
    return float(np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1).max())


def surface_area(mesh: SurfaceMesh) -> float:
    return float(mesh.areas.sum())


@dataclass
class ValidationReport:
    closed: bool = True
    oriented: bool = True
    connected: bool = True
    nondegenerate: bool = True
    open_edges: List[Edge] = field(default_factory=list)
    overused_edges: List[Edge] = field(default_factory=list)
    misoriented_edges: List[Edge] = field(default_factory=list)
    degenerate_triangles: List[int] = field(default_factory=list)
    n_components: int = 1
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate(mesh: SurfaceMesh) -> ValidationReport:
    report = ValidationReport()
    tri = mesh.triangles

    repeated = (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
    degenerate = np.flatnonzero(repeated | (mesh.areas < MIN_TRIANGLE_AREA))
    if degenerate.size:
        report.nondegenerate = False
        report.degenerate_triangles = degenerate.tolist()
        report.failures.append(f"{degenerate.size} degenerate triangle(s) (area < {MIN_TRIANGLE_AREA:g})")

    edges, inverse, counts = mesh._edge_index
    as_pairs = [tuple(map(int, e)) for e in edges]
    report.open_edges = [as_pairs[i] for i in np.flatnonzero(counts == 1)]
    report.overused_edges = [as_pairs[i] for i in np.flatnonzero(counts > 2)]
    if report.open_edges or report.overused_edges:
        report.closed = False
        report.failures.append(
            f"not closed: {len(report.open_edges)} boundary edge(s), "
            f"{len(report.overused_edges)} edge(s) with more than two triangles"
        )

    # a shared edge is consistently oriented iff its two half-edges point opposite ways
    forward = mesh.half_edges[:, 0] < mesh.half_edges[:, 1]
    n_forward = np.bincount(inverse, weights=forward, minlength=len(edges))
    bad = np.flatnonzero((counts == 2) & (n_forward != 1))
    if bad.size:
        report.oriented = False
        report.misoriented_edges = [as_pairs[i] for i in bad]
        report.failures.append(f"inconsistent orientation on {bad.size} edge(s)")

    n = mesh.n_vertices
    if n:
        adjacency = coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)
        ) if len(edges) else coo_matrix((n, n))
        report.n_components, _ = connected_components(adjacency, directed=False)
        if report.n_components != 1:
            report.connected = False
            report.failures.append(f"{report.n_components} connected components")
    else:
        report.failures.append("mesh has no vertices")

    for failure in report.failures:
        logger.debug("validate: %s", failure)
    return report


@dataclass
class DelaunayReport:
    violations: List[Tuple[Edge, float]]
    worst_sum: float

    @property
    def passed(self) -> bool:
        return not self.violations


def corner_angles(mesh: SurfaceMesh) -> np.ndarray:
    """(F, 3) interior angles; column k is the angle at corner k, measured in the triangle's plane."""
    R = mesh.corners
    angles = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        u = R[:, (k + 1) % 3] - R[:, k]
        v = R[:, (k + 2) % 3] - R[:, k]
        angles[:, k] = np.arctan2(np.linalg.norm(np.cross(u, v), axis=1), np.einsum("ij,ij->i", u, v))
    return angles


def check_angle_condition(mesh: SurfaceMesh) -> DelaunayReport:
    """For every edge, the sum of the two angles opposite it must not exceed pi."""
    edges, inverse, counts = mesh._edge_index
    # half-edge k of a triangle runs corner k -> corner k+1; the opposite corner is k+2
    opposite = corner_angles(mesh)[:, [2, 0, 1]].reshape(-1)
    sums = np.bincount(inverse, weights=opposite, minlength=len(edges))
    sums[counts != 2] = np.nan
    interior = np.flatnonzero(counts == 2)
    worst = float(sums[interior].max()) if interior.size else 0.0
    bad = interior[sums[interior] > math.pi + ANGLE_TOLERANCE]
    violations = [((int(edges[i, 0]), int(edges[i, 1])), float(sums[i])) for i in bad]
    if violations:
        logger.warning("angle condition violated on %d edge(s), worst sum %.6f rad", len(violations), worst)
    return DelaunayReport(violations=violations, worst_sum=worst)


def mesh_statistics(mesh: SurfaceMesh) -> dict:
    angle = check_angle_condition(mesh)
    return {
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
        "h": mesh_size(mesh),
        "min_area": float(mesh.areas.min()),
        "max_area": float(mesh.areas.max()),
        "surface_area": surface_area(mesh),
        "angle_condition": angle.passed,
        "worst_angle_sum": angle.worst_sum,
        "angle_violations": len(angle.violations),
    }


def write_off(mesh: SurfaceMesh, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")


def read_off(path: PathLike) -> SurfaceMesh:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [
            (number, line.split("#", 1)[0].split())
            for number, line in enumerate(fh, start=1)
        ]
    lines = [(number, tokens) for number, tokens in lines if tokens]
    if not lines or lines[0][1] != ["OFF"]:
        raise MeshError(f"{path}: line {lines[0][0] if lines else 1}: expected 'OFF' header")
    try:
        number, counts = lines[1]
        n_vertices, n_faces = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise MeshError(f"{path}: line {lines[1][0] if len(lines) > 1 else 2}: expected 'V F 0' counts")
    body = lines[2:]
    if len(body) < n_vertices + n_faces:
        raise MeshError(f"{path}: expected {n_vertices} vertices and {n_faces} faces, file is truncated")
    vertices = np.empty((n_vertices, 3))
    triangles = np.empty((n_faces, 3), dtype=np.int64)
    for row, (number, tokens) in enumerate(body[:n_vertices]):
        try:
            vertices[row] = [float(t) for t in tokens[:3]]
        except ValueError:
            raise MeshError(f"{path}: line {number}: bad vertex line")
    for row, (number, tokens) in enumerate(body[n_vertices:n_vertices + n_faces]):
        if tokens[0] != "3" or len(tokens) < 4:
            raise MeshError(f"{path}: line {number}: only triangular faces are supported")
        try:
            triangles[row] = [int(t) for t in tokens[1:4]]
        except ValueError:
            raise MeshError(f"{path}: line {number}: bad face line")
    return SurfaceMesh(vertices, triangles)

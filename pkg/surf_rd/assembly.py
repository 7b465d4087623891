"""
surf_rd.assembly - P1 surface finite element operators.

Every triangle is flat, so the hat functions have constant in-plane
gradients. From them:

  stiffness        a_ij = sum_K area_K * grad(chi_i) . grad(chi_j)
  lumped mass      m_ii = (1/3) * area of the triangles around vertex i
  consistent mass  local (area/12) * [[2,1,1],[1,2,1],[1,1,2]]

Global matrices are scatter-added in triangle-major order, so assembly is
bitwise reproducible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, FieldError, MeshError
from .mesh import MIN_TRIANGLE_AREA, SurfaceMesh, surface_area
from .sparse import CsrMatrix, DiagMatrix, Operator, as_csr, matvec, shifted

logger = logging.getLogger(__name__)

MASS_MODES = ("lumped", "consistent")

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True, eq=False)
class NodalField:
    """r components of N nodal values, stored component-major as an (r, N) array."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2:
            raise FieldError(f"nodal values must be (r, N), got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def n_components(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.values.shape[1])

    def component(self, k: int) -> np.ndarray:
        return self.values[k]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def copy(self) -> "NodalField":
        return NodalField(self.values.copy())


FieldLike = Union[NodalField, np.ndarray]


def field_values(U: FieldLike) -> np.ndarray:
    return U.values if isinstance(U, NodalField) else np.atleast_2d(np.asarray(U, dtype=np.float64))


def local_basis_gradients(p0, p1, p2) -> np.ndarray:
    """In-plane gradients of the three hat functions of one triangle, as a (3, 3) array."""
    corners = np.array([p0, p1, p2], dtype=np.float64)[None]
    return _basis_gradients(corners)[0]


def _basis_gradients(corners: np.ndarray) -> np.ndarray:
    # grad(chi_i) = n x e_i / |n|^2, e_i the edge opposite corner i, n = twice-area normal
    normal = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    norm2 = np.einsum("ij,ij->i", normal, normal)
    degenerate = np.flatnonzero(0.5 * np.sqrt(norm2) < MIN_TRIANGLE_AREA)
    if degenerate.size:
        raise MeshError("degenerate triangle(s) in gradient computation", degenerate)
    opposite = np.stack([
        corners[:, 2] - corners[:, 1],
        corners[:, 0] - corners[:, 2],
        corners[:, 1] - corners[:, 0],
    ], axis=1)
    return np.cross(normal[:, None, :], opposite) / norm2[:, None, None]


def _scatter(mesh: SurfaceMesh, local: np.ndarray) -> CsrMatrix:
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).reshape(-1)
    cols = np.tile(tri, (1, 3)).reshape(-1)
    n = mesh.n_vertices
    return as_csr(sp.coo_matrix((local.reshape(-1), (rows, cols)), shape=(n, n)))


def assemble_stiffness(mesh: SurfaceMesh) -> CsrMatrix:
    grads = _basis_gradients(mesh.corners)
    local = mesh.areas[:, None, None] * np.einsum("fid,fjd->fij", grads, grads)
    A = _scatter(mesh, local)
    logger.debug("stiffness: N=%d nnz=%d", A.shape[0], A.nnz)
    return A


def assemble_lumped_mass(mesh: SurfaceMesh) -> DiagMatrix:
    weights = np.repeat(mesh.areas / 3.0, 3)
    return DiagMatrix(np.bincount(mesh.triangles.reshape(-1), weights=weights, minlength=mesh.n_vertices))


def assemble_consistent_mass(mesh: SurfaceMesh) -> CsrMatrix:
    local = mesh.areas[:, None, None] * _LOCAL_MASS[None]
    return _scatter(mesh, local)


@dataclass(frozen=True, eq=False)
class FemOperators:
    stiffness: CsrMatrix
    lumped_mass: DiagMatrix
    consistent_mass: CsrMatrix
    total_area: float

    @property
    def n_nodes(self) -> int:
        return int(self.stiffness.shape[0])

    def mass(self, mode: str) -> Operator:
        if mode == "lumped":
            return self.lumped_mass
        if mode == "consistent":
            return self.consistent_mass
        raise ValueError(f"unknown mass mode {mode!r}, expected one of {MASS_MODES}")

    def apply_mass(self, mode: str, x: np.ndarray) -> np.ndarray:
        return matvec(self.mass(mode), x)

    def system_matrix(self, mode: str, s: float) -> CsrMatrix:
        """M + s*A for the mass of the given mode."""
        return shifted(self.stiffness, s, self.mass(mode))


def assemble_operators(mesh: SurfaceMesh) -> FemOperators:
    ops = FemOperators(
        stiffness=assemble_stiffness(mesh),
        lumped_mass=assemble_lumped_mass(mesh),
        consistent_mass=assemble_consistent_mass(mesh),
        total_area=surface_area(mesh),
    )
    logger.info("assembled operators: N=%d, area=%.6f", ops.n_nodes, ops.total_area)
    return ops


def interpolate(mesh: SurfaceMesh, g: Callable, t: Optional[float] = None) -> NodalField:
    """Nodal interpolant: g evaluated at every vertex.

    g receives the (N, 3) vertex array (and t when given) and returns an
    (N,) array for a scalar field or an (r, N) array for r components.
    """
    points = mesh.vertices
    sample = g(points) if t is None else g(points, t)
    values = np.array(sample, dtype=np.float64)
    if values.ndim == 0:
        values = np.full(mesh.n_vertices, float(values))
    values = np.atleast_2d(values)
    if values.shape[1] != mesh.n_vertices:
        raise DimensionMismatchError(f"interpolated field has {values.shape[1]} nodes, mesh has {mesh.n_vertices}")
    bad = np.flatnonzero(~np.isfinite(values).all(axis=0))
    if bad.size:
        raise FieldError(f"non-finite samples at {bad.size} vertices (first: {bad[0]})")
    return NodalField(values)


def _quadratic_form(M: Operator, U: FieldLike) -> float:
    values = field_values(U)
    if values.shape[1] != M.shape[0]:
        raise DimensionMismatchError(f"field has {values.shape[1]} nodes, operator is {M.shape}")
    return float(sum(xi @ matvec(M, xi) for xi in values))


def lumped_norm(lumped_mass: DiagMatrix, U: FieldLike) -> float:
    return float(np.sqrt(max(_quadratic_form(lumped_mass, U), 0.0)))


def l2_norm(consistent_mass: CsrMatrix, U: FieldLike) -> float:
    return float(np.sqrt(max(_quadratic_form(consistent_mass, U), 0.0)))


def norm_equivalence_ratio(ops: FemOperators, U: FieldLike) -> float:
    return lumped_norm(ops.lumped_mass, U) / l2_norm(ops.consistent_mass, U)

"""
surf_rd.sparse - sparse operators and linear solvers.

CSR storage is scipy.sparse.csr_matrix in canonical form (sorted column
indices, no duplicates, symmetric matrices stored in full). The lumped mass
is a DiagMatrix. Systems of the form (M + s A) are solved either by
Jacobi-preconditioned conjugate gradients or by a sparse LU factorization
with diagonal pivots.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, DimensionMismatchError, SurfRdError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000

CsrMatrix = sp.csr_matrix


@dataclass(frozen=True, eq=False)
class DiagMatrix:
    diag: np.ndarray

    def __post_init__(self):
        d = np.array(self.diag, dtype=np.float64).reshape(-1)
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.diag.size, self.diag.size)

    def __matmul__(self, x):
        return matvec(self, x)

    def to_sparse(self) -> CsrMatrix:
        return sp.diags(self.diag, format="csr")

    def is_positive(self) -> bool:
        return bool(np.all(self.diag > 0))


Operator = Union[CsrMatrix, DiagMatrix]


def as_csr(A) -> CsrMatrix:
    """Canonical CSR copy of any scipy sparse matrix, dense array or DiagMatrix."""
    if isinstance(A, DiagMatrix):
        A = A.to_sparse()
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def matvec(A: Operator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n_rows, n_cols = A.shape
    if x.shape[0] != n_cols:
        raise DimensionMismatchError(f"operator has {n_cols} columns, vector has {x.shape[0]} rows")
    if isinstance(A, DiagMatrix):
        return A.diag * x if x.ndim == 1 else A.diag[:, None] * x
    return A @ x


def shifted(A: CsrMatrix, s: float, shift: Optional[Operator] = None) -> CsrMatrix:
    """shift + s*A as a canonical CSR matrix."""
    S = as_csr(A) * float(s)
    if shift is not None:
        if shift.shape != S.shape:
            raise DimensionMismatchError(f"shift {shift.shape} does not match operator {S.shape}")
        S = as_csr(shift) + S
    return as_csr(S)


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    final_relative_residual: float


def _relative_residual(S: CsrMatrix, x: np.ndarray, b: np.ndarray, bnorm: float) -> float:
    return float(np.linalg.norm(b - S @ x) / bnorm)


class CgSolver:
    """Preconditioned conjugate gradients bound to one SPD operator.

    The Jacobi inverse diagonal is computed once and reused by every solve.
    """

    method = "cg"

    def __init__(self, S: CsrMatrix, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 precond: str = "jacobi"):
        if precond not in ("jacobi", "none"):
            raise ValueError(f"unknown preconditioner {precond!r}")
        self.S = as_csr(S)
        if self.S.shape[0] != self.S.shape[1]:
            raise DimensionMismatchError(f"operator must be square, got {self.S.shape}")
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.precond = precond
        if precond == "jacobi":
            d = self.S.diagonal()
            if np.any(d <= 0):
                raise SurfRdError("Jacobi preconditioner needs a positive diagonal")
            self.inv_diag = 1.0 / d
        else:
            self.inv_diag = None

    def _precondition(self, r: np.ndarray) -> np.ndarray:
        return r * self.inv_diag if self.inv_diag is not None else r.copy()

    def solve(self, b: np.ndarray, x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, SolveStats]:
        S = self.S
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (S.shape[0],):
            raise DimensionMismatchError(f"right-hand side has shape {b.shape}, expected ({S.shape[0]},)")
        with np.errstate(over="ignore", invalid="ignore"):
            bnorm = float(np.linalg.norm(b))
        if not np.isfinite(bnorm):
            raise ConvergenceError("right-hand side is not finite", 0, float("nan"))
        if bnorm == 0.0:
            return np.zeros_like(b), SolveStats(0, 0.0)
        x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
        r = b - S @ x
        rel = float(np.linalg.norm(r) / bnorm)
        if rel <= self.tol:
            return x, SolveStats(0, rel)
        z = self._precondition(r)
        p = z.copy()
        rz = float(r @ z)
        for k in range(1, self.max_iter + 1):
            Sp = S @ p
            curvature = float(p @ Sp)
            if not curvature > 0.0:
                raise ConvergenceError("conjugate gradient breakdown (p.Sp <= 0)", k, rel)
            alpha = rz / curvature
            x += alpha * p
            r -= alpha * Sp
            rel = float(np.linalg.norm(r) / bnorm)
            if rel <= self.tol:
                # the recurrence residual drifts; accept only on the true residual
                true_rel = _relative_residual(S, x, b, bnorm)
                if true_rel <= self.tol:
                    return x, SolveStats(k, true_rel)
                r = b - S @ x
                z = self._precondition(r)
                p = z.copy()
                rz = float(r @ z)
                continue
            z = self._precondition(r)
            rz_next = float(r @ z)
            p = z + (rz_next / rz) * p
            rz = rz_next
        raise ConvergenceError("conjugate gradient did not converge", self.max_iter,
                               _relative_residual(S, x, b, bnorm))


class DirectSolver:
    """Sparse LU of an SPD operator with a symmetric fill-reducing ordering and diagonal pivots.

    For an M-matrix the factors keep nonpositive off-diagonals, so substituting a
    nonnegative right-hand side yields a nonnegative solution in floating point.
    """

    method = "direct"

    def __init__(self, S: CsrMatrix):
        self.S = as_csr(S)
        if self.S.shape[0] != self.S.shape[1]:
            raise DimensionMismatchError(f"operator must be square, got {self.S.shape}")
        self._lu = splu(
            self.S.tocsc(),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True, "Equil": False},
        )

    def solve(self, b: np.ndarray, x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, SolveStats]:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.S.shape[0]:
            raise DimensionMismatchError(f"right-hand side has {b.shape[0]} rows, expected {self.S.shape[0]}")
        x = self._lu.solve(b)
        bnorm = float(np.linalg.norm(b))
        rel = float(np.linalg.norm(b - self.S @ x) / bnorm) if bnorm > 0 else 0.0
        return x, SolveStats(1, rel)


LinearSolver = Union[CgSolver, DirectSolver]


def factorize_spd(S: CsrMatrix) -> DirectSolver:
    return DirectSolver(S)


def make_solver(S: CsrMatrix, method: str = "cg", tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, precond: str = "jacobi") -> LinearSolver:
    if method == "cg":
        return CgSolver(S, tol=tol, max_iter=max_iter, precond=precond)
    if method == "direct":
        return DirectSolver(S)
    raise ValueError(f"unknown solver method {method!r}")


def cg_solve(S: CsrMatrix, b: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             precond: str = "jacobi", shift: Optional[DiagMatrix] = None,
             x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, SolveStats]:
    """Solve (shift + S) x = b; raises ConvergenceError after max_iter iterations."""
    operator = shifted(S, 1.0, shift) if shift is not None else S
    x, stats = CgSolver(operator, tol=tol, max_iter=max_iter, precond=precond).solve(b, x0=x0)
    logger.debug("cg: %d iterations, relative residual %.3e", stats.iterations, stats.final_relative_residual)
    return x, stats


def solve_operator_column_check(lumped_mass: DiagMatrix, A: CsrMatrix, s: float, j: int,
                                tol: float = DEFAULT_TOL) -> np.ndarray:
    """Column j of (M + sA)^{-1} M for diagonal M, by one CG solve with right-hand side M e_j."""
    n = lumped_mass.diag.size
    if not 0 <= j < n:
        raise DimensionMismatchError(f"column index {j} out of range for N={n}")
    b = np.zeros(n)
    b[j] = lumped_mass.diag[j]
    x, _ = cg_solve(A * float(s), b, tol=tol, shift=lumped_mass)
    return x


def dump_triplets(A: Operator, path: Union[str, Path]) -> None:
    """Write `row col value` lines, one per stored entry (debugging aid)."""
    coo = as_csr(A).tocoo()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def load_triplets(path: Union[str, Path], shape: Tuple[int, int]) -> CsrMatrix:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    rows, cols, values = data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2]
    return as_csr(sp.coo_matrix((values, (rows, cols)), shape=shape))

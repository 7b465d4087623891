"""
surf_rd.analysis - exact solutions, error norms, convergence tables and
the checks that turn the scheme's matrix properties into verifiable reports.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .assembly import FemOperators, NodalField, interpolate, l2_norm
from .errors import AnalysisError
from .kinetics import Rectangle
from .mesh import SurfaceMesh, check_angle_condition
from .sparse import factorize_spd
from .timestepper import SimulationResult

logger = logging.getLogger(__name__)

REGION_TOLERANCE = 1e-12
OFFDIAG_TOLERANCE = 1e-13
MAX_PROPERTY_NODES = 3000


@dataclass(frozen=True)
class ExactSolution:
    name: str
    components: Tuple[Callable[[np.ndarray, float], np.ndarray], ...]

    @property
    def r(self) -> int:
        return len(self.components)

    def evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return np.stack([np.asarray(c(points, t), dtype=np.float64) for c in self.components])


def heat_decay_exact() -> ExactSolution:
    """xyz e^{-t}: decays at 12 d + beta = 1 for d = 1/24, beta = 1/2."""
    return ExactSolution(
        "xyz*exp(-t)",
        (lambda p, t: p[:, 0] * p[:, 1] * p[:, 2] * math.exp(-t),),
    )


def forced_schnakenberg_exact() -> ExactSolution:
    return ExactSolution(
        "(xy, -xyz)*exp(-t)",
        (
            lambda p, t: p[:, 0] * p[:, 1] * math.exp(-t),
            lambda p, t: -p[:, 0] * p[:, 1] * p[:, 2] * math.exp(-t),
        ),
    )


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    n_nodes: int
    h: float
    error: float
    rate: Optional[float]


@dataclass
class ConvergenceTable:
    rows: List[ConvergenceRow]
    method: str = "LSFEM"

    @property
    def rates(self) -> List[float]:
        return [row.rate for row in self.rows if row.rate is not None]

    def mean_rate(self, last: int = 3) -> float:
        rates = self.rates[-last:]
        if not rates:
            raise AnalysisError("table has no rates")
        return float(np.mean(rates))


def convergence_rates(errors: Sequence[float], hs: Sequence[float],
                      levels: Optional[Sequence[int]] = None,
                      n_nodes: Optional[Sequence[int]] = None,
                      method: str = "LSFEM") -> ConvergenceTable:
    """rate_i = log(err_{i-1}/err_i) / log(h_{i-1}/h_i); the first row has no rate."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise AnalysisError(f"need equally long sequences of length >= 2, got {len(errors)} and {len(hs)}")
    if any(not e > 0 for e in errors) or any(not h > 0 for h in hs):
        raise AnalysisError("errors and mesh sizes must be positive")
    levels = list(levels) if levels is not None else list(range(len(errors)))
    n_nodes = list(n_nodes) if n_nodes is not None else [0] * len(errors)
    rows = []
    for i, (e, h) in enumerate(zip(errors, hs)):
        rate = None
        if i > 0:
            if hs[i - 1] == h:
                raise AnalysisError(f"rows {i - 1} and {i} have the same abscissa {h}")
            rate = math.log(errors[i - 1] / e) / math.log(hs[i - 1] / h)
        rows.append(ConvergenceRow(int(levels[i]), int(n_nodes[i]), h, e, rate))
    return ConvergenceTable(rows=rows, method=method)


def linf_l2_error(result: SimulationResult, exact: ExactSolution, mesh: SurfaceMesh,
                  operators: FemOperators) -> float:
    """max_n || U^n - I_h u(t_n) ||_{L2}, the L2 norm taken with the consistent mass."""
    steps = [step for step, _ in result.snapshots]
    if steps and steps == list(range(len(steps))) and steps[-1] >= result.steps_completed:
        worst = 0.0
        for step, snapshot in result.snapshots:
            target = interpolate(mesh, exact.evaluate, step * result.tau)
            worst = max(worst, l2_norm(operators.consistent_mass, snapshot.values - target.values))
        return worst
    if result.error_trace and result.exact_name == exact.name:
        return float(max(result.error_trace))
    raise AnalysisError("result has neither per-step snapshots nor an online error trace for this solution")


@dataclass
class RegionReport:
    minima: Tuple[float, ...]
    maxima: Tuple[float, ...]
    time_of_min: Tuple[float, ...]
    time_of_max: Tuple[float, ...]
    first_violation: Optional[Tuple[int, int, int]] = None
    blow_up: bool = False
    tolerance: float = REGION_TOLERANCE

    @property
    def violated(self) -> bool:
        return self.first_violation is not None


def region_violation_scan(result: SimulationResult, rect: Rectangle,
                          tol: float = REGION_TOLERANCE) -> RegionReport:
    """Extrema over steps n >= 1 and the first (step, node, component) leaving rect by more than tol."""
    if not result.records:
        r = rect.r
        return RegionReport((math.nan,) * r, (math.nan,) * r, (math.nan,) * r, (math.nan,) * r,
                            blow_up=result.blew_up, tolerance=tol)
    r = len(result.records[0].minima)
    if r != rect.r:
        raise AnalysisError(f"rectangle has {rect.r} components, result has {r}")
    minima = [math.inf] * r
    maxima = [-math.inf] * r
    t_min = [math.nan] * r
    t_max = [math.nan] * r
    first = None
    for record in result.records:
        for k in range(r):
            low, high = record.minima[k], record.maxima[k]
            if low < minima[k]:
                minima[k], t_min[k] = low, record.time
            if high > maxima[k]:
                maxima[k], t_max[k] = high, record.time
            if first is None:
                if low < rect.lo[k] - tol:
                    first = (record.step, record.argmin[k] if record.argmin else -1, k)
                elif high > rect.hi[k] + tol:
                    first = (record.step, record.argmax[k] if record.argmax else -1, k)
    report = RegionReport(tuple(minima), tuple(maxima), tuple(t_min), tuple(t_max),
                          first_violation=first, blow_up=result.blew_up, tolerance=tol)
    if report.violated:
        step, node, k = first
        logger.info("rectangle left at step %d, node %d, component %d", step, node, k)
    return report


@dataclass
class MatrixPropertyReport:
    angle_condition: bool
    max_offdiagonal: float
    positive_offdiagonal_edges: List[Tuple[int, int]]
    sign_pattern_consistent: bool
    min_entry: Dict[float, float] = field(default_factory=dict)
    row_sum_error: Dict[float, float] = field(default_factory=dict)
    nonnegative: Dict[float, bool] = field(default_factory=dict)
    row_sums_one: Dict[float, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.sign_pattern_consistent and all(self.nonnegative.values())
                and all(self.row_sums_one.values()))


def positive_offdiagonals(operators: FemOperators, tol: float = OFFDIAG_TOLERANCE) -> List[Tuple[int, int]]:
    coo = operators.stiffness.tocoo()
    mask = (coo.row < coo.col) & (coo.data > tol)
    return [(int(i), int(j)) for i, j in zip(coo.row[mask], coo.col[mask])]


def verify_matrix_properties(mesh: SurfaceMesh, operators: FemOperators,
                             s_values: Sequence[float] = (1e-3, 1e-1, 1.0),
                             nonneg_tol: float = 1e-12, row_sum_tol: float = 1e-9,
                             max_nodes: int = MAX_PROPERTY_NODES) -> MatrixPropertyReport:
    """Check (i) off-diagonal signs against the angle condition, (ii) (M + sA)^{-1} M >= 0,
    (iii) (M + sA)^{-1} M 1 = 1, with M the lumped mass.

    Each M + sA is factorized once and applied to all N columns of M.
    """
    n = operators.n_nodes
    if n > max_nodes:
        raise AnalysisError(f"column-by-column check limited to {max_nodes} nodes, mesh has {n}")
    angle = check_angle_condition(mesh)
    positive = positive_offdiagonals(operators)
    coo = operators.stiffness.tocoo()
    off = coo.data[coo.row != coo.col]
    max_off = float(off.max()) if off.size else 0.0
    if angle.passed:
        consistent = not positive
    else:
        violating = {edge for edge, _ in angle.violations}
        consistent = bool(positive) and violating.issubset(set(positive))

    report = MatrixPropertyReport(angle.passed, max_off, positive, consistent)
    mbar = operators.lumped_mass.diag
    for s in s_values:
        s = float(s)
        if s == 0.0:
            columns = np.eye(n)
        else:
            solver = factorize_spd(operators.system_matrix("lumped", s))
            columns, _ = solver.solve(np.diag(mbar))
        report.min_entry[s] = float(columns.min())
        report.row_sum_error[s] = float(np.abs(columns.sum(axis=1) - 1.0).max())
        report.nonnegative[s] = report.min_entry[s] >= -nonneg_tol
        report.row_sums_one[s] = report.row_sum_error[s] <= row_sum_tol
        logger.debug("s=%g: min entry %.3e, row-sum error %.3e", s, report.min_entry[s], report.row_sum_error[s])
    return report


def rayleigh_quotient(operators: FemOperators, xi) -> float:
    """xi^T A xi / xi^T M xi with the consistent mass."""
    xi = np.asarray(xi.values[0] if isinstance(xi, NodalField) else xi, dtype=np.float64).reshape(-1)
    denominator = float(xi @ (operators.consistent_mass @ xi))
    if not np.any(xi) or denominator == 0.0:
        raise AnalysisError("Rayleigh quotient of the zero vector")
    return float(xi @ (operators.stiffness @ xi)) / denominator


def solution_distance(result: SimulationResult, reference: SimulationResult, operators: FemOperators) -> float:
    """max over the coarse run's snapshot times of ||U^n - U_ref(t_n)||_{L2}; the time grids must nest."""
    if not result.snapshots or not reference.snapshots:
        raise AnalysisError("temporal comparison needs per-step snapshots in both runs")
    by_step = dict(reference.snapshots)
    ratio = result.tau / reference.tau
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise AnalysisError(f"tau={result.tau} is not a multiple of the reference tau={reference.tau}")
    stride = int(round(ratio))
    worst = 0.0
    for step, snapshot in result.snapshots:
        ref = by_step.get(step * stride)
        if ref is None:
            raise AnalysisError(f"reference has no snapshot at step {step * stride}")
        worst = max(worst, l2_norm(operators.consistent_mass, snapshot.values - ref.values))
    return worst


def temporal_convergence(results: Sequence[SimulationResult], operators: FemOperators,
                         method: str = "LSFEM") -> ConvergenceTable:
    """Rates in tau: every run is compared with the smallest-tau run on the same mesh.

    The spatial error cancels in the difference, which behaves like C (tau - tau_ref),
    so tau - tau_ref is the abscissa.
    """
    if len(results) < 3:
        raise AnalysisError("temporal study needs at least three step sizes (one is the reference)")
    ordered = sorted(results, key=lambda res: res.tau, reverse=True)
    reference = ordered[-1]
    errors = [solution_distance(res, reference, operators) for res in ordered[:-1]]
    distances = [res.tau - reference.tau for res in ordered[:-1]]
    return convergence_rates(errors, distances, levels=list(range(len(errors))),
                             n_nodes=[operators.n_nodes] * len(errors), method=method)

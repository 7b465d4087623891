"""
surf_rd.timestepper - IMEX Euler for r-component reaction-diffusion systems.

Diffusion is implicit, reactions explicit. For every component k:

    (M + d_k tau A) xi_k^{n+1} = M (xi_k^n + tau f_k(xi^n, x, t_n))

with M the lumped mass (LSFEM) or the consistent mass (SFEM) and f
evaluated nodewise. The operators M + d_k tau A are fixed for the run, so
their solvers are built once (factor_cache) and reused every step.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .assembly import MASS_MODES, FemOperators, NodalField, interpolate, l2_norm
from .errors import ConfigError, ConvergenceError, DimensionMismatchError, SolverFailure
from .kinetics import KineticsModel
from .mesh import SurfaceMesh
from .sparse import DEFAULT_MAX_ITER, DEFAULT_TOL, LinearSolver, make_solver

logger = logging.getLogger(__name__)

BLOW_UP_THRESHOLD = 1e100

StepCallback = Callable[[int, float, NodalField], None]


@dataclass(frozen=True)
class SimulationConfig:
    diffusion: Tuple[float, ...]
    tau: float
    t_final: float
    mass_mode: str = "lumped"
    solver: str = "cg"
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    snapshot_stride: int = 0

    def __post_init__(self):
        object.__setattr__(self, "diffusion", tuple(float(d) for d in self.diffusion))
        if not self.diffusion or any(d <= 0 for d in self.diffusion):
            raise ConfigError(f"diffusion coefficients must be positive, got {self.diffusion}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not self.t_final > 0 or self.tau > self.t_final:
            raise ConfigError(f"need 0 < tau <= t_final, got tau={self.tau} t_final={self.t_final}")
        if self.mass_mode not in MASS_MODES:
            raise ConfigError(f"mass_mode must be one of {MASS_MODES}, got {self.mass_mode!r}")
        if self.solver not in ("cg", "direct"):
            raise ConfigError(f"solver must be 'cg' or 'direct', got {self.solver!r}")
        if self.snapshot_stride < 0:
            raise ConfigError(f"snapshot_stride must be >= 0, got {self.snapshot_stride}")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_final / self.tau * (1.0 - 1e-12)))


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    minima: Tuple[float, ...]
    maxima: Tuple[float, ...]
    iterations: int
    argmin: Tuple[int, ...] = ()
    argmax: Tuple[int, ...] = ()


@dataclass
class SimulationResult:
    final: NodalField
    records: List[StepRecord] = field(default_factory=list)
    snapshots: List[Tuple[int, NodalField]] = field(default_factory=list)
    status: str = "completed"
    blow_up_step: Optional[int] = None
    last_finite_minima: Optional[Tuple[float, ...]] = None
    last_finite_maxima: Optional[Tuple[float, ...]] = None
    initial_minima: Tuple[float, ...] = ()
    initial_maxima: Tuple[float, ...] = ()
    tau: float = 0.0
    error_trace: List[float] = field(default_factory=list)
    exact_name: Optional[str] = None
    elapsed_seconds: float = 0.0

    @property
    def steps_completed(self) -> int:
        return self.records[-1].step if self.records else 0

    @property
    def blew_up(self) -> bool:
        return self.status == "blow_up"


def factor_cache(operators: FemOperators, diffusion: Sequence[float], tau: float,
                 mass_mode: str = "lumped", solver: str = "cg", tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER) -> List[LinearSolver]:
    """One solver per component for M + d_k tau A; equal d_k share one context."""
    built: Dict[float, LinearSolver] = {}
    contexts = []
    for d in diffusion:
        d = float(d)
        if d not in built:
            S = operators.system_matrix(mass_mode, d * tau)
            built[d] = make_solver(S, method=solver, tol=tol, max_iter=max_iter)
            logger.debug("built %s solver for d=%g tau=%g (%s mass)", solver, d, tau, mass_mode)
        contexts.append(built[d])
    return contexts


def _extrema(values: np.ndarray) -> Tuple[tuple, tuple, tuple, tuple]:
    # non-finite entries are skipped; an all-non-finite component reports nan
    finite = np.isfinite(values)
    low = np.where(finite, values, np.inf)
    high = np.where(finite, values, -np.inf)
    argmin = low.argmin(axis=1)
    argmax = high.argmax(axis=1)
    rows = np.arange(values.shape[0])
    has_finite = finite.any(axis=1)
    lows = np.where(has_finite, low[rows, argmin], np.nan)
    highs = np.where(has_finite, high[rows, argmax], np.nan)
    return (tuple(float(v) for v in lows), tuple(float(v) for v in highs),
            tuple(int(i) for i in argmin), tuple(int(i) for i in argmax))


def _advance(values: np.ndarray, n: int, points: np.ndarray, operators: FemOperators,
             model: KineticsModel, config: SimulationConfig,
             contexts: Sequence[LinearSolver]) -> Tuple[np.ndarray, int]:
    tau = config.tau
    with np.errstate(over="ignore", invalid="ignore"):
        rates = np.asarray(model.rates(values, points, n * tau))
        explicit = values + tau * rates
    if not np.isfinite(explicit).all() or np.abs(explicit).max() > BLOW_UP_THRESHOLD:
        # hand the blown-up state back; the run loop flags it
        return explicit, 0
    out = np.empty_like(values)
    iterations = 0
    for k in range(values.shape[0]):
        rhs = operators.apply_mass(config.mass_mode, explicit[k])
        out[k], stats = contexts[k].solve(rhs, x0=values[k])
        iterations += stats.iterations
    return out, iterations


def imex_euler_step(state: NodalField, n: int, mesh: SurfaceMesh, operators: FemOperators,
                    model: KineticsModel, config: SimulationConfig,
                    contexts: Optional[Sequence[LinearSolver]] = None) -> NodalField:
    """xi^{n+1} from xi^n; builds the solvers when no cached contexts are given."""
    if contexts is None:
        contexts = factor_cache(operators, config.diffusion, config.tau, config.mass_mode,
                                config.solver, config.tol, config.max_iter)
    values, _ = _advance(state.values, n, mesh.vertices, operators, model, config, contexts)
    return NodalField(values)


def imex_euler_run(mesh: SurfaceMesh, operators: FemOperators, model: KineticsModel,
                   u0: NodalField, config: SimulationConfig, exact=None,
                   on_step: Optional[StepCallback] = None,
                   contexts: Optional[Sequence[LinearSolver]] = None) -> SimulationResult:
    """Run ceil(t_final / tau) steps, recording per-component extrema at every step n >= 1.

    `exact` (an object with `name` and `evaluate(points, t)`) switches on the
    online L2 error against its interpolant. Stops early with status
    "blow_up" at the first non-finite value or |value| > 1e100.
    """
    if u0.n_components != model.r:
        raise DimensionMismatchError(f"model {model.name!r} has r={model.r}, initial field has {u0.n_components}")
    if u0.n_nodes != mesh.n_vertices:
        raise DimensionMismatchError(f"initial field has {u0.n_nodes} nodes, mesh has {mesh.n_vertices}")
    if len(config.diffusion) != model.r:
        raise ConfigError(f"{len(config.diffusion)} diffusion coefficients for r={model.r} components")

    started = time.perf_counter()
    if contexts is None:
        contexts = factor_cache(operators, config.diffusion, config.tau, config.mass_mode,
                                config.solver, config.tol, config.max_iter)
    values = u0.values.copy()
    lows, highs, _, _ = _extrema(values)
    result = SimulationResult(final=u0.copy(), initial_minima=lows, initial_maxima=highs, tau=config.tau)
    stride = config.snapshot_stride
    if stride:
        result.snapshots.append((0, u0.copy()))
    if exact is not None:
        result.exact_name = exact.name
        result.error_trace.append(_l2_error(values, mesh, operators, exact, 0.0))
    if on_step is not None:
        on_step(0, 0.0, u0)

    n_steps = config.n_steps
    logger.info("IMEX Euler: %s, N=%d, r=%d, tau=%g, steps=%d, %s mass, %s solver",
                model.name, mesh.n_vertices, model.r, config.tau, n_steps,
                config.mass_mode, config.solver)
    for n in range(n_steps):
        try:
            values, iterations = _advance(values, n, mesh.vertices, operators, model, config, contexts)
        except ConvergenceError as exc:
            raise SolverFailure(n + 1, exc) from exc
        t = (n + 1) * config.tau
        lows, highs, argmin, argmax = _extrema(values)
        result.records.append(StepRecord(n + 1, t, lows, highs, iterations, argmin, argmax))
        result.last_finite_minima, result.last_finite_maxima = lows, highs
        current = NodalField(values)
        if not np.isfinite(values).all() or np.abs(values).max() > BLOW_UP_THRESHOLD:
            result.status = "blow_up"
            result.blow_up_step = n + 1
            result.final = current
            logger.warning("blow-up detected at step %d (t=%.4g)", n + 1, t)
            break
        logger.debug("step %d t=%.5g min=%s max=%s its=%d", n + 1, t, lows, highs, iterations)
        if stride and ((n + 1) % stride == 0 or n + 1 == n_steps):
            result.snapshots.append((n + 1, current))
        if exact is not None:
            result.error_trace.append(_l2_error(values, mesh, operators, exact, t))
        if on_step is not None:
            on_step(n + 1, t, current)
    else:
        result.final = NodalField(values)

    result.elapsed_seconds = time.perf_counter() - started
    logger.info("run finished: status=%s after %d steps in %.2fs",
                result.status, result.steps_completed, result.elapsed_seconds)
    return result


def _l2_error(values: np.ndarray, mesh: SurfaceMesh, operators: FemOperators, exact, t: float) -> float:
    target = interpolate(mesh, exact.evaluate, t).values
    return l2_norm(operators.consistent_mass, values - target)

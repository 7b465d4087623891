"""
surf_rd.kinetics - reaction models, invariant rectangles and time-step bounds.

A model maps nodal states u (shape (r, ...)) at positions x (shape (..., 3))
and time t to reaction rates of the same shape as u. Models are immutable
value objects and their rates are pure functions.

Built-in models:
  SemilinearDecay(beta, alpha)    f(u) = -beta * u**alpha on [0, u_max]
  homogeneous_heat()              SemilinearDecay with beta = 0
  RosenzweigMacArthur(...)        predator-prey kinetics, rectangle [eps,1] x [0, a*alpha/(2b)]
  ForcedSchnakenberg(a, b)        activator-depleted kinetics plus a manufactured forcing
  FunctionKinetics(...)           any user-supplied rate function
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import KineticsError

logger = logging.getLogger(__name__)

FLUX_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Rectangle:
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise KineticsError(f"rectangle bounds have different lengths: {len(lo)} vs {len(hi)}")
        if any(l > h for l, h in zip(lo, hi)):
            raise KineticsError(f"rectangle has lo > hi: {lo} {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def r(self) -> int:
        return len(self.lo)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.lo + self.hi)

    def contains(self, u: np.ndarray, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=np.float64).reshape(self.r, -1)
        lo = np.asarray(self.lo)[:, None] - tol
        hi = np.asarray(self.hi)[:, None] + tol
        return bool(np.all((u >= lo) & (u <= hi)))

    def clamp(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        shape = (self.r,) + (1,) * (u.ndim - 1)
        return np.clip(u, np.reshape(self.lo, shape), np.reshape(self.hi, shape))


class KineticsModel:
    """Base class: subclasses provide `name`, `r`, and `rates(u, x, t)`."""

    name: str = "kinetics"
    r: int = 1

    @property
    def lipschitz(self) -> Optional[Tuple[float, ...]]:
        return None

    @property
    def rectangle(self) -> Optional[Rectangle]:
        return None

    def rates(self, u: np.ndarray, x: Optional[np.ndarray] = None, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def max_stable_timestep(self) -> float:
        """tau bound 1 / max_k L_k under which the explicit reaction step stays in the rectangle."""
        L = self.lipschitz
        if L is None:
            raise KineticsError(f"model {self.name!r} has no Lipschitz data")
        worst = max(L)
        return math.inf if worst == 0 else 1.0 / worst


def _odd_power(u: np.ndarray, alpha: float) -> np.ndarray:
    if float(alpha).is_integer():
        return u ** int(alpha)
    return np.sign(u) * np.abs(u) ** alpha


@dataclass(frozen=True)
class SemilinearDecay(KineticsModel):
    beta: float = 0.5
    alpha: float = 1.0
    u_max: float = 1.0
    name: str = "semilinear-decay"
    r: int = 1

    def __post_init__(self):
        if self.beta < 0:
            raise KineticsError(f"beta must be nonnegative, got {self.beta}")
        if self.alpha < 1:
            raise KineticsError(f"alpha must be >= 1, got {self.alpha}")
        if self.u_max <= 0:
            raise KineticsError(f"u_max must be positive, got {self.u_max}")

    @property
    def lipschitz(self) -> Tuple[float, ...]:
        return (self.alpha * self.beta * self.u_max ** (self.alpha - 1.0),)

    @property
    def rectangle(self) -> Rectangle:
        return Rectangle((0.0,), (self.u_max,))

    def rates(self, u, x=None, t=0.0):
        u = np.asarray(u, dtype=np.float64)
        return -self.beta * _odd_power(u, self.alpha)

    def max_stable_timestep(self) -> float:
        # beta * tau <= u_max**(1 - alpha)
        if self.beta == 0:
            return math.inf
        return self.u_max ** (1.0 - self.alpha) / self.beta


def homogeneous_heat(u_max: float = 1.0) -> SemilinearDecay:
    return SemilinearDecay(beta=0.0, alpha=1.0, u_max=u_max, name="homogeneous-heat")


@dataclass(frozen=True)
class RosenzweigMacArthur(KineticsModel):
    a: float = 10.0
    b: float = 1e-2
    c: float = 1.0
    d: float = 1.0
    alpha: float = 1e-3
    eps: float = 1e-7
    name: str = "rosenzweig-macarthur"
    r: int = 2

    @property
    def lipschitz(self) -> Tuple[float, ...]:
        root2 = math.sqrt(2.0)
        return (
            root2 * (3.0 * self.a + self.b / (2.0 * self.alpha)),
            root2 * (self.c / (2.0 * self.alpha) + self.d / 2.0),
        )

    @property
    def rectangle(self) -> Rectangle:
        return rosenzweig_macarthur_rectangle(self.a, self.b, self.alpha, self.eps, self.c, self.d)

    def rates(self, u, x=None, t=0.0):
        u = np.asarray(u, dtype=np.float64)
        prey, predator = u[0], u[1]
        uptake = prey * predator / (prey + self.alpha)
        return np.stack([
            self.a * prey * (1.0 - prey) - self.b * uptake,
            self.c * uptake - self.d * predator,
        ])


def rosenzweig_macarthur_rectangle(a: float, b: float, alpha: float, eps: float,
                                   c: float = 1.0, d: float = 1.0) -> Rectangle:
    """[eps, 1] x [0, a*alpha/(2b)]; invariant when c = d and 0 < alpha < 1/sqrt(2)."""
    if c != d or not 0 < alpha < 1.0 / math.sqrt(2.0):
        logger.warning("rectangle invariance needs c = d and 0 < alpha < 1/sqrt(2) (c=%g d=%g alpha=%g)",
                       c, d, alpha)
    return Rectangle((eps, 0.0), (1.0, a * alpha / (2.0 * b)))


def forced_schnakenberg_forcing(x: np.ndarray, t: float, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Forcing for which u = xy e^-t, v = -xyz e^-t solves the forced system with d1 = 1/6, d2 = 1/12."""
    x = np.asarray(x, dtype=np.float64)
    px, py, pz = x[..., 0], x[..., 1], x[..., 2]
    xy = px * py
    cubic = xy ** 3 * pz * math.exp(-3.0 * t)
    return np.stack([xy * math.exp(-t) + cubic - a, -cubic - b])


@dataclass(frozen=True)
class ForcedSchnakenberg(KineticsModel):
    a: float = 1.0
    b: float = 1.0
    forced: bool = True
    name: str = "forced-schnakenberg"
    r: int = 2

    def rates(self, u, x=None, t=0.0):
        u = np.asarray(u, dtype=np.float64)
        activator, substrate = u[0], u[1]
        production = activator ** 2 * substrate
        out = np.stack([self.a - activator + production, self.b - production])
        if self.forced:
            if x is None:
                raise KineticsError("forced Schnakenberg kinetics need node positions")
            out = out + forced_schnakenberg_forcing(x, t, self.a, self.b)
        return out


@dataclass(frozen=True)
class FunctionKinetics(KineticsModel):
    func: Callable = None
    r: int = 1
    name: str = "custom"
    lipschitz_bounds: Optional[Tuple[float, ...]] = None
    bounds: Optional[Rectangle] = None

    @property
    def lipschitz(self):
        return self.lipschitz_bounds

    @property
    def rectangle(self):
        return self.bounds

    def rates(self, u, x=None, t=0.0):
        return np.asarray(self.func(np.asarray(u, dtype=np.float64), x, t), dtype=np.float64)


def eval_kinetics(model: KineticsModel, u, x=None, t: float = 0.0) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if not np.isfinite(u).all():
        raise KineticsError("kinetics evaluated at a non-finite state")
    out = np.asarray(model.rates(u, x, t), dtype=np.float64)
    if not np.isfinite(out).all():
        raise KineticsError(f"model {model.name!r} produced non-finite rates")
    return out


def max_stable_timestep(model: KineticsModel) -> float:
    return model.max_stable_timestep()


@dataclass(frozen=True)
class FluxReport:
    strict: bool
    weak: bool
    worst: float
    worst_face: Optional[Tuple[int, str]] = None


def _face_axes(rect: Rectangle, k: int, samples: int) -> Sequence[np.ndarray]:
    others = [j for j in range(rect.r) if j != k]
    per_axis = max(2, int(math.ceil(samples ** (1.0 / len(others))))) if others else 1
    return [np.linspace(rect.lo[j], rect.hi[j], per_axis) for j in others]


def check_inward_flux(model: KineticsModel, rect: Rectangle, samples_per_face: int = 1000,
                      x: Optional[np.ndarray] = None, t: float = 0.0) -> FluxReport:
    """Sample f . n on every face of a finite rectangle; n is the outward normal."""
    if not rect.is_finite():
        raise KineticsError("check_inward_flux needs a finite rectangle")
    worst = -math.inf
    worst_face = None
    for k in range(rect.r):
        axes = _face_axes(rect, k, samples_per_face)
        others = [j for j in range(rect.r) if j != k]
        grid = np.array(list(product(*axes))).T if others else np.empty((0, 1))
        for side, value, sign in (("lo", rect.lo[k], -1.0), ("hi", rect.hi[k], 1.0)):
            u = np.empty((rect.r, grid.shape[1]))
            u[k] = value
            for row, j in enumerate(others):
                u[j] = grid[row]
            outward = sign * np.asarray(model.rates(u, x, t))[k]
            face_worst = float(np.max(outward))
            if face_worst > worst:
                worst, worst_face = face_worst, (k, side)
    report = FluxReport(strict=worst < 0.0, weak=worst <= FLUX_TOLERANCE, worst=worst, worst_face=worst_face)
    logger.debug("inward flux for %s: %s", model.name, report)
    return report


def estimate_lipschitz(model: KineticsModel, rect: Rectangle, grid: int = 200,
                       x: Optional[np.ndarray] = None, t: float = 0.0) -> Tuple[float, ...]:
    """Sampled Lipschitz constants: max norm of finite-difference gradient rows on a grid over rect."""
    if not rect.is_finite():
        raise KineticsError("estimate_lipschitz needs a finite rectangle")
    if grid < 2:
        raise KineticsError(f"grid must have at least 2 points per axis, got {grid}")
    axes = [np.linspace(l, h, grid) for l, h in zip(rect.lo, rect.hi)]
    f = np.asarray(model.rates(np.stack(np.meshgrid(*axes, indexing="ij")), x, t))
    corner = tuple(slice(0, grid - 1) for _ in range(rect.r))
    estimates = []
    for k in range(rect.r):
        squared = np.zeros([grid - 1] * rect.r)
        for j in range(rect.r):
            step = axes[j][1] - axes[j][0]
            if step > 0:
                squared += (np.diff(f[k], axis=j)[corner] / step) ** 2
        estimates.append(float(np.sqrt(squared).max()))
    return tuple(estimates)

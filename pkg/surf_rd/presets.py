"""
surf_rd.presets - the four reference experiments.

  exp1  semilinear decay, d = 1/24, beta = 1/2, u0 = xyz, exact xyz e^-t
  exp2  homogeneous heat, d = 0.1, compactly supported cap, rectangle [0, 1]
  exp3  Rosenzweig-MacArthur, d1 = d2 = 1e-2, tau = 1e-3, T = 5
  exp4  forced Schnakenberg, d1 = 1/6, d2 = 1/12, exact (xy, -xyz) e^-t

Convergence presets (exp1, exp4) pick tau from the mesh size with
scheduled_tau; the others carry a fixed tau or the same schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from .analysis import ExactSolution, forced_schnakenberg_exact, heat_decay_exact
from .errors import ConfigError
from .kinetics import (ForcedSchnakenberg, KineticsModel, Rectangle, RosenzweigMacArthur,
                       SemilinearDecay, homogeneous_heat)

TAU0 = 0.2048
H0 = 4.013e-1

EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4")


def scheduled_tau(h: float, t_final: float, tau0: float = TAU0, h0: float = H0) -> float:
    """tau0 (h/h0)^2 snapped down to t_final / ceil(t_final / tau) so the last step lands on t_final."""
    if h <= 0 or t_final <= 0:
        raise ConfigError(f"need positive h and t_final, got h={h} t_final={t_final}")
    tau = tau0 * (h / h0) ** 2
    return t_final / math.ceil(t_final / tau)


def cap(points: np.ndarray, radius: float, floor: float = 0.0) -> np.ndarray:
    """floor + (1 - floor) sqrt(1 - (x^2 + y^2)/radius^2) on the northern cap x^2 + y^2 <= radius^2, floor elsewhere."""
    rho2 = points[:, 0] ** 2 + points[:, 1] ** 2
    inside = (rho2 <= radius ** 2) & (points[:, 2] > 0)
    bump = np.sqrt(np.clip(1.0 - rho2 / radius ** 2, 0.0, None))
    return np.where(inside, floor + (1.0 - floor) * bump, floor)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    model: KineticsModel
    diffusion: Tuple[float, ...]
    initial: Callable[[np.ndarray], np.ndarray]
    t_final: float
    exact: Optional[ExactSolution] = None
    rectangle: Optional[Rectangle] = None
    tau: Optional[float] = None
    solver: str = "cg"
    report: str = "convergence"
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.model.r

    def tau_for(self, h: float, t_final: Optional[float] = None) -> float:
        t_final = self.t_final if t_final is None else t_final
        if self.tau is not None:
            return self.tau
        return scheduled_tau(h, t_final)

    def initial_values(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.initial(points), dtype=np.float64))


def _exp1(beta: float = 0.5, alpha: float = 1.0, d: float = 1.0 / 24.0, t_final: float = 1.0) -> ExperimentPreset:
    return ExperimentPreset(
        name="exp1",
        description="semilinear heat equation with exact solution xyz e^-t",
        model=SemilinearDecay(beta=beta, alpha=alpha),
        diffusion=(d,),
        initial=lambda p: p[:, 0] * p[:, 1] * p[:, 2],
        t_final=t_final,
        exact=heat_decay_exact() if alpha == 1.0 and math.isclose(12.0 * d + beta, 1.0) else None,
        solver="cg",
        parameters={"beta": beta, "alpha": alpha, "d": d},
    )


def _exp2(d: float = 0.1, radius: float = 0.2, t_final: float = 1.0) -> ExperimentPreset:
    model = homogeneous_heat(u_max=1.0)
    return ExperimentPreset(
        name="exp2",
        description="homogeneous heat equation with a compactly supported cap",
        model=model,
        diffusion=(d,),
        initial=lambda p: cap(p, radius),
        t_final=t_final,
        rectangle=model.rectangle,
        solver="direct",
        report="extrema",
        parameters={"d": d, "radius": radius},
    )


def _exp3(a: float = 10.0, b: float = 1e-2, c: float = 1.0, d: float = 1.0, alpha: float = 1e-3,
          eps: float = 1e-7, radius: float = 0.2, d1: float = 1e-2, d2: float = 1e-2,
          tau: float = 1e-3, t_final: float = 5.0) -> ExperimentPreset:
    model = RosenzweigMacArthur(a=a, b=b, c=c, d=d, alpha=alpha, eps=eps)
    predator = a * alpha / (2.0 * b)
    return ExperimentPreset(
        name="exp3",
        description="Rosenzweig-MacArthur kinetics in the rectangle [eps, 1] x [0, a alpha / 2b]",
        model=model,
        diffusion=(d1, d2),
        initial=lambda p: np.stack([cap(p, radius, floor=eps), np.full(len(p), predator)]),
        t_final=t_final,
        rectangle=model.rectangle,
        tau=tau,
        solver="direct",
        report="extrema",
        parameters={"a": a, "b": b, "c": c, "d": d, "alpha": alpha, "eps": eps, "radius": radius,
                    "d1": d1, "d2": d2},
    )


def _exp4(a: float = 1.0, b: float = 1.0, d1: float = 1.0 / 6.0, d2: float = 1.0 / 12.0,
          t_final: float = 1.0) -> ExperimentPreset:
    # the manufactured forcing is tied to d1 = 1/6, d2 = 1/12
    if (d1, d2) != (1.0 / 6.0, 1.0 / 12.0):
        raise ConfigError("exp4 forcing is only valid for d1 = 1/6 and d2 = 1/12")
    return ExperimentPreset(
        name="exp4",
        description="forced activator-depleted kinetics with exact solution (xy, -xyz) e^-t",
        model=ForcedSchnakenberg(a=a, b=b),
        diffusion=(d1, d2),
        initial=lambda p: np.stack([p[:, 0] * p[:, 1], -p[:, 0] * p[:, 1] * p[:, 2]]),
        t_final=t_final,
        exact=forced_schnakenberg_exact(),
        solver="cg",
        parameters={"a": a, "b": b, "d1": d1, "d2": d2},
    )


_BUILDERS = {"exp1": _exp1, "exp2": _exp2, "exp3": _exp3, "exp4": _exp4}


def get_preset(name: str, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentPreset:
    """Build a preset; `overrides` replaces model parameters, e.g. {"beta": 0.25} for exp1."""
    if name not in _BUILDERS:
        raise ConfigError(f"unknown experiment {name!r}, expected one of {EXPERIMENTS}")
    try:
        return _BUILDERS[name](**dict(overrides or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameter for {name}: {exc}") from exc


def with_final_time(preset: ExperimentPreset, t_final: float) -> ExperimentPreset:
    if not t_final > 0:
        raise ConfigError(f"t_final must be positive, got {t_final}")
    return replace(preset, t_final=float(t_final))

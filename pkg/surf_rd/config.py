"""
surf_rd.config - TOML run configuration.

    [mesh]
    kind = "icosphere"        # or "fibonacci" (uses points) or "file" (uses path)
    level = 3

    [model]
    experiment = "exp3"
    method = "lsfem"          # or "sfem"
    [model.parameters]        # optional preset parameter overrides
    eps = 1e-7

    [time]
    tau = 1e-3
    t_final = 5.0

    [solver]
    method = "direct"         # or "cg"; default depends on the experiment
    tol = 1e-10
    max_iter = 10000

    [output]
    directory = "out/exp3"
    snapshot_stride = 100

Precedence: preset defaults < file values < command-line flags.
"""
from __future__ import annotations

import logging
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from .errors import ConfigError
from .presets import EXPERIMENTS
from .sparse import DEFAULT_MAX_ITER, DEFAULT_TOL

logger = logging.getLogger(__name__)

THREADS_ENV = "SURF_RD_THREADS"
MESH_KINDS = ("icosphere", "fibonacci", "file")
METHODS = ("sfem", "lsfem")
SOLVERS = ("cg", "direct")


@dataclass(frozen=True)
class MeshSettings:
    kind: str = "icosphere"
    level: int = 3
    points: Optional[int] = None
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in MESH_KINDS:
            raise ConfigError(f"mesh.kind must be one of {MESH_KINDS}, got {self.kind!r}")
        if self.kind == "fibonacci" and self.points is None:
            raise ConfigError("mesh.kind = 'fibonacci' needs mesh.points")
        if self.kind == "file" and not self.path:
            raise ConfigError("mesh.kind = 'file' needs mesh.path")


@dataclass(frozen=True)
class ModelSettings:
    experiment: str = "exp1"
    method: str = "lsfem"
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"model.experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.method not in METHODS:
            raise ConfigError(f"model.method must be one of {METHODS}, got {self.method!r}")

    @property
    def mass_mode(self) -> str:
        return "lumped" if self.method == "lsfem" else "consistent"


@dataclass(frozen=True)
class TimeSettings:
    tau: Optional[float] = None
    t_final: Optional[float] = None

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ConfigError(f"time.tau must be positive, got {self.tau}")
        if self.t_final is not None and not self.t_final > 0:
            raise ConfigError(f"time.t_final must be positive, got {self.t_final}")


@dataclass(frozen=True)
class SolverSettings:
    method: Optional[str] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.method is not None and self.method not in SOLVERS:
            raise ConfigError(f"solver.method must be one of {SOLVERS}, got {self.method!r}")
        if not self.tol > 0:
            raise ConfigError(f"solver.tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"solver.max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class OutputSettings:
    directory: Optional[str] = None
    snapshot_stride: int = 0

    def __post_init__(self):
        if self.snapshot_stride < 0:
            raise ConfigError(f"output.snapshot_stride must be >= 0, got {self.snapshot_stride}")


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSettings = field(default_factory=MeshSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    time: TimeSettings = field(default_factory=TimeSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def with_overrides(self, **sections: Mapping[str, Any]) -> "RunConfig":
        """Replace individual keys, e.g. with_overrides(time={"tau": 5e-4}); None values are ignored."""
        updated = {}
        for name, values in sections.items():
            current = getattr(self, name)
            changes = {k: v for k, v in values.items() if v is not None}
            updated[name] = replace(current, **changes) if changes else current
        return replace(self, **updated)


_SECTIONS = {
    "mesh": MeshSettings,
    "model": ModelSettings,
    "time": TimeSettings,
    "solver": SolverSettings,
    "output": OutputSettings,
}

_LINE = re.compile(r"line (\d+)")


def _section(name: str, values: Any):
    cls = _SECTIONS[name]
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _LINE.search(str(exc))
        raise ConfigError(str(exc), line=int(match.group(1)) if match else None) from exc
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    return RunConfig(**{name: _section(name, values) for name, values in data.items()})


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    config = parse_config(text)
    logger.info("loaded config %s", path)
    return config


def thread_limit(environ: Optional[Mapping[str, str]] = None) -> int:
    """Worker processes allowed for sweeps, from SURF_RD_THREADS (default 1)."""
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value

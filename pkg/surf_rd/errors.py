"""
surf_rd.errors - exception hierarchy shared by the library and the CLI.

Blow-up of a time integration is reported as a status on the simulation
result, not raised.
"""
from __future__ import annotations

from typing import Optional, Sequence


class SurfRdError(Exception):
    """Base class for every error raised by surf_rd."""


class MeshError(SurfRdError):
    def __init__(self, message: str, indices: Optional[Sequence[int]] = None):
        self.indices = list(indices) if indices is not None else []
        if self.indices:
            shown = ", ".join(str(i) for i in self.indices[:20])
            if len(self.indices) > 20:
                shown += ", ..."
            message = f"{message} (indices: {shown})"
        super().__init__(message)


class DimensionMismatchError(SurfRdError, ValueError):
    pass


class ConvergenceError(SurfRdError):
    def __init__(self, message: str, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, relative residual={residual:.3e})")


class SolverFailure(ConvergenceError):
    """A linear solve failed inside the time loop."""

    def __init__(self, step: int, cause: ConvergenceError):
        self.step = step
        SurfRdError.__init__(self, f"linear solve failed at step {step}: {cause}")
        self.iterations = cause.iterations
        self.residual = cause.residual


class KineticsError(SurfRdError):
    pass


class ConfigError(SurfRdError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AnalysisError(SurfRdError, ValueError):
    pass


class FieldError(SurfRdError, ValueError):
    """Non-finite or mis-shaped nodal data."""

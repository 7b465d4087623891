"""
surf_rd.output - run artifacts: CSV tables, legacy VTK snapshots, provenance.

Numbers in CSV files are written in scientific notation with six
significant digits (format "%.5e"), so identical runs give identical files.
"""
from __future__ import annotations

import csv
import json
import logging
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import scipy

from . import __version__
from .analysis import ConvergenceTable, RegionReport
from .assembly import FieldLike, field_values
from .errors import DimensionMismatchError, SurfRdError
from .mesh import SurfaceMesh
from .timestepper import SimulationResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
NUMBER_FORMAT = "%.5e"


def fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return NUMBER_FORMAT % value


def component_names(r: int) -> List[str]:
    base = ["U", "V", "W"]
    return base[:r] if r <= len(base) else [f"U{k}" for k in range(r)]


def _open(path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def write_vtk(mesh: SurfaceMesh, field: FieldLike, path: PathLike, title: str = "surf-rd field",
              names: Optional[Sequence[str]] = None) -> Path:
    """Legacy ASCII VTK: POLYDATA points and triangles, one SCALARS block per component."""
    values = field_values(field)
    if values.shape[1] != mesh.n_vertices:
        raise DimensionMismatchError(f"field has {values.shape[1]} nodes, mesh has {mesh.n_vertices}")
    names = list(names) if names is not None else component_names(values.shape[0])
    path = Path(path)
    with _open(path) as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        fh.write(f"POLYGONS {mesh.n_triangles} {4 * mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"POINT_DATA {mesh.n_vertices}\n")
        for name, component in zip(names, values):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(f"{v:.17g}" for v in component))
            fh.write("\n")
    logger.debug("wrote %s", path)
    return path


def read_vtk_points(path: PathLike) -> np.ndarray:
    """The POINTS block of a legacy ASCII VTK file as an (N, 3) array."""
    tokens = Path(path).read_text(encoding="utf-8").split()
    try:
        start = tokens.index("POINTS")
        n = int(tokens[start + 1])
        coords = np.array(tokens[start + 3:start + 3 + 3 * n], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise SurfRdError(f"{path}: no readable POINTS block ({exc})") from exc
    if coords.size != 3 * n:
        raise SurfRdError(f"{path}: POINTS block is truncated")
    return coords.reshape(n, 3)


def write_run_csv(result: SimulationResult, path: PathLike) -> Path:
    """Per-step extrema: step,t,min_U,max_U[,min_V,max_V],iterations."""
    r = len(result.initial_minima)
    names = component_names(r)
    header = ["step", "t"] + [f"{kind}_{n}" for n in names for kind in ("min", "max")] + ["iterations"]
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerow([0, fmt(0.0)] + _interleave(result.initial_minima, result.initial_maxima) + [0])
        for rec in result.records:
            writer.writerow([rec.step, fmt(rec.time)] + _interleave(rec.minima, rec.maxima) + [rec.iterations])
    return Path(path)


def _interleave(lows: Sequence[float], highs: Sequence[float]) -> List[str]:
    out = []
    for low, high in zip(lows, highs):
        out += [fmt(low), fmt(high)]
    return out


def write_error(error: float, path: PathLike) -> Path:
    with _open(path) as fh:
        fh.write(fmt(error) + "\n")
    return Path(path)


def write_convergence_csv(table: ConvergenceTable, path: PathLike,
                          status: Optional[Sequence[str]] = None) -> Path:
    """Columns i,N,h,error,rate[,status]; the first row and failed rows have an empty rate."""
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "N", "h", "error", "rate"] + (["status"] if status is not None else []))
        for k, row in enumerate(table.rows):
            line = [row.level, row.n_nodes, fmt(row.h), fmt(row.error), fmt(row.rate)]
            if status is not None:
                line.append(status[k])
            writer.writerow(line)
    return Path(path)


def write_extrema_csv(rows: Iterable[Mapping[str, Any]], r: int, path: PathLike) -> Path:
    """Columns i,N,h,method,min_U,max_U[,min_V,max_V],status; one row per (level, method)."""
    names = component_names(r)
    header = ["i", "N", "h", "method"] + [f"{kind}_{n}" for n in names for kind in ("min", "max")] + ["status"]
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            report: Optional[RegionReport] = row.get("report")
            if report is not None:
                extrema = _interleave(report.minima, report.maxima)
            else:
                extrema = [""] * (2 * r)
            writer.writerow([row["level"], row["n_nodes"], fmt(row["h"]), row["method"]] + extrema + [row["status"]])
    return Path(path)


def provenance(**settings: Any) -> Dict[str, Any]:
    return {
        "tool": "surf-rd",
        "version": __version__,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "settings": settings,
    }


def write_provenance(directory: PathLike, **settings: Any) -> Path:
    path = Path(directory) / "provenance.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(provenance(**settings), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def write_temporal_csv(taus: Sequence[float], table: ConvergenceTable, path: PathLike) -> Path:
    """Columns i,tau,error,rate for a step-size study; the reference run is not a row."""
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "tau", "error", "rate"])
        for k, (tau, row) in enumerate(zip(taus, table.rows)):
            writer.writerow([k, fmt(tau), fmt(row.error), fmt(row.rate)])
    return Path(path)

#!/usr/bin/env python3
"""
surf_rd.cli - command-line runner for the reaction-diffusion experiments.

Usage:
  surf-rd mesh gen --kind icosphere --level 3 --out mesh.off
  surf-rd mesh gen --kind fibonacci --points 2000 --out mesh.off
  surf-rd mesh check mesh.off
  surf-rd run --experiment exp3 --level 3 --method sfem --out out/exp3
  surf-rd sweep --experiment exp1 --levels 2..6 --method both --out out/exp1
  surf-rd tau-sweep --experiment exp1 --level 4 --taus 4e-2,2e-2,1e-2,5e-3 --out out/tau
  surf-rd verify --level 3

Every subcommand accepts -v/-vv and --config FILE (TOML, see surf_rd.config);
command-line flags override file values.

Exit codes: 0 success, 2 configuration error, 3 linear solver failure,
4 blow-up detected, 1 any other error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (ConvergenceRow, ConvergenceTable, RegionReport, convergence_rates, linf_l2_error,
                       region_violation_scan, temporal_convergence, verify_matrix_properties)
from .assembly import assemble_operators, interpolate
from .config import RunConfig, load_config, thread_limit
from .errors import ConfigError, ConvergenceError, SurfRdError
from .mesh import (SurfaceMesh, check_angle_condition, generate_fibonacci_delaunay, generate_icosphere,
                   mesh_size, mesh_statistics, read_off, validate, write_off)
from .output import (fmt, write_convergence_csv, write_error, write_extrema_csv, write_provenance,
                     write_run_csv, write_temporal_csv, write_vtk)
from .presets import ExperimentPreset, get_preset, with_final_time
from .timestepper import SimulationConfig, SimulationResult, imex_euler_run

logger = logging.getLogger("surf_rd.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_BLOW_UP = 4


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger().setLevel(level)
    logging.captureWarnings(True)


# ---------------------------------------------------------------- plumbing

def build_mesh(config: RunConfig) -> SurfaceMesh:
    settings = config.mesh
    if settings.kind == "icosphere":
        mesh = generate_icosphere(settings.level)
    elif settings.kind == "fibonacci":
        mesh = generate_fibonacci_delaunay(settings.points)
    else:
        mesh = read_off(settings.path)
    logger.info("mesh %s: N=%d F=%d h=%.4e", settings.kind, mesh.n_vertices, mesh.n_triangles, mesh_size(mesh))
    return mesh


def resolve_preset(config: RunConfig) -> ExperimentPreset:
    preset = get_preset(config.model.experiment, config.model.parameters)
    if config.time.t_final is not None:
        preset = with_final_time(preset, config.time.t_final)
    return preset


@dataclass
class RunOutcome:
    level: int
    n_nodes: int
    h: float
    method: str
    tau: float
    status: str
    error: Optional[float] = None
    report: Optional[RegionReport] = None
    steps: int = 0
    elapsed_seconds: float = 0.0

    def summary(self) -> Dict[str, Any]:
        return {
            "level": self.level,
            "n_nodes": self.n_nodes,
            "h": self.h,
            "method": self.method,
            "status": self.status,
            "report": self.report,
        }


def execute_run(config: RunConfig, out_dir: Optional[Path] = None) -> RunOutcome:
    """One simulation with its artifacts; raises on configuration or solver failure."""
    preset = resolve_preset(config)
    mesh = build_mesh(config)
    method = config.model.method
    if method == "lsfem":
        # warns on edges violating the angle condition
        check_angle_condition(mesh)
    operators = assemble_operators(mesh)
    h = mesh_size(mesh)
    tau = config.time.tau if config.time.tau is not None else preset.tau_for(h)
    solver = config.solver.method or preset.solver
    sim = SimulationConfig(
        diffusion=preset.diffusion,
        tau=tau,
        t_final=preset.t_final,
        mass_mode=config.model.mass_mode,
        solver=solver,
        tol=config.solver.tol,
        max_iter=config.solver.max_iter,
    )
    u0 = interpolate(mesh, preset.initial_values)

    on_step = None
    stride = config.output.snapshot_stride
    if out_dir is not None and stride:
        snapshots = out_dir / "snapshots"

        def on_step(n, t, field):
            if n % stride == 0 or n == sim.n_steps:
                write_vtk(mesh, field, snapshots / f"step_{n:06d}.vtk", title=f"{preset.name} t={t:.6g}")

    result = imex_euler_run(mesh, operators, preset.model, u0, sim, exact=preset.exact, on_step=on_step)
    error = linf_l2_error(result, preset.exact, mesh, operators) if preset.exact is not None else None
    report = region_violation_scan(result, preset.rectangle) if preset.rectangle is not None else None

    outcome = RunOutcome(
        level=config.mesh.level if config.mesh.kind == "icosphere" else -1,
        n_nodes=mesh.n_vertices,
        h=h,
        method=method.upper(),
        tau=tau,
        status=_status(result, report),
        error=error,
        report=report,
        steps=result.steps_completed,
        elapsed_seconds=result.elapsed_seconds,
    )
    if out_dir is not None:
        _write_run_artifacts(out_dir, config, preset, sim, mesh, result, outcome)
    return outcome


def _status(result: SimulationResult, report: Optional[RegionReport]) -> str:
    if result.blew_up:
        return "blow_up"
    if report is not None and report.violated:
        return "violated"
    return "ok"


def _write_run_artifacts(out_dir: Path, config: RunConfig, preset: ExperimentPreset, sim: SimulationConfig,
                         mesh: SurfaceMesh, result: SimulationResult, outcome: RunOutcome) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_csv(result, out_dir / "run.csv")
    if outcome.error is not None:
        write_error(outcome.error, out_dir / "error.txt")
    if outcome.report is not None:
        with open(out_dir / "region.json", "w", encoding="utf-8") as fh:
            json.dump(asdict(outcome.report), fh, indent=2)
            fh.write("\n")
    write_vtk(mesh, result.final, out_dir / "final.vtk", title=f"{preset.name} final")
    write_provenance(
        out_dir,
        experiment=preset.name,
        parameters=preset.parameters,
        method=config.model.method,
        mesh=asdict(config.mesh),
        n_nodes=mesh.n_vertices,
        h=outcome.h,
        tau=sim.tau,
        t_final=sim.t_final,
        solver={"method": sim.solver, "tol": sim.tol, "max_iter": sim.max_iter},
        status=outcome.status,
        steps_completed=result.steps_completed,
    )


def _sweep_job(config: RunConfig, out_dir: Optional[str]) -> RunOutcome:
    # runs in a worker process; failures become row statuses
    try:
        return execute_run(config, Path(out_dir) if out_dir else None)
    except SurfRdError as exc:
        logger.warning("level %d (%s) failed: %s", config.mesh.level, config.model.method, exc)
        try:
            mesh = generate_icosphere(config.mesh.level)
            n_nodes, h = mesh.n_vertices, mesh_size(mesh)
        except SurfRdError:
            n_nodes, h = 0, float("nan")
        return RunOutcome(config.mesh.level, n_nodes, h, config.model.method.upper(), float("nan"),
                          status=f"failed: {exc}")


def parse_levels(text: str) -> List[int]:
    """'2..6' or '0,2,4'."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            levels = list(range(lo, hi + 1))
        else:
            levels = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse levels {text!r}; use A..B or a comma list") from None
    if len(levels) < 2:
        raise ConfigError(f"a sweep needs at least two levels, got {levels}")
    return levels


def parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def convergence_table(outcomes: Sequence[RunOutcome], method: str) -> ConvergenceTable:
    """Rates between consecutive successful rows; failed rows keep an empty rate."""
    good = [o for o in outcomes if o.error is not None and np.isfinite(o.error) and o.error > 0]
    rates: Dict[int, Optional[float]] = {}
    if len(good) >= 2:
        table = convergence_rates([o.error for o in good], [o.h for o in good],
                                  levels=[o.level for o in good], n_nodes=[o.n_nodes for o in good], method=method)
        rates = {row.level: row.rate for row in table.rows}
    rows = [ConvergenceRow(o.level, o.n_nodes, o.h, o.error if o.error is not None else float("nan"),
                           rates.get(o.level)) for o in outcomes]
    return ConvergenceTable(rows=rows, method=method)


# ---------------------------------------------------------------- config

def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    kind = getattr(args, "kind", None)
    if getattr(args, "mesh", None):
        kind = "file"
    elif getattr(args, "points", None) is not None and kind is None:
        kind = "fibonacci"
    method = getattr(args, "method", None)
    return config.with_overrides(
        mesh={"kind": kind, "level": getattr(args, "level", None), "points": getattr(args, "points", None),
              "path": getattr(args, "mesh", None)},
        # "both" is resolved per job by cmd_sweep
        model={"experiment": getattr(args, "experiment", None), "method": None if method == "both" else method},
        time={"tau": getattr(args, "tau", None), "t_final": getattr(args, "tfinal", None)},
        solver={"method": getattr(args, "solver", None), "tol": getattr(args, "tol", None),
                "max_iter": getattr(args, "max_iter", None)},
        output={"directory": getattr(args, "out", None), "snapshot_stride": getattr(args, "stride", None)},
    )


# ---------------------------------------------------------------- commands

def cmd_mesh_gen(args: argparse.Namespace) -> int:
    if args.kind == "fibonacci":
        if args.points is None:
            raise ConfigError("--kind fibonacci needs --points")
        mesh = generate_fibonacci_delaunay(args.points)
    else:
        if args.level is None:
            raise ConfigError("--kind icosphere needs --level")
        mesh = generate_icosphere(args.level)
    write_off(mesh, args.out)
    print(f"Wrote {args.out}: N={mesh.n_vertices} F={mesh.n_triangles} h={fmt(mesh_size(mesh))}")
    return EXIT_OK


def cmd_mesh_check(args: argparse.Namespace) -> int:
    mesh = read_off(args.path)
    report = validate(mesh)
    stats = mesh_statistics(mesh)
    for key, value in stats.items():
        print(f"{key:>18}: {value}")
    print(f"{'valid':>18}: {report.ok}")
    for failure in report.failures:
        print(f"  - {failure}")
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out_dir = Path(config.output.directory) if config.output.directory else None
    outcome = execute_run(config, out_dir)
    print(f"{config.model.experiment} {outcome.method} N={outcome.n_nodes} h={fmt(outcome.h)} "
          f"tau={fmt(outcome.tau)} steps={outcome.steps} status={outcome.status}")
    if outcome.error is not None:
        print(f"Linf(L2) error: {fmt(outcome.error)}")
    if outcome.report is not None:
        r = outcome.report
        print(f"minima {tuple(fmt(v) for v in r.minima)} maxima {tuple(fmt(v) for v in r.maxima)}")
        if r.violated:
            step, node, k = r.first_violation
            print(f"rectangle left at step {step}, node {node}, component {k}")
    if out_dir is not None:
        print(f"Wrote {out_dir}")
    return EXIT_BLOW_UP if outcome.status == "blow_up" else EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _config_from_args(args)
    if base.mesh.kind != "icosphere":
        raise ConfigError("sweeps run over icosphere levels")
    levels = parse_levels(args.levels)
    methods = ["sfem", "lsfem"] if args.method == "both" else [base.model.method]
    preset = resolve_preset(base)
    out_dir = Path(base.output.directory) if base.output.directory else None

    jobs = []
    for method in methods:
        for level in levels:
            config = base.with_overrides(mesh={"level": level}, model={"method": method})
            sub = str(out_dir / method / f"level{level}") if out_dir is not None else None
            jobs.append((config, sub))

    workers = min(thread_limit(), len(jobs))
    logger.info("sweep %s: %d runs on %d worker(s)", preset.name, len(jobs), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_job, *zip(*jobs)))
    else:
        outcomes = [_sweep_job(config, sub) for config, sub in jobs]

    if preset.report == "convergence":
        for method in methods:
            rows = [o for o in outcomes if o.method == method.upper()]
            table = convergence_table(rows, method.upper())
            _print_table(table, [o.status for o in rows])
            if out_dir is not None:
                name = "table.csv" if len(methods) == 1 else f"table_{method}.csv"
                write_convergence_csv(table, out_dir / name, status=[o.status for o in rows])
    else:
        _print_extrema(outcomes)
        if out_dir is not None:
            write_extrema_csv([o.summary() for o in outcomes], preset.r, out_dir / "extrema.csv")

    if out_dir is not None:
        write_provenance(out_dir, experiment=preset.name, parameters=preset.parameters, methods=methods,
                         levels=levels, t_final=preset.t_final, tau=preset.tau, solver=asdict(base.solver),
                         statuses=[o.status for o in outcomes])
        print(f"Wrote {out_dir}")
    return EXIT_OK


def cmd_tau_sweep(args: argparse.Namespace) -> int:
    base = _config_from_args(args)
    preset = resolve_preset(base)
    if preset.exact is None:
        raise ConfigError(f"{preset.name} has no exact solution; temporal study needs exp1 or exp4")
    taus = sorted(parse_floats(args.taus), reverse=True)
    if len(taus) < 3:
        raise ConfigError("tau-sweep needs at least three step sizes")
    mesh = build_mesh(base)
    operators = assemble_operators(mesh)
    u0 = interpolate(mesh, preset.initial_values)
    results = []
    for tau in taus:
        sim = SimulationConfig(diffusion=preset.diffusion, tau=tau, t_final=preset.t_final,
                               mass_mode=base.model.mass_mode, solver=base.solver.method or preset.solver,
                               tol=base.solver.tol, max_iter=base.solver.max_iter, snapshot_stride=1)
        results.append(imex_euler_run(mesh, operators, preset.model, u0, sim))
    table = temporal_convergence(results, operators, method=base.model.method.upper())
    print(f"{'i':>3} {'tau':>12} {'error':>12} {'rate':>12}")
    for k, (tau, row) in enumerate(zip(taus, table.rows)):
        print(f"{k:>3} {fmt(tau):>12} {fmt(row.error):>12} {fmt(row.rate):>12}")
    if base.output.directory:
        out_dir = Path(base.output.directory)
        write_temporal_csv(taus[:-1], table, out_dir / "tau_table.csv")
        write_provenance(out_dir, experiment=preset.name, method=base.model.method, n_nodes=mesh.n_vertices,
                         taus=taus, reference_tau=taus[-1], t_final=preset.t_final)
        print(f"Wrote {out_dir}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    mesh = build_mesh(config)
    operators = assemble_operators(mesh)
    s_values = parse_floats(args.s)
    report = verify_matrix_properties(mesh, operators, s_values, max_nodes=args.max_nodes)
    print(f"N={mesh.n_vertices} angle condition: {'pass' if report.angle_condition else 'FAIL'}")
    print(f"max off-diagonal stiffness entry: {fmt(report.max_offdiagonal)}")
    print(f"positive off-diagonals: {len(report.positive_offdiagonal_edges)} "
          f"(consistent with angle condition: {report.sign_pattern_consistent})")
    for s in report.min_entry:
        print(f"s={s:g}: min entry {fmt(report.min_entry[s])} "
              f"[{'pass' if report.nonnegative[s] else 'FAIL'}], row-sum error {fmt(report.row_sum_error[s])} "
              f"[{'pass' if report.row_sums_one[s] else 'FAIL'}]")
    return EXIT_OK if report.passed and report.angle_condition else EXIT_ERROR


def _print_table(table: ConvergenceTable, status: Sequence[str]) -> None:
    print(f"{table.method}")
    print(f"{'i':>3} {'N':>7} {'h':>12} {'error':>12} {'rate':>12}  status")
    for row, st in zip(table.rows, status):
        print(f"{row.level:>3} {row.n_nodes:>7} {fmt(row.h):>12} {fmt(row.error):>12} {fmt(row.rate):>12}  {st}")


def _print_extrema(outcomes: Sequence[RunOutcome]) -> None:
    for o in outcomes:
        extrema = ""
        if o.report is not None:
            extrema = " ".join(f"[{fmt(lo)}, {fmt(hi)}]" for lo, hi in zip(o.report.minima, o.report.maxima))
        print(f"{o.level:>3} {o.n_nodes:>7} {fmt(o.h):>12} {o.method:>6} {extrema}  {o.status}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    common.add_argument("--config", "-c", help="TOML run configuration")

    parser = argparse.ArgumentParser(prog="surf-rd", description="Lumped surface finite elements for "
                                     "reaction-diffusion systems on spheres.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_mesh = sub.add_parser("mesh", help="Generate or check meshes.")
    mesh_sub = p_mesh.add_subparsers(dest="mesh_cmd", required=True)
    p_gen = mesh_sub.add_parser("gen", parents=[common], help="Generate a sphere mesh as OFF.")
    p_gen.add_argument("--kind", choices=["icosphere", "fibonacci"], default="icosphere")
    p_gen.add_argument("--level", type=int)
    p_gen.add_argument("--points", type=int)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_mesh_gen)
    p_check = mesh_sub.add_parser("check", parents=[common], help="Validate an OFF mesh.")
    p_check.add_argument("path")
    p_check.set_defaults(func=cmd_mesh_check)

    def add_run_options(p: argparse.ArgumentParser, method_choices: Sequence[str]) -> None:
        p.add_argument("--experiment", "-e", choices=["exp1", "exp2", "exp3", "exp4"])
        p.add_argument("--method", "-m", choices=list(method_choices))
        p.add_argument("--tfinal", type=float)
        p.add_argument("--solver", choices=["cg", "direct"])
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int, dest="max_iter")
        p.add_argument("--out", "-o")

    p_run = sub.add_parser("run", parents=[common], help="Run one experiment on one mesh.")
    add_run_options(p_run, ["sfem", "lsfem"])
    p_run.add_argument("--level", type=int)
    p_run.add_argument("--kind", choices=["icosphere", "fibonacci"])
    p_run.add_argument("--points", type=int)
    p_run.add_argument("--mesh", help="OFF mesh file instead of a generated sphere")
    p_run.add_argument("--tau", type=float)
    p_run.add_argument("--stride", type=int, help="write a VTK snapshot every STRIDE steps")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", parents=[common], help="Run an experiment over icosphere levels.")
    add_run_options(p_sweep, ["sfem", "lsfem", "both"])
    p_sweep.add_argument("--levels", required=True, help="A..B or a comma list")
    p_sweep.set_defaults(func=cmd_sweep)

    p_tau = sub.add_parser("tau-sweep", parents=[common], help="Temporal convergence on a fixed mesh.")
    add_run_options(p_tau, ["sfem", "lsfem"])
    p_tau.add_argument("--level", type=int)
    p_tau.add_argument("--taus", required=True, help="comma list; the smallest is the reference")
    p_tau.set_defaults(func=cmd_tau_sweep)

    p_verify = sub.add_parser("verify", parents=[common], help="Matrix-property and angle-condition checks.")
    p_verify.add_argument("--level", type=int)
    p_verify.add_argument("--mesh", help="OFF mesh file instead of an icosphere")
    p_verify.add_argument("--s", default="1e-3,1e-1,1", help="comma list of shifts s")
    p_verify.add_argument("--max-nodes", type=int, default=3000, dest="max_nodes")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(getattr(args, "verbose", 0))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"Solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SurfRdError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

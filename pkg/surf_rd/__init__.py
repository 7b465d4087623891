"""
surf_rd - lumped surface finite elements for reaction-diffusion systems on closed surfaces.

Typical use:

    from surf_rd import generate_icosphere, assemble_operators, interpolate
    from surf_rd import SimulationConfig, imex_euler_run, get_preset

    preset = get_preset("exp2")
    mesh = generate_icosphere(3)
    ops = assemble_operators(mesh)
    u0 = interpolate(mesh, preset.initial_values)
    cfg = SimulationConfig(preset.diffusion, tau=1e-2, t_final=1.0, solver="direct")
    result = imex_euler_run(mesh, ops, preset.model, u0, cfg)
"""
__version__ = "0.2.0"

from .analysis import (ConvergenceTable, ExactSolution, RegionReport, convergence_rates, linf_l2_error,
                       rayleigh_quotient, region_violation_scan, temporal_convergence, verify_matrix_properties)
from .assembly import (FemOperators, NodalField, assemble_operators, interpolate, l2_norm, lumped_norm)
from .errors import (AnalysisError, ConfigError, ConvergenceError, DimensionMismatchError, FieldError,
                     KineticsError, MeshError, SolverFailure, SurfRdError)
from .kinetics import (ForcedSchnakenberg, FunctionKinetics, Rectangle, RosenzweigMacArthur, SemilinearDecay,
                       check_inward_flux, homogeneous_heat, max_stable_timestep)
from .mesh import (SurfaceMesh, check_angle_condition, generate_fibonacci_delaunay, generate_icosphere,
                   mesh_size, read_off, validate, write_off)
from .presets import ExperimentPreset, get_preset
from .sparse import CgSolver, DiagMatrix, DirectSolver, cg_solve, factorize_spd
from .timestepper import SimulationConfig, SimulationResult, imex_euler_run, imex_euler_step

__all__ = [
    "__version__",
    "AnalysisError", "CgSolver", "ConfigError", "ConvergenceError", "ConvergenceTable", "DiagMatrix",
    "DimensionMismatchError", "DirectSolver", "ExactSolution", "ExperimentPreset", "FemOperators",
    "FieldError", "ForcedSchnakenberg", "FunctionKinetics", "KineticsError", "MeshError", "NodalField",
    "Rectangle", "RegionReport", "RosenzweigMacArthur", "SemilinearDecay", "SimulationConfig",
    "SimulationResult", "SolverFailure", "SurfRdError", "SurfaceMesh",
    "assemble_operators", "cg_solve", "check_angle_condition", "check_inward_flux", "convergence_rates",
    "factorize_spd", "generate_fibonacci_delaunay", "generate_icosphere", "get_preset", "homogeneous_heat",
    "imex_euler_run", "imex_euler_step", "interpolate", "l2_norm", "linf_l2_error", "lumped_norm",
    "max_stable_timestep", "mesh_size", "rayleigh_quotient", "read_off", "region_violation_scan",
    "temporal_convergence", "validate", "verify_matrix_properties", "write_off",
]

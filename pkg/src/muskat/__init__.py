"""Pseudospectral boundary-integral simulator for the periodic Muskat problem."""
from .curve import Curve, arc_chord, reparametrize_uniform, tangent_speed_deviation
from .diagnostics import DiagnosticsRecord, energy_report, lambda_pointwise_check, sigma_field
from .dynamics import SimConfig, SimState, run, step
from .experiment import ExperimentSpec, emit_plot_data, execute, load_spec
from .kernels import FluidParams, birkhoff_rott, op_T, op_T_adjoint
from .vorticity import solve_vorticity, solve_vorticity_mollified

__all__ = [
    "Curve", "arc_chord", "reparametrize_uniform", "tangent_speed_deviation",
    "DiagnosticsRecord", "energy_report", "lambda_pointwise_check", "sigma_field",
    "SimConfig", "SimState", "run", "step",
    "ExperimentSpec", "emit_plot_data", "execute", "load_spec",
    "FluidParams", "birkhoff_rott", "op_T", "op_T_adjoint",
    "solve_vorticity", "solve_vorticity_mollified",
]

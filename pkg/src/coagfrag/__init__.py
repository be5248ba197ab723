"""Coagulation-fragmentation kinetics with perturbed constant kernels.

Modules: ``grid`` (size axis), ``kernels`` (rate kernels), ``operators``
(discrete coagulation and fragmentation), ``evolution`` (time stepping),
``equilibrium`` (stationary states), ``spectral`` (linearized operator),
``diagnostics`` (entropy, balance residual, rate fits), ``experiments``
(multi-run studies) and ``cli`` (configuration files and output formats).
"""
from .diagnostics import detailed_balance_residual, entropy, fit_exponential_rate
from .equilibrium import (closed_form_equilibrium, equilibrium_moment_audit, find_equilibrium,
                          uniqueness_distance)
from .evolution import EvolutionConfig, Trajectory, check_moment_bound, evolve, rhs
from .grid import (GridFunction, SizeGrid, build_grid, moment, sample, weighted_l1_norm)
from .initial import initial_data
from .kernels import KernelSpec, builtin_kernel, eval_coag, eval_frag, validate
from .operators import (OperatorAssembly, apply_coagulation, apply_fragmentation, assemble,
                        weak_pairing)
from .spectral import (assemble_linearized, project_zero_mass, solve_linearized,
                       spectral_abscissa)

__version__ = "0.1.0"

__all__ = [
    "GridFunction", "SizeGrid", "build_grid", "moment", "sample", "weighted_l1_norm",
    "KernelSpec", "builtin_kernel", "eval_coag", "eval_frag", "validate",
    "OperatorAssembly", "assemble", "apply_coagulation", "apply_fragmentation", "weak_pairing",
    "EvolutionConfig", "Trajectory", "evolve", "rhs", "check_moment_bound",
    "closed_form_equilibrium", "find_equilibrium", "equilibrium_moment_audit",
    "uniqueness_distance",
    "assemble_linearized", "project_zero_mass", "spectral_abscissa", "solve_linearized",
    "entropy", "detailed_balance_residual", "fit_exponential_rate", "initial_data",
]

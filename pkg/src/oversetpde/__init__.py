"""Energy-stable overset-grid coupling for linear hyperbolic systems.

Two partially overlapping component grids solve the same constant
coefficient hyperbolic system and exchange data through characteristic or
penalty interface conditions.  The package certifies the penalty coupling
matrices, runs 1D and 2D channel problems, and audits every run for
energy boundedness, conservation, and equivalence with the single-domain
solution.
"""

from .coupling import (
    InterfaceCoupling,
    OverlapCoupling,
    check_interface_coupling,
    check_overlap_coupling,
    complete_coupling,
    interface_quadratic_form,
    make_overlap_coupling,
    make_upwind_coupling,
)
from .geometry import build_grid_1d, build_overset_1d, build_overset_2d, transfer
from .linalg import (
    EigenDecomp,
    FluxSplit,
    HyperbolicSystem,
    char_inverse,
    char_split,
    char_transform,
    eig_sym,
    flux_split,
    hyperbolic_system,
    is_psd,
    normal_matrix,
)
from .solver1d import Problem1D, make_problem_1d, run_simulation, step_rk4
from .solver2d import Problem2D

__all__ = [
    "EigenDecomp",
    "FluxSplit",
    "HyperbolicSystem",
    "InterfaceCoupling",
    "OverlapCoupling",
    "Problem1D",
    "Problem2D",
    "char_inverse",
    "char_split",
    "char_transform",
    "check_interface_coupling",
    "check_overlap_coupling",
    "complete_coupling",
    "build_grid_1d",
    "build_overset_1d",
    "build_overset_2d",
    "eig_sym",
    "flux_split",
    "hyperbolic_system",
    "interface_quadratic_form",
    "is_psd",
    "make_overlap_coupling",
    "make_problem_1d",
    "make_upwind_coupling",
    "normal_matrix",
    "run_simulation",
    "step_rk4",
    "transfer",
]

__version__ = "0.1.0"

"""Multilevel correction multigrid for -Lap u + f(x,u) = lambda u, ||u||_L2 = 1, with P1 elements."""

from .assembly import (
    Nonlinearity,
    assemble_linearized_term,
    assemble_mass,
    assemble_nonlinear_load,
    assemble_stiffness,
    assemble_weighted_mass,
)
from .eigen import (
    EigenPair,
    ScfConfig,
    build_augmented_space,
    direct_solve_fine,
    normalize_and_orient,
    scf_solve,
    smallest_generalized_eigenpair,
    solve_augmented,
)
from .exceptions import *  # noqa: F401,F403
from .mesh import Domain, MeshHierarchy, MeshLevel, assemble_prolongation, build_hierarchy
from .multigrid import setup_mg, solve as mg_solve, vcycle
from .report import AnalyticReference, DirectReference, compare_to_reference, compute_rates
from .scheme import (
    LevelTrace,
    SchemeConfig,
    WorkCounter,
    correction_fixed_point,
    correction_newton,
    run_scheme,
    work_model_check,
)
from .study import RunConfig, evaluate_checks, load_config, parse_config, run_study

__version__ = "0.1.0"

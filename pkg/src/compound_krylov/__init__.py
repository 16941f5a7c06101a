"""Compound Krylov subspace solvers for affine parametric SPD systems."""

from .krylov import cg_solve, cheb_bound, direct_solve, gamma_coeffs
from .linearise import apply_linearisation, explicit_linearisation_power, normal_form
from .offline import (
    CutoffSchedule,
    ReducedBasis,
    build_basis,
    build_ck1,
    build_ck2,
    build_ck_exact,
    load_basis,
    save_basis,
    suggest_cutoffs,
    union_basis,
)
from .online import compress, galerkin_error, solve_online
from .paramsys import (
    DimensionError,
    NotPositiveDefiniteError,
    ParameterBox,
    ParametricMatrix,
    apply,
    evaluate,
    kron_power,
    load_family,
    save_family,
)

__version__ = "0.1.0"

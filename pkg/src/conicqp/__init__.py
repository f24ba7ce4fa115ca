"""Simplex-style QP algorithms for conic quadratic minimization over polyhedra.

Minimizes c'x + omega * sqrt(x'Qx) over {Ax = b, l <= x <= u} through a
perspective reformulation: outer loops (coordinate descent, accelerated
bisection) drive a scalar t while a warm-startable active-set QP engine
solves the inner subproblems, and a branch-and-bound driver handles the
integer-restricted counterpart.
"""

from .model import (
    ConicInstance,
    ConicSolveResult,
    InfeasibleError,
    KktCertificate,
    Polyhedron,
    QuadraticForm,
    SolveStatus,
    ZeroQuadraticError,
    dual_bound_estimate,
    eval_h,
    eval_objective,
    grad_f,
    kkt_residual,
    subproblem_objective,
)
from .qp import (
    QpProblem,
    QpSolution,
    QpStatus,
    StartMode,
    WorkingBasis,
    reoptimize_after_bound_change,
    solve_qp,
)
from .solvers import (
    BisectOptions,
    CdOptions,
    init_tmax_from_lp,
    solve_bisection,
    solve_cd,
)
from .bnb import (
    BnbNode,
    BnbOptions,
    BnbResult,
    BnbStatus,
    branch_select,
    enumeration_oracle,
    solve_bnb,
)
from .generate import (
    GenSpec,
    gen_cardinality,
    gen_costs,
    gen_grid_path,
    gen_quadratic,
    load_instance,
    save_instance,
)

__all__ = [
    "BisectOptions",
    "BnbNode",
    "BnbOptions",
    "BnbResult",
    "BnbStatus",
    "CdOptions",
    "ConicInstance",
    "ConicSolveResult",
    "GenSpec",
    "InfeasibleError",
    "KktCertificate",
    "Polyhedron",
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "QuadraticForm",
    "SolveStatus",
    "StartMode",
    "WorkingBasis",
    "ZeroQuadraticError",
    "branch_select",
    "dual_bound_estimate",
    "enumeration_oracle",
    "eval_h",
    "eval_objective",
    "gen_cardinality",
    "gen_costs",
    "gen_grid_path",
    "gen_quadratic",
    "grad_f",
    "init_tmax_from_lp",
    "kkt_residual",
    "load_instance",
    "reoptimize_after_bound_change",
    "save_instance",
    "solve_bisection",
    "solve_bnb",
    "solve_cd",
    "solve_qp",
    "subproblem_objective",
]

__version__ = "0.1.0"

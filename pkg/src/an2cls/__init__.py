"""Second-order unconstrained minimization with adaptive Newton and
negative-curvature steps, exact and Krylov step solvers, an analytic problem
suite and a benchmarking CLI."""

from .bench import (
    BenchRow,
    ProfileCurve,
    efficiency_metrics,
    emit_outputs,
    parse_rows,
    performance_profile,
    run_matrix,
)
from .core import (
    ConfigError,
    IterationRecord,
    ModelDecreaseError,
    SolveResult,
    SolveStatus,
    SolverConfig,
    compute_rho,
    default_config,
    kappa_k,
    solve,
    update_sigma,
)
from .linalg import (
    NumericalError,
    ShiftTooSmallError,
    SymTridiag,
    solve_shifted,
    solve_tridiag_shifted,
    sym_eig_min,
    tridiag_eig_min,
)
from .problems import (
    DerivativeCheck,
    EvaluationError,
    Problem,
    ProblemMetadata,
    builtin_suite,
    check_derivatives,
    eval_all,
    get_problem,
    hess_vec,
)
from .second_order import SOConfig, default_so_config, so_step, solve_so
from .stepcomp_exact import (
    Assumption0Report,
    StepKind,
    StepOutcome,
    stepcomp_exact,
    verify_assumption0,
)
from .stepcomp_krylov import (
    LanczosState,
    Preconditioner,
    SubspaceExhaustedError,
    build_subspace_negcurv,
    lanczos_extend,
    stepcomp_krylov,
    stepcomp_krylov_preconditioned,
)

__version__ = "0.1.0"

__all__ = [
    "Assumption0Report",
    "BenchRow",
    "ConfigError",
    "DerivativeCheck",
    "EvaluationError",
    "IterationRecord",
    "LanczosState",
    "ModelDecreaseError",
    "NumericalError",
    "Preconditioner",
    "Problem",
    "ProblemMetadata",
    "ProfileCurve",
    "SOConfig",
    "ShiftTooSmallError",
    "SolveResult",
    "SolveStatus",
    "SolverConfig",
    "StepKind",
    "StepOutcome",
    "SubspaceExhaustedError",
    "SymTridiag",
    "builtin_suite",
    "check_derivatives",
    "compute_rho",
    "default_config",
    "default_so_config",
    "efficiency_metrics",
    "emit_outputs",
    "eval_all",
    "get_problem",
    "hess_vec",
    "kappa_k",
    "lanczos_extend",
    "parse_rows",
    "performance_profile",
    "run_matrix",
    "solve",
    "solve_shifted",
    "solve_so",
    "solve_tridiag_shifted",
    "so_step",
    "stepcomp_exact",
    "stepcomp_krylov",
    "stepcomp_krylov_preconditioned",
    "sym_eig_min",
    "tridiag_eig_min",
    "update_sigma",
    "verify_assumption0",
    "build_subspace_negcurv",
]

"""Two-decoder vector Gaussian rate-distortion with decoder side information.

Closed-form optimal rates for componentwise-MSE and scaled-identity
distortion constraints, a structured minimax program for trace constraints,
the hierarchy of converse bounds, and a randomized verification harness for
the supporting matrix lemmas.
"""

__version__ = "0.1.0"

from .achievability import (
    AchievableScheme,
    RateReport,
    construct_scheme_mse,
    construct_scheme_sc,
    rate_ach_general,
    rate_mse_closed,
    rate_sc_closed,
)
from .enhancement import EnhancedSideInfo, build_enhanced, build_hat_observation
from .lower_bounds import (
    AuxTriple,
    BoundKind,
    BoundTag,
    SearchConfig,
    analytic_converse,
    check_feasible,
    mlb_inner_search,
    r_lo_pair,
)
from .model import (
    CanonicalForm,
    MseDiag,
    ProblemInstance,
    ScaledIdentity,
    Trace,
    canonicalize,
    detect_degraded,
    validate,
)
from .trace_solver import (
    SolverConfig,
    TraceVars,
    check_trace_feasible,
    grid_oracle,
    solve_maximin_swapped,
    solve_minimax,
    trace_objectives,
)

__all__ = [
    "AchievableScheme",
    "AuxTriple",
    "BoundKind",
    "BoundTag",
    "CanonicalForm",
    "EnhancedSideInfo",
    "MseDiag",
    "ProblemInstance",
    "RateReport",
    "ScaledIdentity",
    "SearchConfig",
    "SolverConfig",
    "Trace",
    "TraceVars",
    "analytic_converse",
    "build_enhanced",
    "build_hat_observation",
    "canonicalize",
    "check_feasible",
    "check_trace_feasible",
    "construct_scheme_mse",
    "construct_scheme_sc",
    "detect_degraded",
    "grid_oracle",
    "mlb_inner_search",
    "r_lo_pair",
    "rate_ach_general",
    "rate_mse_closed",
    "rate_sc_closed",
    "solve_maximin_swapped",
    "solve_minimax",
    "trace_objectives",
    "validate",
]

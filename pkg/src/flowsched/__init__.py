"""Flow-based local search for two-size restricted assignment makespan minimization.

Jobs have size 1 ("big") or epsilon ("small") and may only run on an
eligible subset of machines.  The package provides the layered local search
driven by a binary search over the makespan guess, a bipartite slot-matching
baseline, their combination, and brute-force oracles used for verification.
"""

from flowsched.instance import Instance, Job, Schedule, makespan, tau_candidates, validate
from flowsched.numerics import Params, make_params, sqrt_bounds, verify_params
from flowsched.search import TauTooSmall, local_search
from flowsched.solvers import (
    SolveReport,
    binary_search_solve,
    combined_solve,
    initial_big_assignment,
    matching_solve,
    solve_with_tau,
)

__all__ = [
    "Instance",
    "Job",
    "Params",
    "Schedule",
    "SolveReport",
    "TauTooSmall",
    "binary_search_solve",
    "combined_solve",
    "initial_big_assignment",
    "local_search",
    "make_params",
    "makespan",
    "matching_solve",
    "solve_with_tau",
    "sqrt_bounds",
    "tau_candidates",
    "validate",
    "verify_params",
]

__version__ = "0.1.0"

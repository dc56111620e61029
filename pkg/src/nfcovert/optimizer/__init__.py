"""Covert sum-rate maximisation by SCA and alternating optimisation."""
from .ao import AOResult, Audit, OptimizerTrace, TRACE_COLUMNS, ao_joint, audit_state
from .baseline import baseline_beamformers
from .complexity import complexity_estimate, complexity_from_trace
from .sca import Instance, evaluate, project_unit_modulus, restore_unit_modulus, sca_bs_loop
from .solver import INFEASIBLE, MAX_ITERATIONS, OPTIMAL, solve_convex
from .subproblems import SubproblemBS, SubproblemRIS, build_bs_subproblem, build_ris_subproblem

__all__ = [
    "AOResult", "Audit", "OptimizerTrace", "TRACE_COLUMNS", "ao_joint", "audit_state",
    "baseline_beamformers", "complexity_estimate", "complexity_from_trace", "Instance",
    "evaluate", "project_unit_modulus", "restore_unit_modulus", "sca_bs_loop",
    "INFEASIBLE", "MAX_ITERATIONS", "OPTIMAL", "solve_convex", "SubproblemBS",
    "SubproblemRIS", "build_bs_subproblem", "build_ris_subproblem",
]

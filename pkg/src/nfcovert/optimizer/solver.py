"""Solver-independent entry point for the convex subproblems.

Subproblems are expressed in cvxpy and handed to an interior-point conic
solver (Clarabel by default).  Callers only see a status string and the
variable values.
"""
from __future__ import annotations

import cvxpy as cp

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible"

DPP_PARAMETER_LIMIT = 20_000

_STATUS = {
    cp.OPTIMAL: OPTIMAL,
    cp.OPTIMAL_INACCURATE: OPTIMAL,
    cp.USER_LIMIT: MAX_ITERATIONS,
    cp.INFEASIBLE: INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: INFEASIBLE,
    cp.UNBOUNDED: INFEASIBLE,
    cp.UNBOUNDED_INACCURATE: INFEASIBLE,
}


def solver_options(solver: str, tol_feas: float, tol_opt: float, max_iter: int) -> dict:
    if solver == "CLARABEL":
        return dict(tol_feas=tol_feas * 1e-2, tol_gap_abs=tol_opt * 1e-2,
                    tol_gap_rel=tol_opt * 1e-2, max_iter=max_iter)
    if solver == "SCS":
        return dict(eps=tol_opt * 1e-2, max_iters=max_iter * 100)
    return {}


def _fallbacks(solver: str) -> list[dict]:
    """Extra settings tried in turn when the interior-point method stalls."""
    if solver == "CLARABEL":
        return [{}, dict(max_step_fraction=0.9),
                dict(iterative_refinement_reltol=1e-10, iterative_refinement_max_iter=50),
                dict(max_step_fraction=0.8, iterative_refinement_max_iter=50)]
    return [{}]


def solve_convex(subproblem, solver: str = "CLARABEL", tol_feas: float = 1e-6,
                 tol_opt: float = 1e-6, max_iter: int = 200):
    """Solve a convex program.

    ``subproblem`` is either a ``cvxpy.Problem`` or an object exposing one as
    ``.problem``.  Returns ``(solution, status)`` where ``solution`` maps
    variable names to values (``None`` unless a point is available) and
    ``status`` is one of ``"optimal"``, ``"max-iterations"``, ``"infeasible"``.
    """
    problem = getattr(subproblem, "problem", subproblem)
    opts = solver_options(solver, tol_feas, tol_opt, max_iter)
    # a parametrised compile costs memory ~ (#parameters x #nonzeros); large
    # instances are cheaper to recompile with the parameters frozen
    if sum(p.size for p in problem.parameters()) > DPP_PARAMETER_LIMIT:
        opts["ignore_dpp"] = True
    for extra in _fallbacks(solver):
        try:
            problem.solve(solver=solver, **opts, **extra)
            break
        except cp.error.SolverError:
            continue
    else:
        return None, MAX_ITERATIONS
    status = _STATUS.get(problem.status, MAX_ITERATIONS)
    if status == INFEASIBLE or problem.value is None:
        return None, status
    solution = {v.name(): v.value for v in problem.variables()}
    solution["objective"] = float(problem.value)
    return solution, status

"""Plain depth-first branch-and-bound, the baseline for the evolutionary search.

Branches on the first fractional integer variable, explores the floor child
first, prunes on infeasibility and on bounds no better than the incumbent.
No cuts, no heuristics, no node presolve.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, lp_relaxation
from .simplex import MAX_ITER, LpStatus, solve_lp

log = logging.getLogger(__name__)

INT_TOL = 1e-6
DEFAULT_LP_CAP = 50_000_000


class BnbStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    BUDGET_EXHAUSTED = "budget-exhausted"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class BnbResult:
    status: BnbStatus
    best_objective: float | None
    best_genome: np.ndarray | None
    best_cont: np.ndarray | None
    lps_solved: int
    root_bound: float | None = None


def solve_bnb(
    p: ProblemInstance,
    lp_cap: int = DEFAULT_LP_CAP,
    *,
    floor_first: bool = True,
    int_tol: float = INT_TOL,
    max_iter: int = MAX_ITER,
) -> BnbResult:
    """Solve ``p`` exactly (within ``lp_cap`` LP solves).

    Objective values are in the instance's stored sense, so a maximisation
    form instance reports maximisation values.
    """
    relax = lp_relaxation(p)
    sign = 1.0 if p.maximize else -1.0
    n = p.n_int
    stack = [(p.lower_int.copy(), p.upper_int.copy())]
    lps = 0
    best_val = -math.inf  # in maximisation terms
    best_x: np.ndarray | None = None
    root_bound = None
    exhausted = False
    skipped = 0

    while stack:
        if lps >= lp_cap:
            exhausted = True
            break
        lo_i, hi_i = stack.pop()
        lower = np.concatenate([lo_i, p.lower_cont])
        upper = np.concatenate([hi_i, p.upper_cont])
        sol = solve_lp(relax.with_bounds(lower, upper), max_iter=max_iter)
        lps += 1
        if sol.status is LpStatus.INFEASIBLE:
            continue
        if sol.status is LpStatus.UNBOUNDED:
            # an unbounded node relaxation means the MIP is unbounded or infeasible; report it
            return BnbResult(BnbStatus.UNBOUNDED, sign * math.inf, None, None, lps, sign * math.inf)
        if sol.status is LpStatus.ITERATION_LIMIT:
            skipped += 1
            log.warning("iteration limit at B&B node %d; node dropped", lps)
            continue
        value = sign * sol.objective
        if root_bound is None:
            root_bound = sol.objective
        if best_x is not None and value <= best_val + 1e-9 * max(1.0, abs(best_val)):
            continue
        x = sol.primal_values
        xi = x[:n]
        frac = np.abs(xi - np.round(xi)) > int_tol
        if not frac.any():
            best_val, best_x = value, x.copy()
            continue
        j = int(np.flatnonzero(frac)[0])
        f = xi[j]
        down_hi = hi_i.copy()
        down_hi[j] = math.floor(f)
        up_lo = lo_i.copy()
        up_lo[j] = math.ceil(f)
        children = [(lo_i, down_hi), (up_lo, hi_i)]
        if floor_first:
            children.reverse()
        stack.extend(children)

    if skipped:
        log.warning("%d B&B nodes dropped at the iteration limit; optimality not guaranteed", skipped)
    if best_x is None:
        status = BnbStatus.BUDGET_EXHAUSTED if exhausted else BnbStatus.INFEASIBLE
        return BnbResult(status, None, None, None, lps, root_bound)
    status = BnbStatus.BUDGET_EXHAUSTED if exhausted else BnbStatus.OPTIMAL
    return BnbResult(
        status,
        sign * best_val,
        np.round(best_x[:n]).astype(np.int64),
        best_x[n:],
        lps,
        root_bound,
    )

"""Dense bounded-variable two-phase primal simplex.

Every row i becomes an equality with a logical variable r_i that carries the
row's bounds::

    A_i x - r_i + a+_i - a-_i = 0,   row_lower_i <= r_i <= row_upper_i

a+ exists for rows with a finite lower side and a- for rows with a finite
upper side.  Phase I minimises the sum of the artificials, which is exactly
the total constraint violation of the best point within the variable
bounds; phase II pins the artificials to zero and optimises the objective.
Nonbasic variables sit at a bound (or at zero when free); bound flips are
handled natively instead of by extra rows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg.blas import dger

from .model import ResidualLp

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10
MAX_ITER = 20_000
REFACTOR_EVERY = 50

_BASIC, _LOWER, _UPPER, _FREE = 0, 1, 2, 3


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass
class Phase1Result:
    zeta: float
    artificials: np.ndarray


@dataclass
class LpSolution:
    status: LpStatus
    objective: float
    primal_values: np.ndarray
    iterations: int
    phase1: Phase1Result
    # objective of the last basis when the iteration budget ran out
    best_objective: float = math.nan

    @property
    def zeta(self) -> float:
        return self.phase1.zeta


@dataclass
class PivotEvent:
    phase: int
    iteration: int
    entering: int
    leaving: int | None
    step: float
    objective: float
    rule: str


TraceFn = Callable[[PivotEvent], None]


class IterationLimit(Exception):
    pass


@dataclass
class _State:
    # structural block; logical and artificial columns are signed unit vectors
    a: np.ndarray
    unit_row: np.ndarray
    unit_sign: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    x: np.ndarray
    state: np.ndarray
    basis: np.ndarray
    binv: np.ndarray
    n_struct: int
    art_rows: np.ndarray
    iterations: int = 0
    since_refactor: int = 0
    trace: TraceFn | None = None
    max_iter: int = MAX_ITER
    bland: bool = field(default=False)


def _initial_state(lp: ResidualLp, max_iter: int, trace: TraceFn | None) -> _State:
    a_struct = np.asarray(lp.matrix, dtype=float)
    m, k = lp.m, lp.n_vars
    row_lo, row_hi = lp.row_bounds()
    lo_s = np.asarray(lp.lower, dtype=float)
    hi_s = np.asarray(lp.upper, dtype=float)

    x_s = np.where(np.isfinite(lo_s), lo_s, np.where(np.isfinite(hi_s), hi_s, 0.0))
    st_s = np.where(np.isfinite(lo_s), _LOWER, np.where(np.isfinite(hi_s), _UPPER, _FREE))
    activity = a_struct @ x_s if k else np.zeros(m)

    plus_rows = np.flatnonzero(np.isfinite(row_lo))
    minus_rows = np.flatnonzero(np.isfinite(row_hi))
    art_rows = np.concatenate([plus_rows, minus_rows])
    n_art = len(art_rows)
    unit_row = np.concatenate([np.arange(m), art_rows])
    unit_sign = np.concatenate([-np.ones(m), np.ones(len(plus_rows)), -np.ones(len(minus_rows))])
    lo = np.concatenate([lo_s, row_lo, np.zeros(n_art)])
    hi = np.concatenate([hi_s, row_hi, np.full(n_art, math.inf)])
    x = np.concatenate([x_s, np.zeros(m + n_art)])
    state = np.concatenate([st_s, np.full(m + n_art, _LOWER)])

    plus_col = {r: k + m + i for i, r in enumerate(plus_rows)}
    minus_col = {r: k + m + len(plus_rows) + i for i, r in enumerate(minus_rows)}
    basis = np.empty(m, dtype=np.intp)
    sign = np.empty(m)
    for i in range(m):
        v = activity[i]
        if row_lo[i] - FEAS_TOL <= v <= row_hi[i] + FEAS_TOL:
            j, s, val = k + i, -1.0, v
        elif v > row_hi[i]:
            x[k + i], state[k + i] = row_hi[i], _UPPER
            j, s, val = minus_col[i], -1.0, v - row_hi[i]
        else:
            x[k + i], state[k + i] = row_lo[i], _LOWER
            j, s, val = plus_col[i], 1.0, row_lo[i] - v
        basis[i] = j
        sign[i] = s
        x[j] = val
        state[j] = _BASIC
    # logicals that are basic have no resting bound; unbounded nonbasic logicals never occur
    return _State(
        a=a_struct.reshape(m, k), unit_row=unit_row, unit_sign=unit_sign, lo=lo, hi=hi, x=x, state=state, basis=basis, binv=np.asfortranarray(np.diag(1.0 / sign)),
        n_struct=k, art_rows=art_rows, trace=trace, max_iter=max_iter,
    )


def _matvec(s: _State, v: np.ndarray) -> np.ndarray:
    k = s.a.shape[1]
    out = s.a @ v[:k]
    np.add.at(out, s.unit_row, s.unit_sign * v[k:])
    return out


def _full_inverse(s: _State) -> np.ndarray:
    m, k = s.a.shape
    b = np.zeros((m, m))
    for pos, j in enumerate(s.basis):
        if j < k:
            b[:, pos] = s.a[:, j]
        else:
            b[s.unit_row[j - k], pos] = s.unit_sign[j - k]
    return np.linalg.inv(b)


def _block_inverse(s: _State) -> np.ndarray | None:
    """Inverse exploiting the unit columns; only the structural kernel is inverted.

    Returns None when the unit columns share a row (the basis is then
    singular or awkward and the full inverse decides).
    """
    m, k = s.a.shape
    is_unit = s.basis >= k
    unit_pos = np.flatnonzero(is_unit)
    struct_pos = np.flatnonzero(~is_unit)
    rows_u = s.unit_row[s.basis[unit_pos] - k]
    sign_u = s.unit_sign[s.basis[unit_pos] - k]
    covered = np.zeros(m, dtype=bool)
    covered[rows_u] = True
    if covered.sum() != len(unit_pos):
        return None
    rows_s = np.flatnonzero(~covered)
    cols_s = s.basis[struct_pos]
    binv = np.zeros((m, m))
    if len(struct_pos):
        kernel_inv = np.linalg.inv(s.a[np.ix_(rows_s, cols_s)])
        binv[np.ix_(struct_pos, rows_s)] = kernel_inv
        coupling = s.a[np.ix_(rows_u, cols_s)] @ binv[struct_pos]
    else:
        coupling = np.zeros((len(unit_pos), m))
    coupling[np.arange(len(unit_pos)), rows_u] -= 1.0
    binv[unit_pos] = -coupling / sign_u[:, None]
    return binv


def _refactor(s: _State) -> None:
    binv = _block_inverse(s)
    if binv is None:
        binv = _full_inverse(s)
    s.binv = np.asfortranarray(binv)
    x_n = s.x.copy()
    x_n[s.basis] = 0.0
    s.x[s.basis] = -s.binv @ _matvec(s, x_n)
    s.since_refactor = 0


def _optimize(s: _State, cost: np.ndarray, phase: int) -> LpStatus:
    """Run primal simplex iterations on ``min cost.x`` from the current basis."""
    m, k = s.a.shape
    window = max(2 * m, 1)
    degenerate = 0
    s.bland = False
    movable = s.hi > s.lo
    while True:
        y = cost[s.basis] @ s.binv
        d = cost.copy()
        d[:k] -= y @ s.a
        d[k:] -= y[s.unit_row] * s.unit_sign
        st = s.state
        inc = ((st == _LOWER) | (st == _FREE)) & (d < -OPT_TOL) & movable
        dec = ((st == _UPPER) | (st == _FREE)) & (d > OPT_TOL) & movable
        elig = inc | dec
        if not elig.any():
            return LpStatus.OPTIMAL
        if s.iterations >= s.max_iter:
            raise IterationLimit
        if s.bland:
            j = int(np.flatnonzero(elig)[0])
        else:
            j = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
        direction = 1.0 if inc[j] else -1.0

        w = s.binv @ s.a[:, j] if j < k else s.unit_sign[j - k] * s.binv[:, s.unit_row[j - k]]
        alpha = direction * w
        xb = s.x[s.basis]
        lob, hib = s.lo[s.basis], s.hi[s.basis]
        ratios = np.full(m, math.inf)
        down = alpha > PIVOT_TOL
        up = alpha < -PIVOT_TOL
        with np.errstate(invalid="ignore"):
            ratios[down] = (xb[down] - lob[down]) / alpha[down]
            ratios[up] = (hib[up] - xb[up]) / -alpha[up]
        ratios = np.where(np.isnan(ratios), math.inf, np.maximum(ratios, 0.0))
        theta = float(ratios.min()) if m else math.inf
        flip = s.hi[j] - s.lo[j]

        if math.isinf(theta) and math.isinf(flip):
            return LpStatus.UNBOUNDED
        if flip <= theta:
            theta, leave_pos = flip, None
        else:
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if s.bland:
                leave_pos = int(ties[np.argmin(s.basis[ties])])
            else:
                leave_pos = int(ties[np.argmax(np.abs(alpha[ties]))])

        s.x[s.basis] = xb - theta * alpha
        s.x[j] += direction * theta
        if leave_pos is None:
            s.state[j] = _UPPER if direction > 0 else _LOWER
            s.x[j] = s.hi[j] if direction > 0 else s.lo[j]
            leaving = None
        else:
            leaving = int(s.basis[leave_pos])
            if alpha[leave_pos] > 0:
                s.x[leaving], s.state[leaving] = s.lo[leaving], _LOWER
            else:
                s.x[leaving], s.state[leaving] = s.hi[leaving], _UPPER
            s.basis[leave_pos] = j
            s.state[j] = _BASIC
            row = s.binv[leave_pos] / w[leave_pos]
            # in-place rank-one update of the column-major inverse
            s.binv = dger(-1.0, w, row, a=s.binv, overwrite_a=True)
            s.binv[leave_pos] = row
            s.since_refactor += 1
            if s.since_refactor >= REFACTOR_EVERY:
                _refactor(s)

        s.iterations += 1
        if theta <= 1e-12:
            degenerate += 1
            if degenerate >= window:
                s.bland = True
        else:
            degenerate = 0
        if s.trace is not None:
            s.trace(PivotEvent(phase, s.iterations, j, leaving, theta, float(cost @ s.x),
                               "bland" if s.bland else "dantzig"))


def _phase1_summary(s: _State, m: int) -> Phase1Result:
    k = s.n_struct
    art = np.zeros(m)
    np.add.at(art, s.art_rows, np.maximum(s.x[k + m:], 0.0))
    return Phase1Result(zeta=float(art.sum()), artificials=art)


def _run_phase1(s: _State, m: int) -> Phase1Result:
    k = s.n_struct
    if np.any(s.basis >= k + m):
        cost = np.zeros(len(s.x))
        cost[k + m:] = 1.0
        _optimize(s, cost, phase=1)
    return _phase1_summary(s, m)


def _no_columns(lp: ResidualLp) -> LpSolution:
    # nothing to pivot on: the violation of each row is read off directly
    row_lo, row_hi = lp.row_bounds()
    art = np.maximum(row_lo, 0.0) + np.maximum(-row_hi, 0.0)
    zeta = float(art.sum())
    p1 = Phase1Result(zeta, art)
    if zeta > FEAS_TOL:
        return LpSolution(LpStatus.INFEASIBLE, math.nan, np.zeros(0), 0, p1)
    return LpSolution(LpStatus.OPTIMAL, float(lp.constant_term), np.zeros(0), 0, p1)


def solve_lp(lp: ResidualLp, max_iter: int = MAX_ITER, trace: TraceFn | None = None) -> LpSolution:
    """Solve ``lp``; the returned objective includes ``lp.constant_term``.

    Infeasible problems come back with the phase-I optimum (sum of
    violations and its per-row split) in ``phase1``.
    """
    if lp.n_vars == 0:
        return _no_columns(lp)
    m, k = lp.m, lp.n_vars
    if np.any(np.asarray(lp.lower) > np.asarray(lp.upper)):
        raise ValueError("inconsistent variable bounds")
    s = _initial_state(lp, max_iter, trace)
    c = np.asarray(lp.objective, dtype=float)
    try:
        p1 = _run_phase1(s, m)
    except IterationLimit:
        p1 = _phase1_summary(s, m)
        return LpSolution(LpStatus.ITERATION_LIMIT, math.nan, s.x[:k].copy(), s.iterations, p1)
    if p1.zeta > FEAS_TOL:
        return LpSolution(LpStatus.INFEASIBLE, math.nan, s.x[:k].copy(), s.iterations, p1)

    s.hi[k + m:] = 0.0
    cost = np.zeros(len(s.x))
    cost[:k] = -c if lp.maximize else c
    try:
        status = _optimize(s, cost, phase=2)
    except IterationLimit:
        best = float(c @ s.x[:k]) + lp.constant_term
        return LpSolution(LpStatus.ITERATION_LIMIT, math.nan, s.x[:k].copy(), s.iterations, p1, best_objective=best)
    xs = s.x[:k].copy()
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status, math.inf if lp.maximize else -math.inf, xs, s.iterations, p1)
    return LpSolution(status, float(c @ xs) + lp.constant_term, xs, s.iterations, p1)


def phase1(lp: ResidualLp, max_iter: int = MAX_ITER) -> Phase1Result:
    """Minimum total constraint violation of ``lp`` within its variable bounds."""
    if lp.n_vars == 0:
        return _no_columns(lp).phase1
    s = _initial_state(lp, max_iter, None)
    return _run_phase1(s, lp.m)

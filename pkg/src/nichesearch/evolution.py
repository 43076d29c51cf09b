"""Individuals, their evaluation, and the genetic operators.

Only the integer variables are evolved.  An individual is evaluated by
fixing its genome and solving the remaining LP over the continuous
variables; if that LP is infeasible the individual is scored by the minimum
total constraint violation instead.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ProblemInstance, fix_integers
from .simplex import MAX_ITER, LpStatus, solve_lp

log = logging.getLogger(__name__)

# span used for mutation towards an infinite bound
UNBOUNDED_SPAN = 10.0
FALLBACK_WIDTH = 100


@dataclass(frozen=True)
class Fitness:
    """Objective value when feasible, total violation when not."""

    feasible: bool
    value: float

    @property
    def kind(self) -> str:
        return "feasible" if self.feasible else "infeasible"

    def key(self) -> tuple[int, float]:
        # larger key is better
        return (1, self.value) if self.feasible else (0, -self.value)


def better(a: Fitness, b: Fitness) -> bool:
    """True when ``a`` is strictly better than ``b``."""
    return a.key() > b.key()


def compare(a: Fitness, b: Fitness) -> int:
    """1 if ``a`` is better, -1 if ``b`` is better, 0 if equivalent.

    Feasible beats infeasible; feasibles compare by objective (larger wins),
    infeasibles by violation (smaller wins).
    """
    ka, kb = a.key(), b.key()
    return (ka > kb) - (ka < kb)


@dataclass
class Individual:
    genome: np.ndarray
    fitness: Fitness | None = None
    cont_values: np.ndarray | None = None
    evaluated: bool = False

    def clone(self) -> "Individual":
        # genomes are never mutated in place, so sharing arrays is safe
        return dataclasses.replace(self)

    def genome_key(self) -> bytes:
        return self.genome.tobytes()


@dataclass(frozen=True)
class OperatorParams:
    """Probabilities (``*_p``) and intensities (``*_s``) of meiosis, crossover, mutation."""

    nu_p: float
    chi_p: float
    mu_p: float
    nu_s: float
    chi_s: float
    mu_s: float

    def __post_init__(self):
        for name, v in dataclasses.asdict(self).items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "OperatorParams":
        return cls(*(float(v) for v in rng.random(6)))


# ---------------------------------------------------------------------------
# evaluation


class LpBudgetExhausted(Exception):
    pass


class TargetReached(Exception):
    pass


@dataclass
class TraceEvent:
    lp_index: int
    fitness: Fitness
    genome: np.ndarray


class Evaluator:
    """Evaluates individuals and keeps the run-wide LP counter and incumbent.

    Every LP actually solved bumps ``lp_count``.  An individual whose
    ``evaluated`` flag is set is never solved again.  With ``memoize`` a
    genome seen before reuses its stored result without an LP; the search
    path is unchanged (evaluation consumes no randomness), only the counter
    and the runtime differ.

    Each strict improvement of the best fitness seen is appended to
    ``trace``.  When ``target`` is given, reaching a feasible value within
    relative tolerance ``1e-6`` of it raises :class:`TargetReached`.
    """

    def __init__(
        self,
        problem: ProblemInstance,
        *,
        lp_budget: int | None = None,
        memoize: bool = False,
        target: float | None = None,
        max_iter: int = MAX_ITER,
        on_improvement: Callable[[TraceEvent], None] | None = None,
    ):
        self.problem = problem
        self.lp_budget = lp_budget
        self.memo: dict[bytes, tuple[Fitness, np.ndarray]] | None = {} if memoize else None
        self.target = target
        self.max_iter = max_iter
        self.on_improvement = on_improvement
        self.lp_count = 0
        self.incumbent: Individual | None = None
        self.trace: list[TraceEvent] = []

    def count_lp(self) -> int:
        if self.lp_budget is not None and self.lp_count >= self.lp_budget:
            raise LpBudgetExhausted
        self.lp_count += 1
        return self.lp_count

    def _solve(self, genome: np.ndarray) -> tuple[Fitness, np.ndarray]:
        self.count_lp()
        sol = solve_lp(fix_integers(self.problem, genome), max_iter=self.max_iter)
        if sol.status is LpStatus.OPTIMAL:
            return Fitness(True, sol.objective), sol.primal_values
        if sol.status is LpStatus.INFEASIBLE:
            return Fitness(False, sol.zeta), sol.primal_values
        if sol.status is LpStatus.UNBOUNDED:
            log.warning("unbounded residual LP at LP %d", self.lp_count)
            return Fitness(True, sol.objective), sol.primal_values
        log.warning("iteration limit in residual LP at LP %d; scored as worst infeasible", self.lp_count)
        return Fitness(False, math.inf), sol.primal_values

    def evaluate(self, ind: Individual) -> Fitness:
        if ind.evaluated:
            return ind.fitness
        key = ind.genome_key()
        if self.memo is not None and key in self.memo:
            ind.fitness, ind.cont_values = self.memo[key]
            ind.evaluated = True
            return ind.fitness
        fitness, cont = self._solve(ind.genome)
        if self.memo is not None:
            self.memo[key] = (fitness, cont)
        ind.fitness, ind.cont_values, ind.evaluated = fitness, cont, True
        self._observe(ind)
        return fitness

    def _observe(self, ind: Individual) -> None:
        if self.incumbent is None or better(ind.fitness, self.incumbent.fitness):
            self.incumbent = ind.clone()
            event = TraceEvent(self.lp_count, ind.fitness, ind.genome.copy())
            self.trace.append(event)
            if self.on_improvement is not None:
                self.on_improvement(event)
            if self.target is not None and reaches(ind.fitness, self.target):
                raise TargetReached


def reaches(fitness: Fitness, optimum: float, rtol: float = 1e-6) -> bool:
    """Whether a fitness attains a known (maximisation-form) optimum."""
    return fitness.feasible and fitness.value >= optimum - rtol * max(1.0, abs(optimum))


# ---------------------------------------------------------------------------
# initialisation


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def init_genome(
    relax_values: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    rng: np.random.Generator,
    convention: str = "printed",
) -> np.ndarray:
    """Round an LP-relaxation point to a random neighbouring lattice point.

    With the ``printed`` convention a value is rounded *down* with
    probability equal to its fractional part; ``complement`` rounds down
    with probability one minus the fractional part.
    """
    x = np.asarray(relax_values, dtype=float)
    snapped = np.round(x)
    x = np.where(np.abs(x - snapped) < 1e-9, snapped, x)
    fl = np.floor(x)
    frac = x - fl
    if convention == "printed":
        p_down = frac
    elif convention == "complement":
        p_down = np.where(frac > 0, 1.0 - frac, 0.0)
    else:
        raise ValueError(f"unknown rounding convention {convention!r}")
    down = rng.random(len(x)) < p_down
    genes = np.where(down | (frac == 0), fl, fl + 1)
    return np.clip(genes, lower, upper).astype(np.int64)


def fallback_genome(lower: np.ndarray, upper: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform genes in ``[lower, min(upper, lower + 100)]`` for when the relaxation fails."""
    anchor = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper - FALLBACK_WIDTH, 0.0))
    top = np.minimum(upper, anchor + FALLBACK_WIDTH)
    return np.floor(anchor + rng.random(len(anchor)) * (top - anchor + 1)).clip(anchor, top).astype(np.int64)


# ---------------------------------------------------------------------------
# genetic operators


def mutation_delta(intensity: float, u: float | np.ndarray) -> float | np.ndarray:
    """Perturbation size in [0, 1) for uniform ``u``; mean is s^2 / (s^2 + 1)."""
    return 1.0 - u ** (intensity * intensity)


def mutate_gene(gene: int, lower: float, upper: float, intensity: float, rng: np.random.Generator) -> int:
    """Move ``gene`` up or down (equiprobably) by a scaled delta.

    The delta is scaled by the distance to the bound in the chosen
    direction, or by ``max(10, |gene|)`` towards an infinite bound.
    """
    up = rng.random() < 0.5
    delta = mutation_delta(intensity, rng.random())
    span = (upper - gene) if up else (gene - lower)
    if math.isinf(span):
        span = max(UNBOUNDED_SPAN, abs(gene))
    new = _round_half_up(gene + delta * span if up else gene - delta * span)
    return int(min(max(new, lower), upper))


def reproduce(
    father: np.ndarray,
    mother: np.ndarray,
    params: OperatorParams,
    rng: np.random.Generator,
    lower: np.ndarray,
    upper: np.ndarray,
) -> np.ndarray:
    """Create a child genome: meiosis with crossover, then mutation.

    Meiosis walks the genome copying runs ("paths") from a parent chosen by
    a fair coin; each copied chromosome is pulled towards the other parent's
    value with probability ``chi_p``.  Run lengths are
    ``ceil(rand * (n - k) * (1 - nu_s))`` (at least 1) and the walk resumes
    after the run.  Re-drawing a run at every index instead would make paths
    overlap and is not done here.
    """
    n = len(father)
    rand = rng.random
    child = np.empty(n, dtype=np.int64)
    if rand() < params.nu_p:
        k = 0
        while k < n:
            length = max(1, math.ceil(rand() * (n - k) * (1.0 - params.nu_s)))
            src, other = (father, mother) if rand() < 0.5 else (mother, father)
            for i in range(k, min(n, k + length)):
                if rand() < params.chi_p:
                    v = src[i] + (other[i] - src[i]) * params.chi_s * rand()
                    child[i] = _round_half_up(v)
                else:
                    child[i] = src[i]
            k += length
    else:
        child[:] = father if rand() < 0.5 else mother
    for i in range(n):
        if rand() < params.mu_p:
            child[i] = mutate_gene(int(child[i]), lower[i], upper[i], params.mu_s, rng)
    return np.clip(child, lower, upper).astype(np.int64)


# ---------------------------------------------------------------------------
# local search


def _probe(ev: Evaluator, genome: np.ndarray, k: int, value: int, lower, upper) -> Individual | None:
    if value < lower[k] or value > upper[k]:
        return None
    g = genome.copy()
    g[k] = value
    ind = Individual(g)
    ev.evaluate(ind)
    return ind


def _beats(a: Individual, b: Individual | None) -> bool:
    return b is None or better(a.fitness, b.fitness)


def local_search(ind: Individual, ev: Evaluator, rng: np.random.Generator) -> Individual:
    """Hunt search: per coordinate, probe +-1 and then step geometrically.

    Coordinates are visited in a random order.  A coordinate is skipped
    when the current point strictly beats both neighbours; otherwise the
    walk moves in the better
    direction with steps 1, 2, 4, ... from the latest accepted point and
    stops at the first probe that does not improve.  The first probe of the
    walk is the neighbour already evaluated, so it is not solved again.
    Out-of-bounds probes count as non-improving.
    """
    lower, upper = ev.problem.lower_int, ev.problem.upper_int
    cur = ind
    for k in rng.permutation(len(ind.genome)):
        x = cur.genome
        up = _probe(ev, x, k, int(x[k]) + 1, lower, upper)
        down = _probe(ev, x, k, int(x[k]) - 1, lower, upper)
        if _beats(cur, up) and _beats(cur, down):
            continue
        if up is not None and (down is None or better(up.fitness, down.fitness)):
            step, cand = 1, up
        else:
            step, cand = -1, down
        while cand is not None and better(cand.fitness, cur.fitness):
            cur = cand
            step *= 2
            cand = _probe(ev, cur.genome, k, int(cur.genome[k]) + step, lower, upper)
    return cur

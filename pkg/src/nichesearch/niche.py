"""Niche search: a population split into competing sub-populations.

Two layers of evolution.  Inside a niche, individuals breed for as many
subgenerations as keep improving the niche's best.  Between niches, after
every round of breeding, some of the worst niches are extinguished and
replaced by a recombination of their population with a strong niche's.
Every new niche draws fresh operator parameters and a selectivity.

All randomness comes from one ``numpy.random.Generator`` seeded from the
configuration and consumed in a fixed order, so a seed fixes the run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import (
    Evaluator,
    Individual,
    LpBudgetExhausted,
    OperatorParams,
    TargetReached,
    TraceEvent,
    better,
    fallback_genome,
    init_genome,
    local_search,
    reaches,
    reproduce,
)
from .model import ProblemInstance, lp_relaxation
from .simplex import LpStatus, solve_lp

log = logging.getLogger(__name__)


@dataclass
class Niche:
    members: list[Individual]
    params: OperatorParams
    selectivity: float
    elitist: bool = True

    def __post_init__(self):
        if self.selectivity < 0:
            raise ValueError("selectivity must be >= 0")

    @property
    def best(self) -> Individual:
        return best_of(self.members)


def best_of(members: list[Individual]) -> Individual:
    best = members[0]
    for ind in members[1:]:
        if better(ind.fitness, best.fitness):
            best = ind
    return best


def ranked(members: list[Individual]) -> list[Individual]:
    """Members best-first; equal fitnesses keep their insertion order."""
    return sorted(members, key=lambda ind: ind.fitness.key(), reverse=True)


@dataclass
class SearchConfig:
    n_niches: int = 5
    pop_per_niche: int = 5
    n_generations: int = 250
    extinction_fraction: float = 0.35
    extinction_probability: float = 0.35
    lp_budget: int | None = None
    rng_seed: int = 0
    selectivity_max: float = 4.0
    # subgenerations without improvement before a niche stops breeding
    patience: int = 1
    max_subgenerations: int = 1000
    rounding: str = "printed"
    memoize: bool = False
    # known optimum (maximisation form): used for first-optimal bookkeeping
    optimum: float | None = None
    stop_at_optimum: bool = False

    def __post_init__(self):
        for name in ("n_niches", "pop_per_niche", "patience", "max_subgenerations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_generations < 0:
            raise ValueError("n_generations must be >= 0")
        for name in ("extinction_fraction", "extinction_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.stop_at_optimum and self.optimum is None:
            raise ValueError("stop_at_optimum needs an optimum")


@dataclass
class RunRecord:
    seed: int
    lps_total: int
    n_f: int | None
    n_o: int | None
    best: Individual | None
    trace: list[TraceEvent] = field(default_factory=list)
    generations: int = 0
    truncated: bool = False


# ---------------------------------------------------------------------------
# selection


def rank_weights(n: int, selectivity: float) -> np.ndarray:
    """Scaled fitness ``((n - rank) / n) ** selectivity`` for ranks 0..n-1."""
    return ((n - np.arange(n)) / n) ** selectivity


def roulette(cumulative: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random() * cumulative[-1]
    return min(int(np.searchsorted(cumulative, u, side="right")), len(cumulative) - 1)


def select_parent(niche: Niche, rng: np.random.Generator) -> Individual:
    """Roulette-wheel draw over rank-based scaled fitness."""
    order = ranked(niche.members)
    cum = np.cumsum(rank_weights(len(order), niche.selectivity))
    return order[roulette(cum, rng)]


def apply_elitism(niches: list[Niche]) -> list[Niche]:
    """Make each niche elitist unless an earlier niche has the same best genome."""
    seen: set[bytes] = set()
    for niche in niches:
        key = niche.best.genome_key()
        niche.elitist = key not in seen
        seen.add(key)
    return niches


def niche_order(niches: list[Niche]) -> list[int]:
    """Niche indices best-first by the fitness of their best member."""
    return sorted(range(len(niches)), key=lambda i: niches[i].best.fitness.key(), reverse=True)


def select_weak(niches: list[Niche], cfg: SearchConfig, rng: np.random.Generator) -> list[int]:
    """Worst ``ceil(fraction * N)`` niches are candidates; each dies with the given probability.

    Candidates are capped at N - 1 so a donor niche always survives.  (The
    alternative reading, one joint draw deciding the whole candidate set, is
    not used.)
    """
    n = len(niches)
    if n < 2:
        return []
    n_cand = min(n - 1, math.ceil(cfg.extinction_fraction * n - 1e-9))
    worst_first = niche_order(niches)[::-1]
    return [i for i in worst_first[:n_cand] if rng.random() < cfg.extinction_probability]


def select_strong(niches: list[Niche], excluded: set[int]) -> int:
    """Best niche whose best genome appears in no other niche.

    Falls back to the best niche overall when every best is shared.  Niches
    in ``excluded`` (the extinguishing ones) are never donors.
    """
    order = [i for i in niche_order(niches) if i not in excluded]
    for i in order:
        key = niches[i].best.genome_key()
        if not any(
            key == ind.genome_key() for j, other in enumerate(niches) if j != i for ind in other.members
        ):
            return i
    return order[0]


# ---------------------------------------------------------------------------
# niche operations


class _Context:
    """What the niche operations need besides the niches themselves."""

    def __init__(self, problem: ProblemInstance, cfg: SearchConfig, ev: Evaluator, rng: np.random.Generator,
                 relax_values: np.ndarray | None):
        self.problem = problem
        self.cfg = cfg
        self.ev = ev
        self.rng = rng
        self.relax_values = relax_values

    def new_individual(self) -> Individual:
        p = self.problem
        if self.relax_values is None:
            g = fallback_genome(p.lower_int, p.upper_int, self.rng)
        else:
            g = init_genome(self.relax_values, p.lower_int, p.upper_int, self.rng, self.cfg.rounding)
        ind = Individual(g)
        self.ev.evaluate(ind)
        return ind

    def new_params(self) -> tuple[OperatorParams, float]:
        params = OperatorParams.random(self.rng)
        return params, float(self.rng.uniform(0.0, self.cfg.selectivity_max))


def breed(niche: Niche, ctx: _Context) -> Niche:
    """Let one niche evolve until its best stops improving.

    Offspring identical to a parent inherit the parent's evaluation and skip
    local search.  An elitist niche puts its best back in place of the
    worst offspring whenever the offspring lost it.
    """
    p, rng, ev = ctx.problem, ctx.rng, ctx.ev
    lower, upper = p.lower_int, p.upper_int
    size = len(niche.members)
    weights = np.cumsum(rank_weights(size, niche.selectivity))
    population = niche.members
    best = niche.best
    stale = 0
    for _ in range(ctx.cfg.max_subgenerations):
        order = ranked(population)
        offspring = []
        for _ in range(size):
            p1 = order[roulette(weights, rng)]
            p2 = order[roulette(weights, rng)]
            genome = reproduce(p1.genome, p2.genome, niche.params, rng, lower, upper)
            if np.array_equal(genome, p1.genome):
                child = p1.clone()
            elif np.array_equal(genome, p2.genome):
                child = p2.clone()
            else:
                child = Individual(genome)
                ev.evaluate(child)
                child = local_search(child, ev, rng)
            offspring.append(child)
        if niche.elitist:
            key = best.genome_key()
            if all(ind.genome_key() != key for ind in offspring):
                worst = min(range(size), key=lambda i: (offspring[i].fitness.key(), -i))
                offspring[worst] = best.clone()
        population = offspring
        new_best = best_of(population)
        if better(new_best.fitness, best.fitness):
            best, stale = new_best, 0
        else:
            stale += 1
            if stale >= ctx.cfg.patience:
                break
    return Niche(population, niche.params, niche.selectivity, niche.elitist)


def recombine_niches(weak: Niche, strong: Niche, ctx: _Context) -> Niche:
    """New niche from the best distinct genomes of both populations.

    Short pools are topped up with freshly initialised individuals; the new
    niche gets new random parameters.
    """
    size = len(weak.members)
    chosen: list[Individual] = []
    seen: set[bytes] = set()
    for ind in ranked(weak.members + strong.members):
        key = ind.genome_key()
        if key not in seen:
            seen.add(key)
            chosen.append(ind.clone())
            if len(chosen) == size:
                break
    while len(chosen) < size:
        chosen.append(ctx.new_individual())
    params, selectivity = ctx.new_params()
    return Niche(chosen, params, selectivity)


def _first_feasible(trace: list[TraceEvent]) -> int | None:
    return next((e.lp_index for e in trace if e.fitness.feasible), None)


def _first_optimal(trace: list[TraceEvent], optimum: float | None) -> int | None:
    if optimum is None:
        return None
    return next((e.lp_index for e in trace if reaches(e.fitness, optimum)), None)


def run(problem: ProblemInstance, cfg: SearchConfig) -> RunRecord:
    """One niche-search run on a maximisation-form instance."""
    if not problem.maximize:
        raise ValueError("niche search expects a maximisation instance; use to_maximization")
    rng = np.random.default_rng(cfg.rng_seed)
    ev = Evaluator(
        problem,
        lp_budget=cfg.lp_budget,
        memoize=cfg.memoize,
        target=cfg.optimum if cfg.stop_at_optimum else None,
    )
    generations = 0
    truncated = False
    try:
        ev.count_lp()
        relax = solve_lp(lp_relaxation(problem))
        relax_values = relax.primal_values[: problem.n_int] if relax.status is LpStatus.OPTIMAL else None
        if relax_values is None:
            log.warning("LP relaxation is %s; initialising uniformly", relax.status.value)
        ctx = _Context(problem, cfg, ev, rng, relax_values)

        # parameters for every niche first, then the populations
        settings = [ctx.new_params() for _ in range(cfg.n_niches)]
        niches = [
            Niche([ctx.new_individual() for _ in range(cfg.pop_per_niche)], params, selectivity)
            for params, selectivity in settings
        ]

        for _ in range(cfg.n_generations):
            apply_elitism(niches)
            niches = [breed(niche, ctx) for niche in niches]
            weak = select_weak(niches, cfg, rng)
            replacements = {w: recombine_niches(niches[w], niches[select_strong(niches, set(weak))], ctx) for w in weak}
            for w, new in replacements.items():
                niches[w] = new
            generations += 1
    except LpBudgetExhausted:
        truncated = True
    except TargetReached:
        pass
    return RunRecord(
        seed=cfg.rng_seed,
        lps_total=ev.lp_count,
        n_f=_first_feasible(ev.trace),
        n_o=_first_optimal(ev.trace, cfg.optimum),
        best=ev.incumbent,
        trace=ev.trace,
        generations=generations,
        truncated=truncated,
    )

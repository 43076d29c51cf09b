"""End-to-end acceptance checks, one test per criterion.

Run alone with ``pytest tests/test_acceptance.py``; the verdict lines are
printed in the terminal summary.
"""

import itertools
import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from conftest import miplib_path
from crafted import crafted_instances
from lp_oracle import brute_force_lp, brute_force_zeta, random_lp
from nichesearch.bnb import BnbStatus, solve_bnb
from nichesearch.evolution import (
    Evaluator,
    Fitness,
    Individual,
    OperatorParams,
    better,
    compare,
    init_genome,
    mutation_delta,
)
from nichesearch.harness import Expectation, expected_lps, run_campaign
from nichesearch.model import dumps_mps, parse_mps, to_maximization
from nichesearch.niche import Niche, RunRecord, SearchConfig, _Context, breed, run
from nichesearch.simplex import FEAS_TOL, phase1, solve_lp

RUNS = 25


def _random_corpus(n=200):
    return [random_lp(np.random.default_rng(seed)) for seed in range(n)]


def test_simplex_matches_vertex_enumeration(criterion):
    with criterion(1, "simplex status/objective vs enumeration oracle, 200 LPs, < 10 s"):
        corpus = _random_corpus()
        start = time.perf_counter()
        solutions = [solve_lp(lp) for lp in corpus]
        elapsed = time.perf_counter() - start
        for i, (lp, sol) in enumerate(zip(corpus, solutions)):
            status, value = brute_force_lp(lp)
            assert sol.status.value == status, f"LP {i}: {sol.status.value} vs {status}"
            if status == "optimal":
                assert abs(sol.objective - value) <= 1e-6 * max(1.0, abs(value)), f"LP {i}"
        assert elapsed < 10.0, f"{elapsed:.1f} s"


def test_phase1_violation(criterion):
    with criterion(2, "phase-I zeta = 0 iff feasible; infeasible zeta vs oracle to 1e-6"):
        for i, lp in enumerate(_random_corpus()):
            zeta = phase1(lp).zeta
            oracle_feasible = brute_force_lp(lp)[0] != "infeasible"
            assert (zeta <= FEAS_TOL) == oracle_feasible, f"LP {i}"
            if not oracle_feasible:
                expected = brute_force_zeta(lp)
                assert abs(zeta - expected) <= 1e-6 * max(1.0, expected), f"LP {i}: {zeta} vs {expected}"


def _fitness_grid():
    values = [-2.0, -0.5, 0.0, 0.5, 2.0, math.inf]
    grid = [Fitness(True, v) for v in values]
    grid += [Fitness(False, v) for v in (0.0, 0.25, 1.0, 3.0)]
    rng = np.random.default_rng(0)
    while len(grid) < 50:
        grid.append(Fitness(bool(rng.random() < 0.5), float(rng.choice([-1.0, 0.5, 1.0, 2.0]))))
    return grid


def test_comparison_laws(criterion):
    with criterion(3, "strict weak ordering over 50^3 fitness triples; feasible beats infeasible"):
        grid = _fitness_grid()
        n = len(grid)
        gt = np.array([[better(a, b) for b in grid] for a in grid])
        cmp = np.array([[compare(a, b) for b in grid] for a in grid])
        assert np.array_equal(cmp, gt.astype(int) - gt.T.astype(int))
        assert not gt.diagonal().any()
        assert not (gt & gt.T).any()
        eq = ~gt & ~gt.T
        for i, j, k in itertools.product(range(n), repeat=3):
            if gt[i, j] and gt[j, k]:
                assert gt[i, k], (grid[i], grid[j], grid[k])
            if eq[i, j] and eq[j, k]:
                assert eq[i, k], (grid[i], grid[j], grid[k])
        for a, b in itertools.product(grid, grid):
            if a.feasible and not b.feasible:
                assert better(a, b)


@pytest.fixture(scope="module")
def crafted_campaigns(crafted_with_optima):
    start = time.perf_counter()
    out = []
    for p, value, _ in crafted_with_optima:
        q = to_maximization(p)
        target = value if p.maximize else -value
        cfg = SearchConfig(n_niches=5, pop_per_niche=5, n_generations=250, rng_seed=0,
                           memoize=True, optimum=target, stop_at_optimum=True)
        out.append((p, value, run_campaign(q, cfg, RUNS, target)))
    return out, time.perf_counter() - start


def test_search_recovers_crafted_optima(criterion, crafted_campaigns):
    with criterion(4, "niche search hits the optimum in >= 90% of 25 runs on 10 crafted MIPs, < 2 min"):
        campaigns, elapsed = crafted_campaigns
        assert len(campaigns) == 10
        for p, _, stats in campaigns:
            assert p.n_int <= 8 and p.n_cont <= 3
            assert stats.r_o >= math.ceil(0.9 * RUNS), f"{p.name}: {stats.r_o}/{RUNS}"
        assert elapsed < 120, f"{elapsed:.1f} s"


def test_bnb_and_search_agree(criterion, crafted_campaigns):
    with criterion(5, "B&B exact and search incumbents agree with enumeration on crafted MIPs"):
        campaigns, _ = crafted_campaigns
        for p, value, stats in campaigns:
            res = solve_bnb(p)
            assert res.status is BnbStatus.OPTIMAL, p.name
            assert abs(res.best_objective - value) <= 1e-6 * max(1.0, abs(value)), p.name
            target = value if p.maximize else -value
            for rec in stats.records:
                if rec.n_o is not None:
                    assert rec.best.fitness.feasible
                    assert abs(rec.best.fitness.value - target) <= 1e-6 * max(1.0, abs(target)), p.name


def _benchmark(name):
    path = miplib_path(name)
    if not path.exists():
        warnings.warn(f"{path} missing; benchmark check skipped")
        pytest.skip(f"{path.name} missing")
    return parse_mps(path)


@pytest.mark.slow
def test_benchmark_values(criterion):
    with criterion(6, "B&B p0033 = 3089, stein27 = 18; search stein27 -18 in >= 60%; vpm1 -20 at least once"):
        p0033, stein27, vpm1 = (_benchmark(n) for n in ("p0033", "stein27", "vpm1"))
        assert solve_bnb(p0033).best_objective == pytest.approx(3089)
        res = solve_bnb(stein27)
        assert res.status is BnbStatus.OPTIMAL
        assert res.best_objective == pytest.approx(18)

        q = to_maximization(stein27)
        cfg = SearchConfig(rng_seed=0, memoize=True, optimum=-18.0, stop_at_optimum=True)
        stats = run_campaign(q, cfg, RUNS, -18.0)
        assert stats.r_o >= math.ceil(0.6 * RUNS), f"stein27 {stats.r_o}/{RUNS}"

        q = to_maximization(vpm1)
        hits = 0
        for seed in range(RUNS):
            rec = run(q, SearchConfig(rng_seed=seed, memoize=True, optimum=-20.0, stop_at_optimum=True))
            if rec.n_o is not None:
                hits += 1
                break
        assert hits >= 1, "vpm1 never reached -20"


def _record(lps_total, n_f=None, n_o=None):
    return RunRecord(seed=0, lps_total=lps_total, n_f=n_f, n_o=n_o, best=None)


def test_statistics_fixtures(criterion):
    with criterion(7, "expected LP counts on hand-computed fixtures, including the no-success bound"):
        both = [_record(50, 4, 10), _record(70, 6, 10)]
        assert expected_lps(both, "feasible") == Expectation(5.0)
        assert expected_lps(both, "optimal") == Expectation(10.0)
        mixed = [_record(400, 20, 100), _record(500, 30)]
        assert expected_lps(mixed, "feasible") == Expectation(25.0)
        assert expected_lps(mixed, "optimal") == Expectation(600.0)
        none = [_record(300), _record(200)]
        assert expected_lps(none, "optimal") == Expectation(500.0, lower_bound=True)
        assert expected_lps([_record(26, 1, 1)], "optimal") == Expectation(1.0)


def test_seeded_solve_is_byte_identical(criterion, tmp_path):
    with criterion(8, "two `solve --seed 42` runs write byte-identical trace CSVs"):
        path = miplib_path("p0033")
        if not path.exists():
            path = tmp_path / "knap8.mps"
            path.write_text(dumps_mps(crafted_instances()[0]))
        outs = [tmp_path / "first.csv", tmp_path / "second.csv"]
        for out in outs:
            res = subprocess.run([sys.executable, "-m", "nichesearch", "solve", str(path), "--seed", "42",
                                  "--out", str(out)], capture_output=True, text=True, timeout=600)
            assert res.returncode == 0, res.stderr
        assert outs[0].read_bytes() == outs[1].read_bytes()
        assert len(outs[0].read_bytes().splitlines()) >= 3


def test_operator_distributions(criterion):
    with criterion(9, "rounding frequencies within 0.01 over 1e5 draws; mutation mean within 2%"):
        rng = np.random.default_rng(123)
        n = 100_000
        for x in (1.75, 0.3, -2.5):
            genes = init_genome(np.full(n, x), np.full(n, -10.0), np.full(n, 10.0), rng)
            p_down = x - math.floor(x)
            assert abs(np.mean(genes == math.floor(x)) - p_down) <= 0.01, x
            assert set(np.unique(genes)) <= {math.floor(x), math.floor(x) + 1}
        for s in (0.1, 0.3, 0.5, 0.8, 1.0):
            mean = float(np.mean(mutation_delta(s, rng.random(n))))
            exact = s * s / (s * s + 1)
            assert abs(mean - exact) <= 0.02 * exact, (s, mean, exact)


def test_clone_breeding_needs_no_lps(criterion):
    with criterion(10, "breeding clones with mutation disabled solves no LPs"):
        for p in crafted_instances():
            q = to_maximization(p)
            ctx = _Context(q, SearchConfig(), Evaluator(q), np.random.default_rng(0), np.full(q.n_int, 0.5))
            clone = Individual(np.clip(np.zeros(q.n_int, dtype=np.int64), q.lower_int, q.upper_int).astype(np.int64))
            ctx.ev.evaluate(clone)
            before = ctx.ev.lp_count
            for params in (OperatorParams(1, 1, 0, 0.5, 0.5, 0.5), OperatorParams(0.3, 0.7, 0, 0.2, 0.9, 1.0)):
                niche = Niche([clone.clone() for _ in range(5)], params, 1.0)
                breed(niche, ctx)
            assert ctx.ev.lp_count == before, p.name

import math

import numpy as np
import pytest

from crafted import make_mip
from nichesearch.bnb import BnbStatus, solve_bnb
from nichesearch.model import genome_in_bounds, parse_mps, to_maximization

INTEGRAL_ROOT = make_mip("tri", [1, 1], [], [[1, 0], [0, 1]], np.zeros((2, 0)), [2, 3], "LL", [0, 0], [5, 5])
KNAPSACK = make_mip("k2", [3, 2], [], [[2, 1]], np.zeros((1, 0)), [2], "L", [0, 0], [1, 1])


def test_integral_root_needs_one_lp():
    res = solve_bnb(INTEGRAL_ROOT)
    assert res.status is BnbStatus.OPTIMAL
    assert res.lps_solved == 1
    assert res.best_objective == pytest.approx(5.0)
    assert res.best_genome.tolist() == [2, 3]


def test_small_knapsack():
    res = solve_bnb(KNAPSACK)
    assert res.status is BnbStatus.OPTIMAL
    assert res.best_objective == pytest.approx(3.0)
    assert res.root_bound == pytest.approx(3.5)
    assert res.best_genome.tolist() == [1, 0]


def test_infeasible_instance():
    p = make_mip("inf", [1], [], [[2], [2]], np.zeros((2, 0)), [1, 1], "LG", [0], [3])
    res = solve_bnb(p)
    assert res.status is BnbStatus.INFEASIBLE
    assert res.best_objective is None


def test_unbounded_relaxation_reported():
    p = make_mip("unb", [1, 1], [], [[1, -1]], np.zeros((1, 0)), [2], "L", [0, 0], [math.inf, math.inf])
    assert solve_bnb(p).status is BnbStatus.UNBOUNDED


def test_matches_enumeration_on_crafted(crafted_with_optima):
    for p, value, _ in crafted_with_optima:
        res = solve_bnb(p)
        assert res.status is BnbStatus.OPTIMAL, p.name
        assert res.best_objective == pytest.approx(value, abs=1e-6), p.name
        assert genome_in_bounds(p, res.best_genome)


def test_bound_sandwich(crafted_with_optima):
    for p, value, _ in crafted_with_optima:
        res = solve_bnb(p)
        sign = 1 if p.maximize else -1
        assert sign * res.root_bound >= sign * value - 1e-6, p.name


def test_either_sense_gives_the_same_answer(crafted_with_optima):
    for p, value, _ in crafted_with_optima:
        if p.maximize:
            continue
        res = solve_bnb(to_maximization(p))
        assert res.best_objective == pytest.approx(-value, abs=1e-6), p.name


def test_branch_order_does_not_change_the_optimum(crafted_with_optima):
    for p, value, _ in crafted_with_optima[:4]:
        res = solve_bnb(p, floor_first=False)
        assert res.best_objective == pytest.approx(value, abs=1e-6), p.name


def test_lp_cap_is_respected(crafted_with_optima):
    p = crafted_with_optima[0][0]
    full = solve_bnb(p)
    assert full.lps_solved > 3
    res = solve_bnb(p, lp_cap=3)
    assert res.lps_solved == 3
    assert res.status is BnbStatus.BUDGET_EXHAUSTED


@pytest.mark.slow
def test_p0033(miplib):
    res = solve_bnb(parse_mps(miplib("p0033")))
    assert res.status is BnbStatus.OPTIMAL
    assert res.best_objective == pytest.approx(3089)

import io

import numpy as np
import pytest

from crafted import crafted_instances
from nichesearch.evolution import Fitness, TraceEvent
from nichesearch.harness import (
    CampaignStats,
    Expectation,
    campaign_report,
    expected_lps,
    lookup_optimum,
    read_manifest,
    read_trace,
    run_campaign,
    trace_text,
)
from nichesearch.model import to_maximization
from nichesearch.niche import RunRecord, SearchConfig


def rec(lps_total, n_f=None, n_o=None, seed=0):
    return RunRecord(seed=seed, lps_total=lps_total, n_f=n_f, n_o=n_o, best=None)


def test_all_runs_succeed_at_the_same_lp():
    assert expected_lps([rec(50, 10, 10), rec(70, 10, 10)], "optimal") == Expectation(10.0)


def test_failed_run_adds_its_total():
    e = expected_lps([rec(400, 100, 100), rec(500)], "optimal")
    assert e == Expectation(600.0)
    assert str(e) == "600"


def test_no_success_gives_a_lower_bound():
    e = expected_lps([rec(300), rec(200)], "feasible")
    assert e == Expectation(500.0, lower_bound=True)
    assert str(e) == ">500"


def test_single_immediate_success():
    assert expected_lps([rec(26, 1, 1)], "feasible") == Expectation(1.0)


def test_expectation_arguments_checked():
    with pytest.raises(ValueError):
        expected_lps([rec(1)], "best")
    with pytest.raises(ValueError):
        expected_lps([], "optimal")


def _campaign(runs=3, seed=11):
    p = to_maximization(crafted_instances()[0])
    return run_campaign(p, SearchConfig(n_generations=5, rng_seed=seed), runs, optimum=69.0)


def test_campaign_uses_consecutive_seeds():
    stats = _campaign()
    assert [r.seed for r in stats.records] == [11, 12, 13]
    assert stats.runs == 3 and 0 <= stats.r_o <= stats.r_f <= 3


def test_trace_round_trip_reproduces_statistics():
    stats = _campaign()
    text = trace_text(stats.records)
    again = CampaignStats.from_records(stats.name, read_trace(io.StringIO(text), 69.0), 69.0)
    assert again.summary_key() == stats.summary_key()
    assert trace_text(again.records) == text


def test_trace_rows():
    r = RunRecord(3, 40, 7, None, None,
                  [TraceEvent(2, Fitness(False, 1.5), np.zeros(1)), TraceEvent(7, Fitness(True, 0.1), np.zeros(1))],
                  truncated=True)
    lines = trace_text([r]).splitlines()
    assert lines == [
        "run,seed,lp_index,kind,value",
        "0,3,2,infeasible,1.5",
        "0,3,7,feasible,0.1",
        "0,3,40,end-truncated,",
    ]


def test_trace_without_closing_row_rejected():
    with pytest.raises(ValueError):
        read_trace(io.StringIO("run,seed,lp_index,kind,value\n0,1,2,feasible,3.0\n"))
    with pytest.raises(ValueError):
        read_trace(io.StringIO("a,b\n"))


def test_report_mentions_each_run():
    stats = _campaign(runs=2)
    text = campaign_report(stats, report=lambda v: v)
    assert "E[n_o]" in text
    assert len([ln for ln in text.splitlines() if ln.strip().startswith(("0 ", "1 "))]) >= 2


def test_manifest(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("name,optimum\n# comment\np0033, 3089\nvpm1,20\n\n")
    optima = read_manifest(path)
    assert optima == {"p0033": 3089.0, "vpm1": 20.0}
    assert lookup_optimum(optima, "P0033", "data/p0033.mps.gz") == 3089.0
    assert lookup_optimum(optima, "vpm1") == 20.0
    assert lookup_optimum(optima, "other") is None


def test_manifest_without_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,1.5\n")
    assert read_manifest(path) == {"a": 1.5}
    path.write_text("a,1.5\nb,x\n")
    with pytest.raises(ValueError):
        read_manifest(path)

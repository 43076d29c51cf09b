"""Evolutionary niche search for mixed-integer linear programs, with a simplex
LP engine, an MPS reader and a branch-and-bound baseline."""

from .bnb import BnbResult, BnbStatus, solve_bnb
from .evolution import Fitness, Individual, OperatorParams, compare, init_genome, local_search, reproduce
from .harness import CampaignStats, expected_lps, read_trace, run_campaign, write_trace
from .model import MpsError, ProblemInstance, ResidualLp, fix_integers, lp_relaxation, parse_mps, to_maximization
from .niche import RunRecord, SearchConfig, run
from .simplex import LpSolution, LpStatus, phase1, solve_lp

__all__ = [
    "BnbResult", "BnbStatus", "solve_bnb",
    "Fitness", "Individual", "OperatorParams", "compare", "init_genome", "local_search", "reproduce",
    "CampaignStats", "expected_lps", "read_trace", "run_campaign", "write_trace",
    "MpsError", "ProblemInstance", "ResidualLp", "fix_integers", "lp_relaxation", "parse_mps", "to_maximization",
    "RunRecord", "SearchConfig", "run",
    "LpSolution", "LpStatus", "phase1", "solve_lp",
]

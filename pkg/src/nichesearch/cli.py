"""Command-line entry point.

Exit codes: 0 success, 2 parse error (or bad usage), 3 campaign truncated
by the LP budget.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bnb import DEFAULT_LP_CAP, solve_bnb
from .harness import campaign_report, lookup_optimum, read_manifest, run_campaign, save_trace
from .model import MpsError, ProblemInstance, dumps_mps, lp_relaxation, parse_mps, to_maximization
from .niche import SearchConfig, run
from .simplex import LpStatus, PivotEvent, solve_lp

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_TRUNCATED = 3


def _instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("mps", help="MPS file (plain or .gz), or '-' for standard input")
    p.add_argument("--intorg-binary", action="store_true",
                   help="give integer columns without explicit bounds the upper bound 1 instead of +inf")


def _search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--niches", type=int, default=5)
    p.add_argument("--pop", type=int, default=5, help="individuals per niche")
    p.add_argument("--generations", type=int, default=250)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lp-budget", type=int, default=None, help="maximum LP solves per run")
    p.add_argument("--optimum", type=float, default=None,
                   help="known optimum in maximisation form (minimisation optima negated)")
    p.add_argument("--manifest", type=Path, default=None, help="CSV of name,optimum pairs")
    p.add_argument("--rounding-convention", choices=("printed", "complement"), default="printed")
    p.add_argument("--stop-at-optimum", action="store_true", help="end a run once the optimum is reached")
    p.add_argument("--memoize", action="store_true", help="reuse LP results of genomes seen before")
    p.add_argument("--out", type=Path, default=None, help="write the improvement trace CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nichesearch", description="Niche-search MIP solver and baselines.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="check an MPS file and print a summary")
    _instance_args(p)

    p = sub.add_parser("dump-mps", help="re-serialise an MPS file in canonical free format")
    _instance_args(p)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("solve", help="one niche-search run")
    _instance_args(p)
    _search_args(p)

    p = sub.add_parser("campaign", help="several seeded niche-search runs with statistics")
    _instance_args(p)
    _search_args(p)
    p.add_argument("--runs", type=int, default=25)

    p = sub.add_parser("bnb", help="depth-first branch-and-bound baseline")
    _instance_args(p)
    p.add_argument("--lp-cap", type=int, default=DEFAULT_LP_CAP)
    p.add_argument("--ceil-first", action="store_true", help="explore the ceiling child first")

    p = sub.add_parser("relax", help="solve the LP relaxation, optionally printing every pivot")
    _instance_args(p)
    p.add_argument("--trace", action="store_true")
    return parser


def _load(args, parser) -> ProblemInstance:
    if args.mps != "-" and not Path(args.mps).is_file():
        parser.error(f"no such file: {args.mps}")
    upper = 1.0 if args.intorg_binary else float("inf")
    source = sys.stdin.buffer if args.mps == "-" else args.mps
    return parse_mps(source, integer_default_upper=upper)


def _optimum(args, p: ProblemInstance) -> float | None:
    if args.optimum is not None:
        return args.optimum
    if args.manifest is not None:
        # manifest optima are in the file's own sense
        value = lookup_optimum(read_manifest(args.manifest), p.name, args.mps)
        if value is not None and p.was_minimization:
            value = -value
        return value
    return None


def _config(args, optimum: float | None) -> SearchConfig:
    return SearchConfig(
        n_niches=args.niches,
        pop_per_niche=args.pop,
        n_generations=args.generations,
        lp_budget=args.lp_budget,
        rng_seed=args.seed,
        rounding=args.rounding_convention,
        memoize=args.memoize,
        optimum=optimum,
        stop_at_optimum=args.stop_at_optimum and optimum is not None,
    )


def _describe(p: ProblemInstance, value: float) -> str:
    if p.was_minimization:
        return f"{value:.10g} (maximisation form; {p.report_value(value):.10g} as minimised)"
    return f"{value:.10g}"


def cmd_parse(args, p: ProblemInstance) -> int:
    print(p.summary())
    return EXIT_OK


def cmd_dump(args, p: ProblemInstance) -> int:
    text = dumps_mps(p)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_solve(args, p: ProblemInstance) -> int:
    q = to_maximization(p)
    rec = run(q, _config(args, _optimum(args, q)))
    if args.out is not None:
        save_trace([rec], args.out)
    best = rec.best
    print(f"instance    {q.name}")
    print(f"LPs solved  {rec.lps_total}")
    print(f"generations {rec.generations}{' (LP budget reached)' if rec.truncated else ''}")
    print(f"first feasible LP  {rec.n_f if rec.n_f is not None else '-'}")
    print(f"first optimal LP   {rec.n_o if rec.n_o is not None else '-'}")
    if best is None:
        print("best        none evaluated")
    elif best.fitness.feasible:
        print(f"best        {_describe(q, best.fitness.value)}")
        print(f"genome      {' '.join(map(str, best.genome.tolist()))}")
    else:
        print(f"best        infeasible, total violation {best.fitness.value:.10g}")
    return EXIT_OK


def cmd_campaign(args, p: ProblemInstance) -> int:
    q = to_maximization(p)
    optimum = _optimum(args, q)
    cfg = _config(args, optimum)

    def progress(i, rec):
        logging.getLogger(__name__).info("run %d seed %d: %d LPs", i, rec.seed, rec.lps_total)

    stats = run_campaign(q, cfg, args.runs, optimum, progress=progress)
    if args.out is not None:
        save_trace(stats.records, args.out)
    print(campaign_report(stats))
    if stats.truncated:
        print("warning: at least one run stopped at the LP budget", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


def cmd_bnb(args, p: ProblemInstance) -> int:
    q = to_maximization(p)
    res = solve_bnb(q, args.lp_cap, floor_first=not args.ceil_first)
    print(f"status      {res.status.value}")
    print(f"LPs solved  {res.lps_solved}")
    if res.root_bound is not None:
        print(f"root bound  {_describe(q, res.root_bound)}")
    if res.best_objective is not None:
        print(f"best        {_describe(q, res.best_objective)}")
    return EXIT_OK


def cmd_relax(args, p: ProblemInstance) -> int:
    def show(ev: PivotEvent):
        leave = "-" if ev.leaving is None else ev.leaving
        print(f"phase {ev.phase} it {ev.iteration:5d} in {ev.entering:5d} out {leave!s:>5} "
              f"step {ev.step:.6g} obj {ev.objective:.10g} [{ev.rule}]")

    sol = solve_lp(lp_relaxation(p), trace=show if args.trace else None)
    print(f"status      {sol.status.value}")
    print(f"pivots      {sol.iterations}")
    if sol.status is LpStatus.OPTIMAL:
        print(f"objective   {sol.objective:.10g}")
    elif sol.status is LpStatus.INFEASIBLE:
        print(f"violation   {sol.zeta:.10g}")
    return EXIT_OK


COMMANDS = {
    "parse": cmd_parse,
    "dump-mps": cmd_dump,
    "solve": cmd_solve,
    "campaign": cmd_campaign,
    "bnb": cmd_bnb,
    "relax": cmd_relax,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        p = _load(args, parser)
    except MpsError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        return COMMANDS[args.command](args, p)
    except ValueError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())

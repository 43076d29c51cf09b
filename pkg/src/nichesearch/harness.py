"""Multi-run campaigns, LP-count statistics, trace logs and report tables."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .evolution import Fitness, TraceEvent, reaches
from .model import ProblemInstance
from .niche import RunRecord, SearchConfig, run

TRACE_COLUMNS = ("run", "seed", "lp_index", "kind", "value")
END_KIND = "end"
TRUNCATED_KIND = "end-truncated"


@dataclass(frozen=True)
class Expectation:
    """Expected LP count; ``lower_bound`` marks a campaign without any success."""

    value: float
    lower_bound: bool = False

    def __str__(self) -> str:
        return f">{self.value:.0f}" if self.lower_bound else f"{self.value:.0f}"


def expected_lps(records: Iterable[RunRecord], kind: str) -> Expectation:
    """Sum of LPs to success over all runs divided by the number of successes.

    A failed run contributes its total LP count.  With no success the sum
    itself is returned, flagged as a lower bound.
    """
    if kind not in ("feasible", "optimal"):
        raise ValueError(f"kind must be 'feasible' or 'optimal', not {kind!r}")
    records = list(records)
    if not records:
        raise ValueError("need at least one run")
    total = 0
    successes = 0
    for rec in records:
        hit = rec.n_f if kind == "feasible" else rec.n_o
        if hit is None:
            total += rec.lps_total
        else:
            total += hit
            successes += 1
    if successes == 0:
        return Expectation(float(total), lower_bound=True)
    return Expectation(total / successes)


def final_fitness(rec: RunRecord) -> Fitness | None:
    return rec.trace[-1].fitness if rec.trace else None


@dataclass
class CampaignStats:
    name: str
    runs: int
    r_f: int
    r_o: int
    e_nf: Expectation
    e_no: Expectation
    optimum: float | None
    records: list[RunRecord]
    truncated: bool

    @classmethod
    def from_records(cls, name: str, records: list[RunRecord], optimum: float | None) -> "CampaignStats":
        return cls(
            name=name,
            runs=len(records),
            r_f=sum(r.n_f is not None for r in records),
            r_o=sum(r.n_o is not None for r in records),
            e_nf=expected_lps(records, "feasible"),
            e_no=expected_lps(records, "optimal"),
            optimum=optimum,
            records=records,
            truncated=any(r.truncated for r in records),
        )

    def summary_key(self) -> tuple:
        """Everything the reports show, for comparing campaigns."""
        finals = [final_fitness(r) for r in self.records]
        per_run = tuple(
            (r.seed, r.lps_total, r.n_f, r.n_o, r.truncated, None if f is None else (f.feasible, f.value))
            for r, f in zip(self.records, finals)
        )
        return (self.runs, self.r_f, self.r_o, self.e_nf, self.e_no, self.truncated, per_run)

    def best_values(self) -> list[Fitness]:
        return [f for f in (final_fitness(r) for r in self.records) if f is not None]


def run_campaign(
    p: ProblemInstance,
    cfg: SearchConfig,
    runs: int,
    optimum: float | None = None,
    *,
    name: str | None = None,
    progress=None,
) -> CampaignStats:
    """``runs`` independent runs with seeds ``cfg.rng_seed`` onwards.

    ``optimum`` is in maximisation form and only used to detect optimal hits.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    records = []
    for i in range(runs):
        rec = run(p, dataclasses.replace(cfg, rng_seed=cfg.rng_seed + i, optimum=optimum))
        records.append(rec)
        if progress is not None:
            progress(i, rec)
    return CampaignStats.from_records(name or p.name, records, optimum)


# ---------------------------------------------------------------------------
# trace CSV


def write_trace(records: Iterable[RunRecord], out: TextIO) -> None:
    """One row per improvement plus a closing row carrying the run's LP total."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for i, rec in enumerate(records):
        for ev in rec.trace:
            w.writerow([i, rec.seed, ev.lp_index, ev.fitness.kind, repr(float(ev.fitness.value))])
        w.writerow([i, rec.seed, rec.lps_total, TRUNCATED_KIND if rec.truncated else END_KIND, ""])


def trace_text(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    write_trace(records, buf)
    return buf.getvalue()


def save_trace(records: Iterable[RunRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_trace(records, f)


def read_trace(source: TextIO | str | Path, optimum: float | None = None) -> list[RunRecord]:
    """Rebuild run records from a trace CSV (genomes are not stored)."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as f:
            return read_trace(f, optimum)
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace header {reader.fieldnames}")
    runs: dict[int, dict] = {}
    for row in reader:
        entry = runs.setdefault(int(row["run"]), {"seed": int(row["seed"]), "trace": [], "end": None})
        kind = row["kind"]
        if kind in (END_KIND, TRUNCATED_KIND):
            entry["end"] = (int(row["lp_index"]), kind == TRUNCATED_KIND)
        elif kind in ("feasible", "infeasible"):
            fit = Fitness(kind == "feasible", float(row["value"]))
            entry["trace"].append(TraceEvent(int(row["lp_index"]), fit, np.zeros(0, dtype=np.int64)))
        else:
            raise ValueError(f"unknown trace row kind {kind!r}")
    records = []
    for idx in sorted(runs):
        entry = runs[idx]
        if entry["end"] is None:
            raise ValueError(f"run {idx} has no closing row")
        lps_total, truncated = entry["end"]
        trace = entry["trace"]
        records.append(
            RunRecord(
                seed=entry["seed"],
                lps_total=lps_total,
                n_f=next((e.lp_index for e in trace if e.fitness.feasible), None),
                n_o=None if optimum is None else next((e.lp_index for e in trace if reaches(e.fitness, optimum)), None),
                best=None,
                trace=trace,
                truncated=truncated,
            )
        )
    return records


# ---------------------------------------------------------------------------
# manifest and reports


def read_manifest(path: str | Path) -> dict[str, float]:
    """Instance optima from a two-column CSV ``name,optimum`` (header optional, ``#`` comments)."""
    optima: dict[str, float] = {}
    with open(path, encoding="utf-8", newline="") as f:
        rows = csv.reader(line for line in f if line.strip() and not line.lstrip().startswith("#"))
        for row in rows:
            if len(row) < 2:
                raise ValueError(f"manifest row needs name and optimum: {row}")
            name, value = row[0].strip(), row[1].strip()
            try:
                optima[name] = float(value)
            except ValueError:
                if not optima and name.lower() == "name":
                    continue  # header
                raise
    return optima


def lookup_optimum(optima: dict[str, float], name: str, path: str | Path | None = None) -> float | None:
    """Match an instance by its NAME record or its file stem."""
    if name in optima:
        return optima[name]
    if path is not None:
        stem = Path(path).name
        for suffix in (".gz", ".mps"):
            stem = stem.removesuffix(suffix)
        return optima.get(stem)
    return None


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def solutions_row(stats: CampaignStats, report) -> list[str]:
    """Worst, mean and best final value plus the mean LP count to the best."""
    fits = stats.best_values()
    internal = [f.value for f in fits if f.feasible]
    if len(internal) < len(fits) or not internal:
        worst = mean = best = "infeasible"
    else:
        worst, mean, best = (_fmt(report(v)) for v in (min(internal), float(np.mean(internal)), max(internal)))
    lps_to_best = np.mean([r.trace[-1].lp_index if r.trace else r.lps_total for r in stats.records])
    opt = "?" if stats.optimum is None else _fmt(report(stats.optimum))
    return [stats.name, opt, worst, mean, best, f"{lps_to_best:.0f}"]


def successes_row(stats: CampaignStats) -> list[str]:
    return [
        stats.name,
        f"{100 * stats.r_f / stats.runs:.0f}%",
        str(stats.e_nf),
        f"{100 * stats.r_o / stats.runs:.0f}%" if stats.optimum is not None else "n/a",
        str(stats.e_no) if stats.optimum is not None else "n/a",
    ]


def format_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def campaign_report(stats: CampaignStats, report=lambda v: v) -> str:
    """Per-run table followed by the solution and success summaries.

    Values are printed in maximisation form unless ``report`` maps them
    back to the original sense.
    """
    per_run = []
    for i, r in enumerate(stats.records):
        f = final_fitness(r)
        best = "-" if f is None else (_fmt(report(f.value)) if f.feasible else f"zeta={_fmt(f.value)}")
        per_run.append([str(i), str(r.seed), str(r.lps_total), str(r.n_f or "-"), str(r.n_o or "-"), best,
                        "yes" if r.truncated else ""])
    parts = [
        format_table(["run", "seed", "LPs", "n_f", "n_o", "best", "truncated"], per_run),
        "",
        format_table(["name", "optimum", "worst", "mean", "best", "avg LPs"], [solutions_row(stats, report)]),
        "",
        format_table(["name", "r_f/R", "E[n_f]", "r_o/R", "E[n_o]"], [successes_row(stats)]),
    ]
    return "\n".join(parts)

"""MIP instances: MPS reading/writing and the LPs derived from an instance.

Instances are stored with the integer block and the continuous block kept
apart, because every consumer (the evolutionary search, branch-and-bound,
initialisation) treats them differently:

    max  c.x + h.y + const
    s.t. row_lower <= A x + G y <= row_upper
         x integer within [lower_int, upper_int]
         y real within [lower_cont, upper_cont]

Row constraints are kept in MPS terms (rhs, sense, optional range) and the
two-sided row bounds are derived from them.
"""

from __future__ import annotations

import dataclasses
import gzip
import io
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Iterator

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

INF = math.inf

SENSES = ("L", "G", "E")


class MpsError(ValueError):
    """Raised on malformed MPS input; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _row_bounds(rhs, senses, ranges):
    rhs = np.asarray(rhs, dtype=float)
    senses = np.asarray(senses)
    ranged = ~np.isnan(ranges)
    r = np.where(ranged, ranges, 0.0)
    is_l, is_g, is_e = senses == "L", senses == "G", senses == "E"
    lo = np.where(is_g | is_e, rhs, -INF)
    hi = np.where(is_l | is_e, rhs, INF)
    lo = np.where(is_l & ranged, rhs - np.abs(r), lo)
    hi = np.where(is_g & ranged, rhs + np.abs(r), hi)
    hi = np.where(is_e & ranged & (r >= 0), rhs + r, hi)
    lo = np.where(is_e & ranged & (r < 0), rhs + r, lo)
    return lo, hi


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A mixed-integer linear program with integer and continuous blocks.

    ``maximize`` tells the direction of the *stored* objective;
    ``was_minimization`` records that the objective was negated on the way
    into maximisation form, so values can be reported in the file's sense.
    """

    name: str
    objective_int: np.ndarray
    objective_cont: np.ndarray
    matrix_int: sparse.csr_array
    matrix_cont: sparse.csr_array
    rhs: np.ndarray
    senses: tuple[str, ...]
    ranges: np.ndarray
    lower_int: np.ndarray
    upper_int: np.ndarray
    lower_cont: np.ndarray
    upper_cont: np.ndarray
    int_names: tuple[str, ...] = ()
    cont_names: tuple[str, ...] = ()
    row_names: tuple[str, ...] = ()
    objective_name: str = "OBJ"
    objective_constant: float = 0.0
    maximize: bool = False
    was_minimization: bool = False
    # original column order, as (is_integer, index within its block)
    column_order: tuple[tuple[bool, int], ...] = field(default=(), repr=False)

    def __post_init__(self):
        n, p, m = len(self.objective_int), len(self.objective_cont), len(self.rhs)
        if self.matrix_int.shape != (m, n) or self.matrix_cont.shape != (m, p):
            raise ValueError("matrix shapes do not match objective/rhs lengths")
        if len(self.senses) != m or len(self.ranges) != m:
            raise ValueError("senses/ranges length must equal the row count")
        if any(s not in SENSES for s in self.senses):
            raise ValueError(f"unknown row sense in {set(self.senses)}")
        for lo, hi, k in ((self.lower_int, self.upper_int, n), (self.lower_cont, self.upper_cont, p)):
            if len(lo) != k or len(hi) != k:
                raise ValueError("bound vectors do not match variable counts")
            if np.any(lo > hi):
                raise ValueError("lower bound exceeds upper bound")
        if not self.column_order:
            order = tuple((True, j) for j in range(n)) + tuple((False, j) for j in range(p))
            object.__setattr__(self, "column_order", order)

    @property
    def n_int(self) -> int:
        return len(self.objective_int)

    @property
    def n_cont(self) -> int:
        return len(self.objective_cont)

    @property
    def m(self) -> int:
        return len(self.rhs)

    @property
    def bounds_int(self) -> np.ndarray:
        return np.column_stack([self.lower_int, self.upper_int])

    @property
    def bounds_cont(self) -> np.ndarray:
        return np.column_stack([self.lower_cont, self.upper_cont])

    @cached_property
    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return _row_bounds(self.rhs, self.senses, self.ranges)

    @cached_property
    def dense_int(self) -> np.ndarray:
        return self.matrix_int.toarray()

    @cached_property
    def dense_cont(self) -> np.ndarray:
        return self.matrix_cont.toarray()

    def report_value(self, z: float) -> float:
        """Map an internal objective value back to the file's own sense."""
        return -z if self.was_minimization else z

    def summary(self) -> str:
        nnz = self.matrix_int.nnz + self.matrix_cont.nnz
        binary = int(np.sum((self.lower_int == 0) & (self.upper_int == 1)))
        sense = "max" if self.maximize else "min"
        return (
            f"name        {self.name}\n"
            f"sense       {sense}{' (converted from min)' if self.was_minimization else ''}\n"
            f"integer     {self.n_int} ({binary} binary)\n"
            f"continuous  {self.n_cont}\n"
            f"rows        {self.m}\n"
            f"nonzeros    {nnz}"
        )


@dataclass(frozen=True, eq=False)
class ResidualLp:
    """A continuous LP, typically what remains after fixing the integers.

    ``rhs`` is the right-hand side after moving fixed contributions over;
    ``constant_term`` carries the fixed part of the objective.
    """

    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    senses: tuple[str, ...]
    ranges: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant_term: float = 0.0
    maximize: bool = True
    # precomputed two-sided row bounds; derived from rhs/senses/ranges when absent
    row_lower: np.ndarray | None = field(default=None, repr=False)
    row_upper: np.ndarray | None = field(default=None, repr=False)

    @property
    def rhs_shifted(self) -> np.ndarray:
        return self.rhs

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    @property
    def m(self) -> int:
        return len(self.rhs)

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.row_lower is not None:
            return self.row_lower, self.row_upper
        return _row_bounds(self.rhs, self.senses, self.ranges)

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "ResidualLp":
        return dataclasses.replace(self, lower=lower, upper=upper)


# ---------------------------------------------------------------------------
# derived problems


def to_maximization(p: ProblemInstance) -> ProblemInstance:
    """Return the instance with a maximisation objective.

    A minimisation is negated and flagged so reported values can be turned
    back with :meth:`ProblemInstance.report_value`.  Already-maximising
    instances are returned unchanged.
    """
    if p.maximize:
        return p
    return dataclasses.replace(
        p,
        objective_int=-p.objective_int,
        objective_cont=-p.objective_cont,
        objective_constant=-p.objective_constant,
        maximize=True,
        was_minimization=not p.was_minimization,
    )


def restore_sense(p: ProblemInstance) -> ProblemInstance:
    """Undo :func:`to_maximization`."""
    if not p.was_minimization:
        return p
    return dataclasses.replace(
        p,
        objective_int=-p.objective_int,
        objective_cont=-p.objective_cont,
        objective_constant=-p.objective_constant,
        maximize=False,
        was_minimization=False,
    )


def genome_in_bounds(p: ProblemInstance, genome: np.ndarray) -> bool:
    return len(genome) == p.n_int and bool(np.all(genome >= p.lower_int) and np.all(genome <= p.upper_int))


def fix_integers(p: ProblemInstance, genome: np.ndarray) -> ResidualLp:
    """Fix the integer block at ``genome``; the continuous block stays free."""
    genome = np.asarray(genome)
    if not genome_in_bounds(p, genome):
        raise ValueError("genome length or values outside integer bounds")
    g = genome.astype(float)
    shift = p.dense_int @ g
    row_lo, row_hi = p.row_bounds
    return ResidualLp(
        objective=p.objective_cont,
        matrix=p.dense_cont,
        rhs=p.rhs - shift,
        senses=p.senses,
        ranges=p.ranges,
        lower=p.lower_cont,
        upper=p.upper_cont,
        constant_term=float(p.objective_int @ g) + p.objective_constant,
        maximize=p.maximize,
        row_lower=row_lo - shift,
        row_upper=row_hi - shift,
    )


def lp_relaxation(p: ProblemInstance) -> ResidualLp:
    """The LP with integrality dropped; integer columns come first."""
    return ResidualLp(
        objective=np.concatenate([p.objective_int, p.objective_cont]),
        matrix=np.hstack([p.dense_int, p.dense_cont]),
        rhs=p.rhs.copy(),
        senses=p.senses,
        ranges=p.ranges,
        lower=np.concatenate([p.lower_int, p.lower_cont]),
        upper=np.concatenate([p.upper_int, p.upper_cont]),
        constant_term=p.objective_constant,
        maximize=p.maximize,
    )


# ---------------------------------------------------------------------------
# MPS reading

_SECTIONS = ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
_ROW_TYPES = {"N", "L", "G", "E"}
_BOUND_TYPES = {"UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI"}

# fixed-format field slices (1-based columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61)
_FIXED_FIELDS = ((1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61))


def _fixed_fields(line: str) -> list[str]:
    out = [line[a:b].strip() for a, b in _FIXED_FIELDS]
    while out and not out[-1]:
        out.pop()
    return out


def _open_source(source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if path == "-":
            import sys

            yield from sys.stdin
            return
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "rt", encoding="ascii", errors="replace") as fh:
            yield from fh
        return
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    data = source.read()
    if isinstance(data, bytes):
        if data[:2] == b"\x1f\x8b":
            data = gzip.decompress(data)
        data = data.decode("ascii", errors="replace")
    yield from io.StringIO(data)


def _number(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsError(lineno, f"expected a number, got {tok!r}") from None


def _valid_pairs(pairs, rows, free_rows, objective_row) -> bool:
    if len(pairs) not in (2, 4):
        return False
    for rname, val in zip(pairs[0::2], pairs[1::2]):
        if rname not in rows and rname not in free_rows and rname != objective_row:
            return False
        try:
            float(val)
        except ValueError:
            return False
    return True


@dataclass
class _Column:
    name: str
    integer: bool
    entries: dict[int, float] = field(default_factory=dict)
    obj: float = 0.0
    lower: float = 0.0
    upper: float = INF
    bounded: bool = False


def parse_mps(source, *, integer_default_upper: float = INF) -> ProblemInstance:
    """Read an MPS document (fixed or free format, optionally gzipped).

    ``source`` is a path, ``"-"`` for standard input, bytes, or a binary or
    text stream.  Integer columns declared between INTORG/INTEND markers that
    receive no explicit bound get ``[0, integer_default_upper]``.
    """
    name = ""
    sense_max = False
    objective_row: str | None = None
    rows: dict[str, int] = {}
    row_senses: list[str] = []
    free_rows: set[str] = set()
    columns: dict[str, _Column] = {}
    col_list: list[_Column] = []
    rhs_values: dict[int, float] = {}
    range_values: dict[int, float] = {}
    obj_constant = 0.0
    in_int = False
    marker_line = 0
    section = None
    section_rank = -1
    last_col: _Column | None = None

    def enter(sec: str, lineno: int):
        nonlocal section, section_rank
        rank = _SECTIONS.index(sec)
        if rank <= section_rank:
            raise MpsError(lineno, f"section {sec} out of order")
        if rank > _SECTIONS.index("ROWS") and section_rank < _SECTIONS.index("ROWS"):
            raise MpsError(lineno, f"section {sec} before ROWS")
        section, section_rank = sec, rank

    lineno = 0
    for lineno, raw in enumerate(_open_source(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("*"):
            continue
        if not line[0].isspace():
            toks = line.split()
            head = toks[0].upper()
            if head not in _SECTIONS:
                raise MpsError(lineno, f"unknown section {toks[0]!r}")
            enter(head, lineno)
            if head == "NAME":
                name = line[4:].strip() if len(toks) > 1 else ""
            elif head == "OBJSENSE" and len(toks) > 1:
                sense_max = toks[1].upper() in ("MAX", "MAXIMIZE")
            elif head == "ENDATA":
                break
            continue

        toks = line.split()
        if section is None:
            raise MpsError(lineno, "data line before any section")

        if section == "OBJSENSE":
            sense_max = toks[0].upper() in ("MAX", "MAXIMIZE")

        elif section == "ROWS":
            if len(toks) != 2:
                toks = _fixed_fields(line)[:2]
            kind, rname = toks[0].upper(), toks[1]
            if kind not in _ROW_TYPES:
                raise MpsError(lineno, f"unknown row type {toks[0]!r}")
            if rname in rows or rname in free_rows or rname == objective_row:
                raise MpsError(lineno, f"duplicate row name {rname!r}")
            if kind == "N":
                if objective_row is None:
                    objective_row = rname
                else:
                    free_rows.add(rname)
            else:
                rows[rname] = len(row_senses)
                row_senses.append(kind)

        elif section == "COLUMNS":
            if "'MARKER'" in toks:
                if "'INTORG'" in toks:
                    if in_int:
                        raise MpsError(lineno, "nested INTORG marker")
                    in_int, marker_line = True, lineno
                elif "'INTEND'" in toks:
                    if not in_int:
                        raise MpsError(lineno, "INTEND without INTORG")
                    in_int = False
                else:
                    raise MpsError(lineno, "unknown MARKER type")
                continue
            if len(toks) not in (3, 5):
                toks = _fixed_fields(line)[1:]
                if len(toks) not in (3, 5):
                    raise MpsError(lineno, "malformed COLUMNS entry")
            cname = toks[0]
            col = columns.get(cname)
            if col is None:
                col = _Column(cname, in_int)
                columns[cname] = col
                col_list.append(col)
            elif col is not last_col:
                raise MpsError(lineno, f"column {cname!r} entries are not contiguous")
            last_col = col
            for rname, val in zip(toks[1::2], toks[2::2]):
                v = _number(val, lineno)
                if rname == objective_row:
                    col.obj += v
                elif rname in rows:
                    r = rows[rname]
                    col.entries[r] = col.entries.get(r, 0.0) + v
                elif rname not in free_rows:
                    raise MpsError(lineno, f"unknown row {rname!r} in COLUMNS")

        elif section in ("RHS", "RANGES"):
            # the set name is optional in free format
            pairs = toks[1:] if len(toks) % 2 else toks
            if not _valid_pairs(pairs, rows, free_rows, objective_row):
                fixed = _fixed_fields(line)[2:]
                if _valid_pairs(fixed, rows, free_rows, objective_row):
                    pairs = fixed
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                v = _number(val, lineno)
                if rname == objective_row:
                    if section == "RHS":
                        obj_constant = -v
                    continue
                if rname in free_rows:
                    continue
                if rname not in rows:
                    raise MpsError(lineno, f"unknown row {rname!r} in {section}")
                (rhs_values if section == "RHS" else range_values)[rows[rname]] = v

        elif section == "BOUNDS":
            kind = toks[0].upper()
            if kind not in _BOUND_TYPES:
                if kind == "SC":
                    raise MpsError(lineno, "semi-continuous bounds are not supported")
                raise MpsError(lineno, f"unknown bound type {toks[0]!r}")
            needs_value = kind not in ("FR", "MI", "PL", "BV")
            if len(toks) == (4 if needs_value else 3):
                cname = toks[2]
                val = toks[3] if needs_value else None
            elif len(toks) == (3 if needs_value else 2):
                cname = toks[1]
                val = toks[2] if needs_value else None
            else:
                ff = _fixed_fields(line)
                if len(ff) < 3:
                    raise MpsError(lineno, "malformed BOUNDS entry")
                cname, val = ff[2], (ff[3] if needs_value and len(ff) > 3 else None)
            col = columns.get(cname)
            if col is None:
                raise MpsError(lineno, f"unknown column {cname!r} in BOUNDS")
            v = _number(val, lineno) if val is not None else 0.0
            col.bounded = True
            if kind == "UP" or kind == "UI":
                col.upper = v
                if v < 0 and col.lower == 0:
                    log.warning("line %d: negative upper bound on %s, lower set to -inf", lineno, cname)
                    col.lower = -INF
            elif kind == "LO" or kind == "LI":
                col.lower = v
            elif kind == "FX":
                col.lower = col.upper = v
            elif kind == "FR":
                col.lower, col.upper = -INF, INF
            elif kind == "MI":
                col.lower = -INF
            elif kind == "PL":
                col.upper = INF
            elif kind == "BV":
                col.lower, col.upper = 0.0, 1.0
            if kind in ("BV", "LI", "UI"):
                col.integer = True
    else:
        if section != "ENDATA":
            raise MpsError(lineno, "missing ENDATA")

    if in_int:
        raise MpsError(marker_line, "INTORG marker never closed")
    if section_rank < _SECTIONS.index("COLUMNS"):
        raise MpsError(lineno, "missing ROWS or COLUMNS section")

    m = len(row_senses)
    for col in col_list:
        if col.integer and not col.bounded:
            col.upper = integer_default_upper
        if col.lower > col.upper:
            raise MpsError(lineno, f"column {col.name!r} has lower bound above upper bound")

    ints = [c for c in col_list if c.integer]
    conts = [c for c in col_list if not c.integer]
    counters = {True: 0, False: 0}
    order = []
    for c in col_list:
        order.append((c.integer, counters[c.integer]))
        counters[c.integer] += 1

    def block(cols):
        data, ri, ci = [], [], []
        for j, c in enumerate(cols):
            for r, v in c.entries.items():
                ri.append(r)
                ci.append(j)
                data.append(v)
        return sparse.csr_array((data, (ri, ci)), shape=(m, len(cols)))

    rhs = np.zeros(m)
    for r, v in rhs_values.items():
        rhs[r] = v
    ranges = np.full(m, np.nan)
    for r, v in range_values.items():
        ranges[r] = v

    row_names = [None] * m
    for rname, r in rows.items():
        row_names[r] = rname

    objective_int = np.array([c.obj for c in ints], dtype=float)
    objective_cont = np.array([c.obj for c in conts], dtype=float)
    return ProblemInstance(
        name=name,
        objective_int=objective_int,
        objective_cont=objective_cont,
        matrix_int=block(ints),
        matrix_cont=block(conts),
        rhs=rhs,
        senses=tuple(row_senses),
        ranges=ranges,
        lower_int=np.array([c.lower for c in ints], dtype=float),
        upper_int=np.array([c.upper for c in ints], dtype=float),
        lower_cont=np.array([c.lower for c in conts], dtype=float),
        upper_cont=np.array([c.upper for c in conts], dtype=float),
        int_names=tuple(c.name for c in ints),
        cont_names=tuple(c.name for c in conts),
        row_names=tuple(row_names),
        objective_name=objective_row or "OBJ",
        objective_constant=obj_constant,
        maximize=sense_max,
        column_order=tuple(order),
    )


# ---------------------------------------------------------------------------
# MPS writing


def _fmt(v: float) -> str:
    return repr(float(v))


def write_mps(p: ProblemInstance, out: IO[str]) -> None:
    """Write ``p`` as free-format MPS.

    The stored objective is written as is; a maximising instance gets an
    OBJSENSE MAX section.  Bounds are always written explicitly, so the
    output reparses identically regardless of the reader's defaults.
    """
    out.write(f"NAME {p.name}\n")
    if p.maximize:
        out.write("OBJSENSE\n    MAX\n")
    out.write("ROWS\n")
    out.write(f" N  {p.objective_name}\n")
    for s, r in zip(p.senses, p.row_names):
        out.write(f" {s}  {r}\n")
    out.write("COLUMNS\n")
    mi = p.matrix_int.tocsc()
    mc = p.matrix_cont.tocsc()
    in_int = False
    marker = 0
    for is_int, j in p.column_order:
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.write(f"    MARKER{marker:04d}  'MARKER'  {tag}\n")
            marker += 1
            in_int = is_int
        mat = mi if is_int else mc
        cname = p.int_names[j] if is_int else p.cont_names[j]
        obj = p.objective_int[j] if is_int else p.objective_cont[j]
        lo, hi = mat.indptr[j], mat.indptr[j + 1]
        entries = [(p.objective_name, obj)] if obj != 0 else []
        entries += [(p.row_names[r], v) for r, v in zip(mat.indices[lo:hi], mat.data[lo:hi])]
        if not entries:
            entries = [(p.objective_name, 0.0)]
        for rname, v in entries:
            out.write(f"    {cname}  {rname}  {_fmt(v)}\n")
    if in_int:
        out.write(f"    MARKER{marker:04d}  'MARKER'  'INTEND'\n")
    out.write("RHS\n")
    if p.objective_constant != 0:
        out.write(f"    RHS  {p.objective_name}  {_fmt(-p.objective_constant)}\n")
    for r, b in zip(p.row_names, p.rhs):
        if b != 0:
            out.write(f"    RHS  {r}  {_fmt(b)}\n")
    if np.any(~np.isnan(p.ranges)):
        out.write("RANGES\n")
        for r, v in zip(p.row_names, p.ranges):
            if not math.isnan(v):
                out.write(f"    RNG  {r}  {_fmt(v)}\n")
    out.write("BOUNDS\n")
    for is_int, j in p.column_order:
        cname = p.int_names[j] if is_int else p.cont_names[j]
        lo = p.lower_int[j] if is_int else p.lower_cont[j]
        hi = p.upper_int[j] if is_int else p.upper_cont[j]
        out.writelines(_bound_lines(cname, lo, hi))
    out.write("ENDATA\n")


def _bound_lines(cname: str, lo: float, hi: float) -> Iterable[str]:
    if lo == hi:
        return [f" FX BND  {cname}  {_fmt(lo)}\n"]
    if lo == -INF and hi == INF:
        return [f" FR BND  {cname}\n"]
    lines = []
    if lo == -INF:
        lines.append(f" MI BND  {cname}\n")
    else:
        lines.append(f" LO BND  {cname}  {_fmt(lo)}\n")
    lines.append(f" PL BND  {cname}\n" if hi == INF else f" UP BND  {cname}  {_fmt(hi)}\n")
    return lines


def dumps_mps(p: ProblemInstance) -> str:
    buf = io.StringIO()
    write_mps(p, buf)
    return buf.getvalue()


def instances_equal(a: ProblemInstance, b: ProblemInstance) -> bool:
    """Structural equality (used by the round-trip checks)."""
    arrays = (
        "objective_int", "objective_cont", "rhs", "lower_int", "upper_int", "lower_cont", "upper_cont",
    )
    if any(not np.array_equal(getattr(a, f), getattr(b, f)) for f in arrays):
        return False
    if not np.array_equal(a.ranges, b.ranges, equal_nan=True):
        return False
    if (a.matrix_int != b.matrix_int).nnz or (a.matrix_cont != b.matrix_cont).nnz:
        return False
    scalars = (
        "name", "senses", "int_names", "cont_names", "row_names", "objective_constant", "maximize",
        "column_order",
    )
    return all(getattr(a, f) == getattr(b, f) for f in scalars)

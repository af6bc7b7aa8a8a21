"""Problem and schedule data model: time periods, linear requirements,
partial schedules, and the basic evaluation operations everything else
builds on.

The scheduling week is the integer minute range [0, 10080].  A problem is a
set of candidate communication windows ("time periods"), each tied to one
project and one antenna, plus a set of linear inequality requirements over
the 0/1 inclusion variables of those periods.  Two periods on the same
antenna that overlap in time can never both be in a schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

WEEK_MINUTES = 10080


class Value(Enum):
    """Commitment state of a time period within a (partial) schedule."""

    OUT = 0
    IN = 1
    UNCOMMITTED = "*"


class Relation(Enum):
    GE = "ge"
    LE = "le"


class Status(Enum):
    """Truth status of a requirement relative to a partial schedule."""

    SATISFIED = "satisfied"
    VIOLATED = "violated"
    UNDETERMINED = "undetermined"


class SolveStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    TIMEOUT = "timeout"


class NotGroundError(ValueError):
    """Raised when an operation requiring a ground schedule sees '*'."""


@dataclass(frozen=True)
class TimePeriod:
    """One candidate communication window.

    `value` records the load-time commitment; freshly loaded problems are
    fully uncommitted.  Search state is carried by PartialSchedule, not by
    mutating periods.
    """

    id: str
    project: str
    antenna: str
    start: int
    end: int
    value: Value = Value.UNCOMMITTED

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class LinearRequirement:
    """A linear inequality sum(coeff_i * value(period_i)) {>=,<=} bound.

    Coefficients are non-negative rationals; zero-coefficient terms are
    disallowed (they play no role and are dropped at construction sites).
    """

    id: str
    terms: tuple[tuple[str, Fraction], ...]
    relation: Relation
    bound: Fraction

    def coefficient(self, period_id: str) -> Fraction:
        for pid, coeff in self.terms:
            if pid == period_id:
                return coeff
        return Fraction(0)

    def period_ids(self) -> tuple[str, ...]:
        return tuple(pid for pid, _ in self.terms)


def make_requirement(
    rid: str,
    terms: Iterable[tuple[str, int | Fraction]],
    relation: Relation | str,
    bound: int | Fraction,
) -> LinearRequirement:
    """Build a requirement, normalizing numbers to Fraction and dropping
    nothing: zero coefficients are rejected so the invariant holds."""
    rel = Relation(relation) if not isinstance(relation, Relation) else relation
    norm = []
    for pid, coeff in terms:
        frac = Fraction(coeff)
        if frac == 0:
            raise ValueError(f"requirement {rid!r}: zero coefficient for {pid!r}")
        if frac < 0:
            raise ValueError(f"requirement {rid!r}: negative coefficient for {pid!r}")
        norm.append((pid, frac))
    return LinearRequirement(rid, tuple(norm), rel, Fraction(bound))


@dataclass
class Problem:
    """An immutable-by-convention weekly scheduling problem.

    Antenna exclusions are never stored; two periods conflict iff they sit
    on the same antenna and their half-open intervals intersect.
    """

    projects: tuple[str, ...]
    antennas: tuple[str, ...]
    periods: tuple[TimePeriod, ...]
    requirements: tuple[LinearRequirement, ...]

    @cached_property
    def period_by_id(self) -> dict[str, TimePeriod]:
        return {p.id: p for p in self.periods}

    @cached_property
    def requirement_by_id(self) -> dict[str, LinearRequirement]:
        return {r.id: r for r in self.requirements}

    @cached_property
    def conflicts(self) -> dict[str, tuple[str, ...]]:
        """period id -> ids of same-antenna temporally overlapping periods."""
        by_antenna: dict[str, list[TimePeriod]] = {}
        for p in self.periods:
            by_antenna.setdefault(p.antenna, []).append(p)
        out: dict[str, list[str]] = {p.id: [] for p in self.periods}
        for group in by_antenna.values():
            group = sorted(group, key=lambda p: (p.start, p.end, p.id))
            for i, p in enumerate(group):
                for q in group[i + 1:]:
                    if q.start >= p.end:
                        break
                    out[p.id].append(q.id)
                    out[q.id].append(p.id)
        return {pid: tuple(sorted(ids)) for pid, ids in out.items()}

    @cached_property
    def requirements_of_period(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {p.id: [] for p in self.periods}
        for r in self.requirements:
            for pid, _ in r.terms:
                if pid in out:
                    out[pid].append(r.id)
        return {pid: tuple(rids) for pid, rids in out.items()}

    def initial_schedule(self) -> "PartialSchedule":
        """The fully uncommitted schedule (every period '*')."""
        return PartialSchedule({p.id: Value.UNCOMMITTED for p in self.periods})


def problem(
    periods: Iterable[TimePeriod],
    requirements: Iterable[LinearRequirement] = (),
    projects: Iterable[str] | None = None,
    antennas: Iterable[str] | None = None,
) -> Problem:
    """Convenience constructor deriving project/antenna sets from periods."""
    pers = tuple(periods)
    reqs = tuple(requirements)
    projs = tuple(sorted(set(projects) if projects is not None
                         else {p.project for p in pers}))
    ants = tuple(sorted(set(antennas) if antennas is not None
                        else {p.antenna for p in pers}))
    return Problem(projs, ants, pers, reqs)


@dataclass
class PartialSchedule:
    """Assignment of {OUT, IN, UNCOMMITTED} to every period id.

    A ground schedule has no UNCOMMITTED entries; a partial schedule stands
    for the set of its ground completions.
    """

    assignment: dict[str, Value]

    def value_of(self, period_id: str) -> Value:
        return self.assignment[period_id]

    def is_ground(self) -> bool:
        return all(v is not Value.UNCOMMITTED for v in self.assignment.values())

    def unforced_ids(self) -> list[str]:
        return [pid for pid, v in self.assignment.items()
                if v is Value.UNCOMMITTED]

    def in_ids(self) -> list[str]:
        return [pid for pid, v in self.assignment.items() if v is Value.IN]

    def copy(self) -> "PartialSchedule":
        return PartialSchedule(dict(self.assignment))

    def with_value(self, period_id: str, value: Value) -> "PartialSchedule":
        child = dict(self.assignment)
        child[period_id] = value
        return PartialSchedule(child)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartialSchedule):
            return NotImplemented
        return self.assignment == other.assignment


@dataclass
class SolveStats:
    nodes_expanded: int = 0
    propagation_events: int = 0
    relaxed_solves: int = 0


@dataclass
class SolveResult:
    """Outcome of a solver run.

    `objective` and `schedule` are set for SAT; `optimal_value` only when
    the producer guarantees optimality (the exhaustive oracle does).
    `cost` is in abstract search-cost units unless a wall-clock cost model
    was requested.
    """

    status: SolveStatus
    schedule: PartialSchedule | None = None
    objective: int | None = None
    optimal_value: int | None = None
    cost: Fraction | float = Fraction(0)
    stats: SolveStats = field(default_factory=SolveStats)


def overlaps(p: TimePeriod, q: TimePeriod) -> bool:
    """True iff p and q would collide on an antenna.

    Intervals are half-open [start, end): touching endpoints do not
    conflict.  Distinct antennas never conflict; a period never conflicts
    with itself.
    """
    if p.id == q.id or p.antenna != q.antenna:
        return False
    return p.start < q.end and q.start < p.end


def evaluate_objective(schedule: PartialSchedule) -> int:
    """Number of periods included in a ground schedule.

    Feasibility is not consulted; this is a plain count of IN entries.
    """
    total = 0
    for pid, v in schedule.assignment.items():
        if v is Value.UNCOMMITTED:
            raise NotGroundError(f"period {pid!r} is uncommitted")
        if v is Value.IN:
            total += 1
    return total


def attainable_range(
    req: LinearRequirement, assignment: Mapping[str, Value]
) -> tuple[Fraction, Fraction]:
    """(min, max) of sum(coeff * value) over ground completions.

    Coefficients are non-negative, so the minimum fixes every uncommitted
    term OUT and the maximum fixes every uncommitted term IN.
    """
    lo = Fraction(0)
    hi = Fraction(0)
    for pid, coeff in req.terms:
        v = assignment[pid]
        if v is Value.IN:
            lo += coeff
            hi += coeff
        elif v is Value.UNCOMMITTED:
            hi += coeff
    return lo, hi


def requirement_status(req: LinearRequirement, schedule: PartialSchedule) -> Status:
    """Fold of the requirement over all ground completions of `schedule`:
    SATISFIED iff every completion satisfies it, VIOLATED iff none does."""
    lo, hi = attainable_range(req, schedule.assignment)
    if req.relation is Relation.GE:
        if lo >= req.bound:
            return Status.SATISFIED
        if hi < req.bound:
            return Status.VIOLATED
    else:
        if hi <= req.bound:
            return Status.SATISFIED
        if lo > req.bound:
            return Status.VIOLATED
    return Status.UNDETERMINED


@dataclass(frozen=True)
class Finding:
    code: str
    subject: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, subject: str, message: str) -> None:
        self.findings.append(Finding(code, subject, message))


def validate(prob: Problem) -> ValidationReport:
    """Structural checks; an empty report means the Problem invariants hold."""
    report = ValidationReport()
    seen_periods: set[str] = set()
    for p in prob.periods:
        if p.id in seen_periods:
            report.add("duplicate-period-id", p.id, f"period id {p.id!r} repeats")
        seen_periods.add(p.id)
        if not (0 <= p.start < p.end <= WEEK_MINUTES):
            code = "empty-interval" if p.start >= p.end else "time-out-of-range"
            report.add(code, p.id,
                       f"period {p.id!r} has interval [{p.start}, {p.end})")
        if p.project not in prob.projects:
            report.add("unknown-project", p.id,
                       f"period {p.id!r} references project {p.project!r}")
        if p.antenna not in prob.antennas:
            report.add("unknown-antenna", p.id,
                       f"period {p.id!r} references antenna {p.antenna!r}")
    seen_reqs: set[str] = set()
    for r in prob.requirements:
        if r.id in seen_reqs:
            report.add("duplicate-requirement-id", r.id,
                       f"requirement id {r.id!r} repeats")
        seen_reqs.add(r.id)
        for pid, coeff in r.terms:
            if pid not in seen_periods:
                report.add("dangling-reference", r.id,
                           f"requirement {r.id!r} references unknown period {pid!r}")
            if coeff == 0:
                report.add("zero-coefficient", r.id,
                           f"requirement {r.id!r} has a zero coefficient on {pid!r}")
            elif coeff < 0:
                report.add("negative-coefficient", r.id,
                           f"requirement {r.id!r} has a negative coefficient on {pid!r}")
    return report

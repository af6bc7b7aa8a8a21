"""Exhaustive reference solver for small instances.

Enumerates every ground schedule, so results are optimal by construction.
Used as the ground truth the heuristic search is checked against; it shares
only the data model with the search code, none of the algorithms.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator

from .model import (
    PartialSchedule,
    Problem,
    Relation,
    SolveResult,
    SolveStatus,
    Value,
)

DEFAULT_ORACLE_CAP = 20


class TooLargeError(ValueError):
    """Instance exceeds the exhaustive-enumeration cap."""


def iter_ground_completions(
    prob: Problem, base: PartialSchedule | None = None
) -> Iterator[PartialSchedule]:
    """All ground schedules refining `base` (default: the empty schedule),
    in a stable order (free periods toggled most-significant-first)."""
    if base is None:
        base = prob.initial_schedule()
    free = [pid for pid in (p.id for p in prob.periods)
            if base.assignment[pid] is Value.UNCOMMITTED]
    fixed = dict(base.assignment)
    for mask in range(1 << len(free)):
        assignment = dict(fixed)
        for bit, pid in enumerate(free):
            assignment[pid] = Value.IN if mask >> (len(free) - 1 - bit) & 1 \
                else Value.OUT
        yield PartialSchedule(assignment)


def is_feasible(prob: Problem, ground: PartialSchedule) -> bool:
    """Ground schedule satisfies every requirement and antenna exclusion."""
    chosen = {pid for pid, v in ground.assignment.items() if v is Value.IN}
    for pid in chosen:
        for other in prob.conflicts[pid]:
            if other in chosen:
                return False
    for req in prob.requirements:
        total = Fraction(0)
        for pid, coeff in req.terms:
            if ground.assignment[pid] is Value.IN:
                total += coeff
        if req.relation is Relation.GE:
            if total < req.bound:
                return False
        else:
            if total > req.bound:
                return False
    return True


def brute_force_solve(
    prob: Problem,
    base: PartialSchedule | None = None,
    cap: int = DEFAULT_ORACLE_CAP,
) -> SolveResult:
    """Best feasible ground completion of `base` by full enumeration.

    Returns SAT with a maximum-objective schedule and its optimal value,
    or UNSAT when no completion is feasible.  The first maximal schedule
    in enumeration order wins, which makes results order-independent in
    value but deterministic in the witness.
    """
    free_count = sum(
        1 for v in (base or prob.initial_schedule()).assignment.values()
        if v is Value.UNCOMMITTED
    )
    if free_count > cap:
        raise TooLargeError(
            f"{free_count} uncommitted periods exceed the oracle cap {cap}"
        )
    best: PartialSchedule | None = None
    best_value = -1
    for ground in iter_ground_completions(prob, base):
        if not is_feasible(prob, ground):
            continue
        value = sum(1 for v in ground.assignment.values() if v is Value.IN)
        if value > best_value:
            best, best_value = ground, value
    if best is None:
        return SolveResult(status=SolveStatus.UNSAT)
    return SolveResult(
        status=SolveStatus.SAT,
        schedule=best,
        objective=best_value,
        optimal_value=best_value,
    )

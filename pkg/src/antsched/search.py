"""Agenda-based refinement search over partial schedules.

A node is split by committing uncommitted periods, guided by heuristic
measures; a Lagrangian weight search at each node either proves the node
feasible outright or points at the requirements worth refining on.  Nodes
are propagated to fixpoint when they are removed from the agenda, and the
agenda is a stack, so the search is depth-first with heuristic child
ordering and chronological backtracking.

Search effort is metered in abstract cost units: one unit per relaxed
solve plus 1/100 unit per propagation event, so runs are reproducible on
any machine.  A wall-clock cost model exists for field use.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .model import (
    LinearRequirement,
    PartialSchedule,
    Problem,
    Relation,
    SolveResult,
    SolveStats,
    SolveStatus,
    Status,
    Value,
    evaluate_objective,
    requirement_status,
)
from .relaxation import weight_search, zero_weights
from .strategy import Strategy

PROPAGATION_EVENT_COST = Fraction(1, 100)
RELAXED_SOLVE_COST = Fraction(1)


class CostModel(Enum):
    ABSTRACT = "abstract"
    WALLCLOCK = "wallclock"


class ForcedPeriodError(ValueError):
    """A per-period measure was asked about a committed period."""


class EmptySetError(ValueError):
    """Constraint selection needs a non-empty candidate set."""


@dataclass
class PropagationResult:
    consistent: bool
    schedule: PartialSchedule | None
    events: int


@dataclass
class SearchNode:
    partial: PartialSchedule
    weights: dict[str, Fraction]
    depth: int


def propagate(prob: Problem, node: PartialSchedule) -> PropagationResult:
    """Arc-consistency fixpoint of the node's commitments.

    Committing a period IN forces out every uncommitted period that shares
    its antenna and overlaps it; a requirement that would become violated
    unless a specific period takes a specific value forces that value.
    Inconsistency (a violated requirement, or a period pushed both ways)
    means the node holds no feasible completion and is pruned.

    `events` counts the assignments made here, for the cost model.
    """
    assignment = dict(node.assignment)
    events = 0
    queue: deque[str] = deque(
        pid for pid, v in assignment.items() if v is not Value.UNCOMMITTED
    )
    dirty: dict[str, None] = {r.id: None for r in prob.requirements}

    def force(pid: str, value: Value) -> bool:
        """Apply a forced value; False signals a contradiction."""
        nonlocal events
        current = assignment[pid]
        if current is value:
            return True
        if current is not Value.UNCOMMITTED:
            return False
        assignment[pid] = value
        events += 1
        queue.append(pid)
        for rid in prob.requirements_of_period[pid]:
            dirty[rid] = None
        return True

    while queue or dirty:
        if queue:
            pid = queue.popleft()
            if assignment[pid] is Value.IN:
                for other in prob.conflicts[pid]:
                    if assignment[other] is Value.IN:
                        return PropagationResult(False, None, events)
                    if assignment[other] is Value.UNCOMMITTED:
                        if not force(other, Value.OUT):
                            return PropagationResult(False, None, events)
            continue
        rid = next(iter(dirty))
        del dirty[rid]
        req = prob.requirement_by_id[rid]
        lo = Fraction(0)
        hi = Fraction(0)
        for pid, coeff in req.terms:
            v = assignment[pid]
            if v is Value.IN:
                lo += coeff
                hi += coeff
            elif v is Value.UNCOMMITTED:
                hi += coeff
        if req.relation is Relation.GE:
            if hi < req.bound:
                return PropagationResult(False, None, events)
            if lo >= req.bound:
                continue
            for pid, coeff in req.terms:
                if assignment[pid] is Value.UNCOMMITTED and hi - coeff < req.bound:
                    if not force(pid, Value.IN):
                        return PropagationResult(False, None, events)
        else:
            if lo > req.bound:
                return PropagationResult(False, None, events)
            if hi <= req.bound:
                continue
            for pid, coeff in req.terms:
                if assignment[pid] is Value.UNCOMMITTED and lo + coeff > req.bound:
                    if not force(pid, Value.OUT):
                        return PropagationResult(False, None, events)
    return PropagationResult(True, PartialSchedule(assignment), events)


# ---------------------------------------------------------------------------
# Heuristic measures


def _require_unforced(node: PartialSchedule, pid: str) -> None:
    if node.assignment[pid] is not Value.UNCOMMITTED:
        raise ForcedPeriodError(f"period {pid!r} is already committed")


def conflictedness(prob: Problem, node: PartialSchedule, pid: str) -> int:
    """How many uncommitted periods would be forced out by forcing `pid` in."""
    _require_unforced(node, pid)
    return sum(
        1 for q in prob.conflicts[pid]
        if node.assignment[q] is Value.UNCOMMITTED
    )


def _statuses(prob: Problem, node: PartialSchedule) -> dict[str, Status]:
    return {r.id: requirement_status(r, node) for r in prob.requirements}


def gain(
    prob: Problem,
    node: PartialSchedule,
    pid: str,
    statuses: dict[str, Status] | None = None,
) -> int:
    """Number of not-yet-satisfied requirements the period participates in."""
    _require_unforced(node, pid)
    if statuses is None:
        statuses = _statuses(prob, node)
    return sum(
        1 for rid in prob.requirements_of_period[pid]
        if statuses[rid] is not Status.SATISFIED
    )


def loss(
    prob: Problem,
    node: PartialSchedule,
    pid: str,
    statuses: dict[str, Status] | None = None,
) -> int:
    """Total gain of the uncommitted periods that forcing `pid` in kills."""
    _require_unforced(node, pid)
    if statuses is None:
        statuses = _statuses(prob, node)
    return sum(
        gain(prob, node, q, statuses) for q in prob.conflicts[pid]
        if node.assignment[q] is Value.UNCOMMITTED
    )


@dataclass(frozen=True)
class ConstraintMeasures:
    total_conflictedness: int
    max_conflictedness: int
    min_conflictedness: int
    total_gain: int
    max_gain: int
    min_gain: int
    total_loss: int
    max_loss: int
    min_loss: int
    unforced_periods: int
    satisfaction_distance: int


def satisfaction_distance(
    prob: Problem, node: PartialSchedule, req: LinearRequirement
) -> int:
    """Fewest commitments that would satisfy the requirement outright,
    ignoring antenna interactions.

    Counts forcing IN the largest-coefficient uncommitted terms for lower
    bounds, forcing them OUT for upper bounds.  One more than the number
    of uncommitted terms when no amount of forcing can help.
    """
    lo = Fraction(0)
    hi = Fraction(0)
    free_coeffs = []
    for pid, coeff in req.terms:
        v = node.assignment[pid]
        if v is Value.IN:
            lo += coeff
            hi += coeff
        elif v is Value.UNCOMMITTED:
            hi += coeff
            free_coeffs.append(coeff)
    free_coeffs.sort(reverse=True)
    if req.relation is Relation.GE:
        need = req.bound
        level = lo
    else:
        need = -req.bound
        level = -hi
    # Each forced term raises `level` by its coefficient until `need` is met.
    if level >= need:
        return 0
    for k, coeff in enumerate(free_coeffs, start=1):
        level += coeff
        if level >= need:
            return k
    return len(free_coeffs) + 1


def constraint_measures(
    prob: Problem,
    node: PartialSchedule,
    req: LinearRequirement,
    statuses: dict[str, Status] | None = None,
) -> ConstraintMeasures:
    """Aggregates of the per-period measures over the requirement's
    uncommitted periods (zeros when it has none)."""
    if statuses is None:
        statuses = _statuses(prob, node)
    unforced = [pid for pid, _ in req.terms
                if node.assignment[pid] is Value.UNCOMMITTED]
    confl = [conflictedness(prob, node, pid) for pid in unforced]
    gains = [gain(prob, node, pid, statuses) for pid in unforced]
    losses = [loss(prob, node, pid, statuses) for pid in unforced]

    def agg(xs: list[int]) -> tuple[int, int, int]:
        if not xs:
            return 0, 0, 0
        return sum(xs), max(xs), min(xs)

    tc, xc, nc = agg(confl)
    tg, xg, ng = agg(gains)
    tl, xl, nl = agg(losses)
    return ConstraintMeasures(
        total_conflictedness=tc, max_conflictedness=xc, min_conflictedness=nc,
        total_gain=tg, max_gain=xg, min_gain=ng,
        total_loss=tl, max_loss=xl, min_loss=nl,
        unforced_periods=len(unforced),
        satisfaction_distance=satisfaction_distance(prob, node, req),
    )


# Prefer-X ranks descending on X, penalize-X ascending; expressed as
# ascending sort keys.
_CONSTRAINT_KEYS = {
    "3a": lambda m: -m.max_gain,
    "3b": lambda m: -m.total_gain,
    "3c": lambda m: m.max_loss,
    "3d": lambda m: m.max_conflictedness,
    "3e": lambda m: -m.total_conflictedness,
    "3f": lambda m: m.total_conflictedness,
    "3g": lambda m: -m.min_conflictedness,
    "3h": lambda m: m.unforced_periods,
    "3i": lambda m: m.satisfaction_distance,
}


def select_constraint(
    prob: Problem,
    node: PartialSchedule,
    candidate_ids: list[str] | tuple[str, ...],
    primary: str,
    secondary: str,
) -> str:
    """Pick one requirement to refine on: best primary score, ties broken
    by the secondary score, then by requirement id."""
    if not candidate_ids:
        raise EmptySetError("no candidate requirements to select from")
    statuses = _statuses(prob, node)
    pkey = _CONSTRAINT_KEYS[primary]
    skey = _CONSTRAINT_KEYS[secondary]
    best_id = None
    best_rank = None
    for rid in sorted(candidate_ids):
        m = constraint_measures(prob, node, prob.requirement_by_id[rid], statuses)
        rank = (pkey(m), skey(m), rid)
        if best_rank is None or rank < best_rank:
            best_id, best_rank = rid, rank
    return best_id


def order_periods(
    prob: Problem,
    node: PartialSchedule,
    candidates: list[str],
    method: str,
) -> list[str]:
    """Order candidate periods for refinement.

    1a descending gain, 1b ascending loss, 1c ascending conflictedness,
    1d descending conflictedness, 1e the order they appear in the
    constraint.  Sorts are stable, so ties keep constraint order.
    """
    if method == "1e":
        return list(candidates)
    statuses = _statuses(prob, node)
    if method == "1a":
        key = lambda pid: -gain(prob, node, pid, statuses)
    elif method == "1b":
        key = lambda pid: loss(prob, node, pid, statuses)
    elif method == "1c":
        key = lambda pid: conflictedness(prob, node, pid)
    elif method == "1d":
        key = lambda pid: -conflictedness(prob, node, pid)
    else:
        raise ValueError(f"unknown value ordering {method!r}")
    return sorted(candidates, key=key)


def refine_basic(
    prob: Problem,
    node: PartialSchedule,
    req: LinearRequirement,
    value_ordering: str,
) -> list[PartialSchedule]:
    """One child per uncommitted period of the requirement, committing it
    toward satisfaction (IN for lower bounds, OUT for upper bounds).

    Children may share ground completions; together they cover every
    completion of the node that can still satisfy the requirement.
    """
    unforced = [pid for pid, _ in req.terms
                if node.assignment[pid] is Value.UNCOMMITTED]
    ordered = order_periods(prob, node, unforced, value_ordering)
    target = Value.IN if req.relation is Relation.GE else Value.OUT
    return [node.with_value(pid, target) for pid in ordered]


def refine_systematic(
    prob: Problem,
    node: PartialSchedule,
    req: LinearRequirement,
    value_ordering: str,
) -> list[PartialSchedule]:
    """Two children splitting on the best-ranked uncommitted period of the
    requirement: exactly one contains each ground completion of the node.
    The child that makes immediate progress on the requirement comes first.
    """
    unforced = [pid for pid, _ in req.terms
                if node.assignment[pid] is Value.UNCOMMITTED]
    ordered = order_periods(prob, node, unforced, value_ordering)
    if not ordered:
        return []
    pid = ordered[0]
    if req.relation is Relation.GE:
        return [node.with_value(pid, Value.IN), node.with_value(pid, Value.OUT)]
    return [node.with_value(pid, Value.OUT), node.with_value(pid, Value.IN)]


def solve(
    prob: Problem,
    strat: Strategy,
    bound: Fraction | float | int,
    cost_model: CostModel = CostModel.ABSTRACT,
) -> SolveResult:
    """Satisficing search: return the first feasible ground schedule found.

    SAT as soon as some node's relaxed solution satisfies every
    requirement; UNSAT when the agenda empties; TIMEOUT as soon as
    cumulative cost exceeds `bound` (the work of the step that crossed the
    line is already spent and is reflected in the recorded cost).
    """
    stats = SolveStats()
    started = time.perf_counter()

    def cost() -> Fraction | float:
        if cost_model is CostModel.WALLCLOCK:
            return time.perf_counter() - started
        return (RELAXED_SOLVE_COST * stats.relaxed_solves
                + PROPAGATION_EVENT_COST * stats.propagation_events)

    def result(status: SolveStatus, **kw) -> SolveResult:
        return SolveResult(status=status, cost=cost(), stats=stats, **kw)

    agenda: list[SearchNode] = [
        SearchNode(prob.initial_schedule(), zero_weights(prob), 0)
    ]
    while agenda:
        node = agenda.pop()
        outcome = propagate(prob, node.partial)
        stats.propagation_events += outcome.events
        if cost() > bound:
            return result(SolveStatus.TIMEOUT)
        if not outcome.consistent:
            continue
        stats.nodes_expanded += 1
        sol = weight_search(
            strat.weight_search, prob, outcome.schedule, node.weights,
            at_root=node.depth == 0,
        )
        stats.relaxed_solves += sol.relaxed_solves
        if cost() > bound:
            return result(SolveStatus.TIMEOUT)
        if not sol.unsatisfied:
            return result(
                SolveStatus.SAT,
                schedule=sol.schedule,
                objective=evaluate_objective(sol.schedule),
            )
        rid = select_constraint(
            prob, outcome.schedule, list(sol.unsatisfied),
            strat.primary_ordering, strat.secondary_ordering,
        )
        req = prob.requirement_by_id[rid]
        if strat.refinement == "4b":
            children = refine_systematic(
                prob, outcome.schedule, req, strat.value_ordering)
        else:
            children = refine_basic(
                prob, outcome.schedule, req, strat.value_ordering)
        for child in reversed(children):
            agenda.append(SearchNode(child, sol.weights_used, node.depth + 1))
    return result(SolveStatus.UNSAT)

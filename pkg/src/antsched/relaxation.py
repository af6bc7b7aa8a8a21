"""Lagrangian relaxation of the project requirements.

Folding each requirement into the objective with a non-negative weight
turns the problem into independent per-antenna selections of non-overlapping
periods, solvable by dynamic programming.  The value of any such relaxed
optimum is an upper bound on the true optimum; weight search tries to
tighten that bound, and a relaxed solution that happens to satisfy every
requirement is accepted outright.

For a ground schedule g the relaxed objective is

    Z(g, u) = Z(g) + sum over GE requirements j of u_j * (a.g - b_j)
                   + sum over LE requirements j of u_j * (b_j - a.g)

so each added term is negative exactly when its requirement is violated.
Equivalently Z(g, u) is the weight sum of the included periods plus a
constant, with period weight

    w(s) = 1 + sum of u_j * a_sj over GE requirements containing s
             - sum of u_j * a_sj over LE requirements containing s.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction

from .model import (
    NotGroundError,
    PartialSchedule,
    Problem,
    Relation,
    TimePeriod,
    Value,
)

WEIGHT_SEARCH_CODES = ("2a", "2b", "2c", "2d")

DEFAULT_STEP_SCALE = Fraction(1)
DEFAULT_BUDGET = 50


class MissingWeightError(LookupError):
    """Weight vector lacks an entry for a requirement that needs one."""


class InconsistentNodeError(ValueError):
    """Node commits two overlapping same-antenna periods IN."""


@dataclass(frozen=True)
class WeightSearchMethod:
    """One of the four weight-search methods plus its tunables.

    2a adjusts all weights at once along the subgradient, 2b one weight at
    a time, 2c behaves like 2b at the search root and like 2d below it,
    and 2d settles for the first relaxed solution.  The step schedule is
    step_scale / (1 + i).
    """

    code: str
    step_scale: Fraction = DEFAULT_STEP_SCALE
    budget: int = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        if self.code not in WEIGHT_SEARCH_CODES:
            raise ValueError(f"unknown weight search code {self.code!r}")
        if self.budget < 1:
            raise ValueError("budget must be at least 1 relaxed solve")


@dataclass
class RelaxedSolution:
    """A ground completion maximizing the relaxed objective at `weights_used`,
    subject only to antenna exclusions and the node's commitments."""

    schedule: PartialSchedule
    relaxed_value: Fraction
    weights_used: dict[str, Fraction]
    unsatisfied: tuple[str, ...]
    relaxed_solves: int = 1
    budget_exhausted: bool = False


def zero_weights(prob: Problem) -> dict[str, Fraction]:
    return {r.id: Fraction(0) for r in prob.requirements}


def period_weight(
    period: TimePeriod | str, weights: dict[str, Fraction], prob: Problem
) -> Fraction:
    """Coefficient of the period's 0/1 variable in the relaxed objective."""
    pid = period if isinstance(period, str) else period.id
    w = Fraction(1)
    for rid in prob.requirements_of_period[pid]:
        if rid not in weights:
            raise MissingWeightError(f"no weight for requirement {rid!r}")
        u = weights[rid]
        if u == 0:
            continue
        req = prob.requirement_by_id[rid]
        coeff = req.coefficient(pid)
        if req.relation is Relation.GE:
            w += u * coeff
        else:
            w -= u * coeff
    return w


def relaxed_constant(weights: dict[str, Fraction], prob: Problem) -> Fraction:
    """Schedule-independent part of the relaxed objective."""
    c = Fraction(0)
    for req in prob.requirements:
        if req.id not in weights:
            raise MissingWeightError(f"no weight for requirement {req.id!r}")
        u = weights[req.id]
        if req.relation is Relation.GE:
            c -= u * req.bound
        else:
            c += u * req.bound
    return c


def relaxed_objective(
    ground: PartialSchedule, weights: dict[str, Fraction], prob: Problem
) -> Fraction:
    """Z(g, u) for a ground schedule g."""
    total = Fraction(0)
    for pid, v in ground.assignment.items():
        if v is Value.UNCOMMITTED:
            raise NotGroundError(f"period {pid!r} is uncommitted")
        if v is Value.IN:
            total += 1
    for req in prob.requirements:
        if req.id not in weights:
            raise MissingWeightError(f"no weight for requirement {req.id!r}")
        u = weights[req.id]
        if u == 0:
            continue
        held = Fraction(0)
        for pid, coeff in req.terms:
            if ground.assignment[pid] is Value.IN:
                held += coeff
        if req.relation is Relation.GE:
            total += u * (held - req.bound)
        else:
            total += u * (req.bound - held)
    return total


def _select_max_weight(
    items: list[tuple[TimePeriod, Fraction]]
) -> list[str]:
    """Maximum-weight set of pairwise non-overlapping intervals.

    Classic weighted-interval recurrence over items sorted by end time.
    Ties in total weight are broken toward the selection whose (start, id)
    sequence is lexicographically smallest, i.e. earlier starts first and
    then smaller ids.
    """
    order = sorted(items, key=lambda it: (it[0].end, it[0].start, it[0].id))
    ends = [it[0].end for it in order]
    # best[k]: (total weight, selection key) over the first k items, where
    # the selection key is the tuple of (start, id) pairs of chosen items.
    best: list[tuple[Fraction, tuple]] = [(Fraction(0), ())]
    for j, (per, w) in enumerate(order):
        prev = bisect.bisect_right(ends, per.start, 0, j)
        take_w = best[prev][0] + w
        take_key = best[prev][1] + ((per.start, per.id),)
        skip_w, skip_key = best[j]
        if take_w > skip_w or (take_w == skip_w and take_key < skip_key):
            best.append((take_w, take_key))
        else:
            best.append((skip_w, skip_key))
    return [pid for _, pid in best[-1][1]]


def solve_relaxed(
    prob: Problem, node: PartialSchedule, weights: dict[str, Fraction]
) -> RelaxedSolution:
    """Optimal relaxed completion of `node` for the given weights.

    Committed periods are respected verbatim; each antenna is solved
    independently over the node's uncommitted periods, dropping those that
    overlap an IN commitment and those whose weight is not positive.
    """
    by_antenna: dict[str, list[TimePeriod]] = {a: [] for a in prob.antennas}
    committed_in: dict[str, list[TimePeriod]] = {a: [] for a in prob.antennas}
    for per in prob.periods:
        v = node.assignment[per.id]
        if v is Value.IN:
            committed_in[per.antenna].append(per)
        elif v is Value.UNCOMMITTED:
            by_antenna[per.antenna].append(per)

    assignment = {pid: Value.OUT for pid in node.assignment}
    for antenna in prob.antennas:
        fixed = committed_in[antenna]
        for i, p in enumerate(fixed):
            assignment[p.id] = Value.IN
            for q in fixed[i + 1:]:
                if p.start < q.end and q.start < p.end:
                    raise InconsistentNodeError(
                        f"periods {p.id!r} and {q.id!r} are both IN on "
                        f"antenna {antenna!r} and overlap"
                    )
        candidates = []
        for per in by_antenna[antenna]:
            if any(per.start < f.end and f.start < per.end for f in fixed):
                continue
            w = period_weight(per, weights, prob)
            if w > 0:
                candidates.append((per, w))
        for pid in _select_max_weight(candidates):
            assignment[pid] = Value.IN

    schedule = PartialSchedule(assignment)
    value = relaxed_objective(schedule, weights, prob)
    unsat = []
    for req in prob.requirements:
        held = Fraction(0)
        for pid, coeff in req.terms:
            if assignment[pid] is Value.IN:
                held += coeff
        bad = held < req.bound if req.relation is Relation.GE \
            else held > req.bound
        if bad:
            unsat.append(req.id)
    return RelaxedSolution(
        schedule=schedule,
        relaxed_value=value,
        weights_used=dict(weights),
        unsatisfied=tuple(sorted(unsat)),
    )


def subgradient(
    prob: Problem, weights: dict[str, Fraction], sol: RelaxedSolution
) -> dict[str, Fraction]:
    """Ascent direction for the penalty weights at `sol`.

    Positive component means the requirement is violated by the relaxed
    schedule and its weight should grow; negative slack pulls the weight
    back toward zero (the caller clamps at zero).
    """
    direction: dict[str, Fraction] = {}
    for req in prob.requirements:
        held = Fraction(0)
        for pid, coeff in req.terms:
            if sol.schedule.assignment[pid] is Value.IN:
                held += coeff
        if req.relation is Relation.GE:
            direction[req.id] = req.bound - held
        else:
            direction[req.id] = held - req.bound
    return direction


def _step(method: WeightSearchMethod, index: int) -> Fraction:
    return method.step_scale / (1 + index)


def _search_subgradient(
    method: WeightSearchMethod,
    prob: Problem,
    node: PartialSchedule,
    u0: dict[str, Fraction],
    budget: int,
) -> RelaxedSolution:
    u = dict(u0)
    sol = solve_relaxed(prob, node, u)
    solves = 1
    step_index = 0
    while sol.unsatisfied and solves < budget:
        d = subgradient(prob, u, sol)
        if all(v == 0 for v in d.values()):
            break
        t = _step(method, step_index)
        step_index += 1
        cand_u = {rid: max(Fraction(0), u[rid] + t * d[rid]) for rid in u}
        if cand_u == u:
            break
        cand = solve_relaxed(prob, node, cand_u)
        solves += 1
        if cand.schedule == sol.schedule:
            # No change in the relaxed solution: converged.
            sol = cand
            break
        if cand.relaxed_value <= sol.relaxed_value:
            u, sol = cand_u, cand
        # A step that worsened the bound is reverted; the shrinking step
        # schedule retries the same direction more cautiously.
    sol.relaxed_solves = solves
    sol.budget_exhausted = bool(sol.unsatisfied) and solves >= budget
    return sol


def _search_dual_descent(
    method: WeightSearchMethod,
    prob: Problem,
    node: PartialSchedule,
    u0: dict[str, Fraction],
    budget: int,
) -> RelaxedSolution:
    u = dict(u0)
    sol = solve_relaxed(prob, node, u)
    solves = 1
    step_index = 0
    req_ids = sorted(u)
    converged = False
    while sol.unsatisfied and solves < budget and not converged:
        cycle_solves = 0
        for rid in req_ids:
            if not sol.unsatisfied or solves >= budget:
                break
            d = subgradient(prob, u, sol)[rid]
            if d == 0:
                continue
            t = _step(method, step_index)
            step_index += 1
            new_u = max(Fraction(0), u[rid] + t * d)
            if new_u == u[rid]:
                continue
            cand_u = dict(u)
            cand_u[rid] = new_u
            cand = solve_relaxed(prob, node, cand_u)
            solves += 1
            cycle_solves += 1
            if cand.schedule == sol.schedule:
                sol = cand
                converged = True
                break
            if cand.relaxed_value <= sol.relaxed_value:
                u, sol = cand_u, cand
        if cycle_solves == 0:
            break
    sol.relaxed_solves = solves
    sol.budget_exhausted = (
        bool(sol.unsatisfied) and solves >= budget and not converged
    )
    return sol


def weight_search(
    method: WeightSearchMethod | str,
    prob: Problem,
    node: PartialSchedule,
    u0: dict[str, Fraction] | None = None,
    budget: int | None = None,
    at_root: bool = True,
) -> RelaxedSolution:
    """Search the weight space for a tight relaxed solution at `node`.

    Stops as soon as the relaxed schedule satisfies every requirement,
    when an update leaves the relaxed solution unchanged, or when the
    budget of relaxed solves runs out (best bound so far is returned with
    `budget_exhausted` set).  Single-weight and full-vector updates are
    kept only when they do not worsen the upper bound.
    """
    if isinstance(method, str):
        method = WeightSearchMethod(method)
    u = dict(u0) if u0 is not None else zero_weights(prob)
    for req in prob.requirements:
        if req.id not in u:
            raise MissingWeightError(f"no weight for requirement {req.id!r}")
    limit = method.budget if budget is None else budget
    if limit < 1:
        raise ValueError("budget must allow at least one relaxed solve")

    code = method.code
    if code == "2c":
        code = "2b" if at_root else "2d"
    if code == "2d":
        return solve_relaxed(prob, node, u)
    if code == "2a":
        return _search_subgradient(method, prob, node, u, limit)
    return _search_dual_descent(method, prob, node, u, limit)

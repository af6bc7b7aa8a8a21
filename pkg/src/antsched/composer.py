"""Statistical hillclimbing over control strategies.

Candidate single-step changes to the current strategy are scored by their
incremental utility on a stream of training problems: the utility
difference between solving each problem with and without the change.
A candidate is adopted or discarded once a normal-theory test says its
mean incremental utility is reliably positive or negative, at a
significance level that splits the per-step error budget evenly across
the live candidates.

Control points are adapted one layer at a time: weight search first, then
refinement method, then the (secondary ordering, value ordering) pair,
then the primary ordering.  Within a layer, steps repeat until no
candidate survives or the training stream runs out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Sequence

from .model import Problem, SolveResult, SolveStatus
from .relaxation import WEIGHT_SEARCH_CODES, WeightSearchMethod
from .search import CostModel, solve
from .strategy import (
    CONSTRAINT_ORDERING_CODES,
    REFINEMENT_CODES,
    VALUE_ORDERING_CODES,
    Strategy,
)

CHECKPOINT_EVERY = 20


class EmptyTransformationSetError(ValueError):
    pass


@dataclass(frozen=True)
class ComposerConfig:
    """Knobs of the statistical test and of utility measurement."""

    delta: Fraction = Fraction(1, 20)
    n0: int = 15
    solve_bound: Fraction | float = Fraction(1000)
    cost_model: CostModel = CostModel.ABSTRACT
    seed: int = 0
    checkpoint_every: int = CHECKPOINT_EVERY

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.n0 < 2:
            raise ValueError("n0 must be at least 2")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be positive")


# ---------------------------------------------------------------------------
# Statistics


@dataclass(frozen=True)
class UtilitySampleStats:
    """Running count, mean, and sum of squared deviations of the
    incremental-utility observations for one transformation."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def variance(self) -> float:
        """Sample variance (n-1 denominator); requires n >= 2."""
        if self.n < 2:
            raise ValueError("sample variance needs at least two samples")
        return self.m2 / (self.n - 1)


def update_stats(stats: UtilitySampleStats, x: float) -> UtilitySampleStats:
    """One step of the numerically stable one-pass mean/variance update."""
    n = stats.n + 1
    delta = x - stats.mean
    mean = stats.mean + delta / n
    m2 = stats.m2 + delta * (x - mean)
    return UtilitySampleStats(n=n, mean=mean, m2=m2)


def bound_alpha(delta: Fraction | float, t_count: int) -> Fraction:
    """Per-candidate error level: the step budget split across candidates."""
    if t_count < 1:
        raise EmptyTransformationSetError("no transformations to bound over")
    return Fraction(delta) / t_count


def normal_upper_tail(x: float) -> float:
    """P(Z >= x) for a standard normal Z."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@lru_cache(maxsize=None)
def q_alpha(alpha: float) -> float:
    """The x whose standard-normal upper tail mass equals alpha/2.

    Bisection on the tail function; the result satisfies
    |tail(x) - alpha/2| < 1e-12 or better.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    target = alpha / 2.0
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if normal_upper_tail(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def is_significant(
    stats: UtilitySampleStats, alpha: Fraction | float, n0: int
) -> bool:
    """Has the mean incremental utility moved reliably away from zero?

    True iff n >= n0 and S^2 / mean^2 < n / Q(alpha)^2.  A zero mean is
    never significant (the ratio is taken as infinite).
    """
    if stats.n < n0 or stats.n < 2:
        return False
    if stats.mean == 0.0:
        return False
    q = q_alpha(float(alpha))
    return stats.variance() / (stats.mean * stats.mean) < stats.n / (q * q)


# ---------------------------------------------------------------------------
# Transformations


@dataclass(frozen=True)
class Transformation:
    """A candidate strategy change: the resulting strategy plus which
    control points it touches."""

    target: Strategy
    changes: tuple[tuple[str, str], ...]

    def label(self) -> str:
        return "+".join(f"{point}={code}" for point, code in self.changes)


LEVELS = (
    ("weight_search",),
    ("refinement",),
    ("secondary_ordering", "value_ordering"),
    ("primary_ordering",),
)


def generate_transformations(strat: Strategy, level: int) -> list[Transformation]:
    """Alternatives to the current strategy at one layer.

    Layer 0 swaps the weight-search method (3 candidates), layer 1 the
    refinement method (1), layer 2 every other (secondary ordering, value
    ordering) pair (44), layer 3 the primary ordering (8).  The current
    strategy itself is never proposed.
    """
    if not 0 <= level < len(LEVELS):
        raise ValueError(f"level must be in 0..{len(LEVELS) - 1}, got {level}")
    out: list[Transformation] = []
    if level == 0:
        current = strat.weight_search
        for code in WEIGHT_SEARCH_CODES:
            if code == current.code:
                continue
            method = WeightSearchMethod(code, current.step_scale, current.budget)
            out.append(Transformation(
                replace(strat, weight_search=method),
                (("weight_search", code),),
            ))
    elif level == 1:
        for code in REFINEMENT_CODES:
            if code == strat.refinement:
                continue
            out.append(Transformation(
                replace(strat, refinement=code),
                (("refinement", code),),
            ))
    elif level == 2:
        for sec in CONSTRAINT_ORDERING_CODES:
            for val in VALUE_ORDERING_CODES:
                if sec == strat.secondary_ordering and val == strat.value_ordering:
                    continue
                out.append(Transformation(
                    replace(strat, secondary_ordering=sec, value_ordering=val),
                    (("secondary_ordering", sec), ("value_ordering", val)),
                ))
    else:
        for code in CONSTRAINT_ORDERING_CODES:
            if code == strat.primary_ordering:
                continue
            out.append(Transformation(
                replace(strat, primary_ordering=code),
                (("primary_ordering", code),),
            ))
    return out


# ---------------------------------------------------------------------------
# Utility measurement


def utility_of(result: SolveResult, bound: Fraction | float) -> Fraction | float:
    """Negative search cost, censored at -bound for unfinished runs."""
    if result.status is SolveStatus.TIMEOUT:
        return -bound
    return -result.cost


def incremental_utility(
    transformation: Transformation,
    base: Strategy,
    prob: Problem,
    bound: Fraction | float,
    cost_model: CostModel = CostModel.ABSTRACT,
) -> Fraction | float:
    """Utility gained by solving `prob` with the transformation applied,
    relative to solving it with the base strategy, both under the same
    resource bound."""
    with_it = solve(prob, transformation.target, bound, cost_model)
    without = solve(prob, base, bound, cost_model)
    return utility_of(with_it, bound) - utility_of(without, bound)


MeasureFn = Callable[[Problem, Sequence[Transformation]], Sequence[float]]


def solver_measure(
    base: Strategy,
    bound: Fraction | float,
    cost_model: CostModel = CostModel.ABSTRACT,
) -> MeasureFn:
    """Measure incremental utilities by actually solving each problem once
    with the base strategy and once per candidate."""

    def measure(prob: Problem, live: Sequence[Transformation]) -> list[float]:
        base_u = utility_of(solve(prob, base, bound, cost_model), bound)
        out = []
        for t in live:
            u = utility_of(solve(prob, t.target, bound, cost_model), bound)
            out.append(float(u - base_u))
        return out

    return measure


# ---------------------------------------------------------------------------
# The hillclimbing step and the layered climb


class StepOutcome(Enum):
    ADOPTED = "adopted"
    ALL_DISCARDED = "all_discarded"
    EXHAUSTED = "exhausted"


@dataclass
class StepResult:
    outcome: StepOutcome
    adopted: Transformation | None
    examples_used: int
    stats: dict[str, UtilitySampleStats]


@dataclass
class AdaptationTrace:
    """Ordered event log of one adaptation run.

    Events are flat JSON-ready dicts: sample, discard, adopt, checkpoint,
    and level records, each carrying the global example index `i`.
    """

    records: list[dict] = field(default_factory=list)

    def record(self, **kw) -> None:
        self.records.append(kw)

    def adoptions(self) -> list[dict]:
        return [r for r in self.records if r["event"] == "adopt"]

    def checkpoints(self) -> list[dict]:
        return [r for r in self.records if r["event"] == "checkpoint"]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
            for r in self.records
        )


def composer_step(
    base: Strategy,
    transformations: Sequence[Transformation],
    stream: Iterator[Problem],
    cfg: ComposerConfig,
    measure: MeasureFn,
    *,
    start_index: int = 0,
    trace: AdaptationTrace | None = None,
    current_for_checkpoint: Strategy | None = None,
) -> StepResult:
    """One hillclimbing step: sample the stream until some candidate is
    adopted, every candidate is discarded, or the stream ends.

    All live candidates see every problem (paired sampling).  Discarded
    candidates are never re-evaluated within the step; the per-candidate
    significance level is delta / |T| for the step's initial T.
    """
    if not transformations:
        raise EmptyTransformationSetError("composer_step needs candidates")
    live: list[Transformation] = list(transformations)
    alpha = bound_alpha(cfg.delta, len(live))
    stats: dict[str, UtilitySampleStats] = {
        t.label(): UtilitySampleStats() for t in live
    }
    i = start_index
    checkpoint_strategy = current_for_checkpoint or base

    for prob in stream:
        i += 1
        values = measure(prob, live)
        for t, x in zip(live, values):
            stats[t.label()] = update_stats(stats[t.label()], float(x))
        if trace is not None:
            trace.record(
                i=i, event="sample",
                stats={
                    t.label(): {
                        "n": stats[t.label()].n,
                        "mean": stats[t.label()].mean,
                        "var": (stats[t.label()].variance()
                                if stats[t.label()].n >= 2 else None),
                    }
                    for t in live
                },
            )
        significant = [
            t for t in live if is_significant(stats[t.label()], alpha, cfg.n0)
        ]
        negatives = [t for t in significant if stats[t.label()].mean < 0]
        for t in negatives:
            live.remove(t)
            if trace is not None:
                trace.record(
                    i=i, event="discard", transformation=t.label(),
                    mean=stats[t.label()].mean, n=stats[t.label()].n,
                )
        positives = [t for t in significant if stats[t.label()].mean > 0]
        adopted: Transformation | None = None
        if positives:
            adopted = max(positives, key=lambda t: stats[t.label()].mean)
        if adopted is not None and trace is not None:
            trace.record(
                i=i, event="adopt", transformation=adopted.label(),
                mean=stats[adopted.label()].mean,
                n=stats[adopted.label()].n,
                strategy=adopted.target.code(),
            )
        if trace is not None and i % cfg.checkpoint_every == 0:
            snapshot = adopted.target if adopted is not None \
                else checkpoint_strategy
            trace.record(i=i, event="checkpoint", strategy=snapshot.code())
        if adopted is not None:
            return StepResult(StepOutcome.ADOPTED, adopted, i - start_index, stats)
        if not live:
            return StepResult(
                StepOutcome.ALL_DISCARDED, None, i - start_index, stats)
    return StepResult(StepOutcome.EXHAUSTED, None, i - start_index, stats)


def adapt(
    initial: Strategy,
    examples: Sequence[Problem] | Iterator[Problem],
    cfg: ComposerConfig,
    measure_factory: Callable[[Strategy], MeasureFn] | None = None,
) -> tuple[Strategy, AdaptationTrace]:
    """Layered hillclimb over the whole training stream.

    Each layer repeats hillclimbing steps (rebuilding the candidate set
    after every adoption) until all candidates are discarded, then moves
    on; the run ends when the stream does.  Returns the final strategy and
    the full event trace.
    """
    if measure_factory is None:
        def measure_factory(base: Strategy) -> MeasureFn:
            return solver_measure(base, cfg.solve_bound, cfg.cost_model)

    stream = iter(examples)
    current = initial
    trace = AdaptationTrace()
    i = 0
    for level in range(len(LEVELS)):
        while True:
            candidates = generate_transformations(current, level)
            if not candidates:
                break
            trace.record(
                i=i, event="level", level=level,
                t_count=len(candidates),
                alpha=float(bound_alpha(cfg.delta, len(candidates))),
            )
            step = composer_step(
                current, candidates, stream, cfg,
                measure_factory(current),
                start_index=i, trace=trace, current_for_checkpoint=current,
            )
            i += step.examples_used
            if step.outcome is StepOutcome.ADOPTED:
                current = step.adopted.target
                continue
            if step.outcome is StepOutcome.ALL_DISCARDED:
                break
            # Stream exhausted: nothing left for any layer.
            trace.record(i=i, event="end", reason="examples-exhausted",
                         strategy=current.code())
            return current, trace
    trace.record(i=i, event="end", reason="levels-complete",
                 strategy=current.code())
    return current, trace

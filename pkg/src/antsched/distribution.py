"""Problem distributions: cross-product augmentation of per-project weekly
blocks, synthetic generators for desk-scale experiments, tractability
filtering, and resource-bound calibration.

A cross-product distribution holds one block per project: the project's
requirements (stable across weeks) plus one set of candidate periods per
recorded week.  A concrete problem combines one week's periods from every
project; the index space is the product of the per-block week counts.  A
synthetic distribution is a seeded pool of generated problems addressed
the same way, so sampling, filtering, and caching work identically.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .composer import q_alpha
from .model import (
    LinearRequirement,
    Problem,
    Relation,
    SolveStatus,
    TimePeriod,
    WEEK_MINUTES,
    validate,
)
from .problem_io import (
    ParseError,
    ValidationError,
    _as_rational,
    _rational_to_json,
    load_problem,
    problem_from_dict,
)
from .search import CostModel, solve
from .strategy import Strategy


class IndexOutOfRangeError(IndexError):
    pass


class EmptyDistributionError(ValueError):
    pass


class InvalidParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectBlock:
    """One project's requirements plus its per-week candidate periods."""

    project: str
    requirements: tuple[LinearRequirement, ...]
    weekly_variants: tuple[tuple[TimePeriod, ...], ...]

    def __post_init__(self) -> None:
        for widx, variant in enumerate(self.weekly_variants):
            for per in variant:
                if per.project != self.project:
                    raise ValueError(
                        f"block {self.project!r} week {widx}: period "
                        f"{per.id!r} belongs to project {per.project!r}"
                    )


@dataclass(frozen=True)
class SynthParams:
    """Shape of a synthetic problem family.

    `window_density` spreads period starts over the week: 0 stacks all of
    a project's windows at the same spot (maximum overlap), 1 scatters
    them over the full horizon.  `requirement_tightness` scales lower
    bounds relative to what the project could attain with every period
    included.
    """

    projects: int = 2
    antennas: int = 2
    periods_per_project: int = 4
    horizon: int = WEEK_MINUTES
    min_length: int = 30
    max_length: int = 240
    window_density: float = 0.5
    requirement_tightness: float = 0.5
    requirements_per_project: int = 1
    minutes_weights: bool = False
    le_fraction: float = 0.0
    pool: int = 1000

    def __post_init__(self) -> None:
        if self.projects < 1 or self.antennas < 1:
            raise InvalidParamsError("need at least one project and antenna")
        if self.periods_per_project < 1:
            raise InvalidParamsError("need at least one period per project")
        if not 0 < self.min_length <= self.max_length <= self.horizon:
            raise InvalidParamsError("bad period length range")
        if self.horizon > WEEK_MINUTES or self.horizon < 1:
            raise InvalidParamsError("horizon must lie in [1, 10080]")
        if not 0.0 <= self.window_density <= 1.0:
            raise InvalidParamsError("window_density must lie in [0, 1]")
        if not 0.0 <= self.requirement_tightness <= 1.0:
            raise InvalidParamsError("requirement_tightness must lie in [0, 1]")
        if self.requirements_per_project < 0:
            raise InvalidParamsError("requirements_per_project must be >= 0")
        if not 0.0 <= self.le_fraction <= 1.0:
            raise InvalidParamsError("le_fraction must lie in [0, 1]")
        if self.pool < 1:
            raise InvalidParamsError("pool must be positive")


@dataclass(frozen=True)
class DistributionSpec:
    """Either a cross-product of project blocks or a seeded synthetic pool,
    optionally narrowed to a retained index set by tractability filtering."""

    blocks: tuple[ProjectBlock, ...] = ()
    synth: SynthParams | None = None
    seed: int = 0
    retained: tuple[int, ...] | None = None

    @property
    def mode(self) -> str:
        return "synthetic" if self.synth is not None else "cross"

    def with_retained(self, retained: Sequence[int]) -> "DistributionSpec":
        return DistributionSpec(
            blocks=self.blocks, synth=self.synth, seed=self.seed,
            retained=tuple(retained),
        )


def augmented_size(spec: DistributionSpec) -> int:
    """Size of the cross-product index space."""
    if spec.mode != "cross":
        raise ValueError("augmented_size applies to cross-product specs")
    size = 1
    for block in spec.blocks:
        size *= len(block.weekly_variants)
    return size


def space_size(spec: DistributionSpec) -> int:
    if spec.mode == "synthetic":
        return spec.synth.pool
    return augmented_size(spec)


def _decode_index(spec: DistributionSpec, index: int) -> tuple[int, ...]:
    """Flat index -> per-block week choices, last block least significant."""
    coords = []
    rest = index
    for block in reversed(spec.blocks):
        k = len(block.weekly_variants)
        coords.append(rest % k)
        rest //= k
    return tuple(reversed(coords))


def materialize(spec: DistributionSpec, index: int | Sequence[int]) -> Problem:
    """The problem at one point of the index space.

    Cross-product specs accept either a flat index or a per-block
    coordinate tuple; synthetic specs take a flat index into the pool.
    Deterministic for a given (spec, index).
    """
    if spec.mode == "synthetic":
        if not isinstance(index, int):
            raise TypeError("synthetic specs use flat integer indices")
        if not 0 <= index < spec.synth.pool:
            raise IndexOutOfRangeError(f"index {index} outside the pool")
        return synth_generate(spec.synth, seed=spec.seed * 1_000_003 + index)

    size = augmented_size(spec)
    if isinstance(index, int):
        if not 0 <= index < size:
            raise IndexOutOfRangeError(f"index {index} outside 0..{size - 1}")
        coords = _decode_index(spec, index)
    else:
        coords = tuple(index)
        if len(coords) != len(spec.blocks):
            raise IndexOutOfRangeError(
                f"expected {len(spec.blocks)} coordinates, got {len(coords)}"
            )
        for c, block in zip(coords, spec.blocks):
            if not 0 <= c < len(block.weekly_variants):
                raise IndexOutOfRangeError(
                    f"week {c} outside block {block.project!r}"
                )
    periods: list[TimePeriod] = []
    requirements: list[LinearRequirement] = []
    for c, block in zip(coords, spec.blocks):
        periods.extend(block.weekly_variants[c])
        requirements.extend(block.requirements)
    prob = Problem(
        projects=tuple(b.project for b in spec.blocks),
        antennas=tuple(sorted({p.antenna for p in periods})),
        periods=tuple(periods),
        requirements=tuple(requirements),
    )
    report = validate(prob)
    if not report.ok():
        raise ValidationError(report)
    return prob


def _index_pool(spec: DistributionSpec) -> Sequence[int]:
    if spec.retained is not None:
        return spec.retained
    return range(space_size(spec))


def sample(spec: DistributionSpec, n: int, seed: int) -> list[Problem]:
    """n independent uniform draws (with replacement) over the retained
    index space; reproducible per seed."""
    pool = _index_pool(spec)
    if len(pool) == 0:
        raise EmptyDistributionError("no retained indices to sample from")
    rng = random.Random(seed)
    picks = [pool[rng.randrange(len(pool))] for _ in range(n)]
    return [materialize(spec, i) for i in picks]


def sample_indices(spec: DistributionSpec, n: int, seed: int) -> list[int]:
    pool = _index_pool(spec)
    if len(pool) == 0:
        raise EmptyDistributionError("no retained indices to sample from")
    rng = random.Random(seed)
    return [pool[rng.randrange(len(pool))] for _ in range(n)]


# ---------------------------------------------------------------------------
# Tractability filtering and bound calibration


@dataclass
class TractabilityReport:
    retained: tuple[int, ...]
    total: int
    bound: Fraction | float
    strategies: tuple[str, ...]

    @property
    def retention_rate(self) -> float:
        return len(self.retained) / self.total if self.total else 0.0


def filter_tractable(
    spec: DistributionSpec,
    strategies: Sequence[Strategy],
    bound: Fraction | float,
    cost_model: CostModel = CostModel.ABSTRACT,
) -> TractabilityReport:
    """Keep the indices some strategy settles (SAT or UNSAT) within bound."""
    if not strategies:
        raise ValueError("need at least one strategy to filter with")
    retained = []
    total = space_size(spec)
    for index in range(total):
        prob = materialize(spec, index)
        for strat in strategies:
            if solve(prob, strat, bound, cost_model).status is not SolveStatus.TIMEOUT:
                retained.append(index)
                break
    return TractabilityReport(
        retained=tuple(retained),
        total=total,
        bound=bound,
        strategies=tuple(s.code() for s in strategies),
    )


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    z = q_alpha(1.0 - confidence)
    phat = successes / n
    denom = 1.0 + z * z / n
    centre = phat + z * z / (2 * n)
    margin = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return (centre - margin) / denom, (centre + margin) / denom


@dataclass
class CalibrationPoint:
    extra_budget: float
    fraction_solved: float
    ci_low: float
    ci_high: float


@dataclass
class CalibrationCurve:
    points: list[CalibrationPoint]
    n_problems: int
    base_bound: float
    extension: float


def calibrate_bound(
    problems: Sequence[Problem],
    base_bound: Fraction | float,
    extension: Fraction | float,
    strat: Strategy,
    points: int = 20,
    cost_model: CostModel = CostModel.ABSTRACT,
) -> CalibrationCurve:
    """Cumulative fraction of bound-B timeouts that an extra budget settles.

    Every input problem must time out at `base_bound` under the strategy.
    Each is re-run once at base_bound + extension; because the search is
    deterministic and the bound only truncates it, the run's final cost
    tells exactly how much extra budget that problem needed.  Pointwise
    95% confidence intervals use the Wilson score.
    """
    if points < 1:
        raise ValueError("need at least one grid point")
    extras: list[Fraction | float] = []
    for prob in problems:
        first = solve(prob, strat, base_bound, cost_model)
        if first.status is not SolveStatus.TIMEOUT:
            raise ValueError(
                "calibration input solved within the base bound; "
                "only timed-out problems belong here"
            )
        rerun = solve(prob, strat, base_bound + extension, cost_model)
        if rerun.status is not SolveStatus.TIMEOUT:
            extras.append(rerun.cost - base_bound)
    n = len(problems)
    curve = []
    for k in range(1, points + 1):
        budget = extension * Fraction(k, points) if isinstance(extension, Fraction) \
            else extension * k / points
        solved = sum(1 for e in extras if e <= budget)
        lo, hi = wilson_interval(solved, n)
        curve.append(CalibrationPoint(
            extra_budget=float(budget),
            fraction_solved=solved / n if n else 0.0,
            ci_low=lo,
            ci_high=hi,
        ))
    return CalibrationCurve(
        points=curve, n_problems=n,
        base_bound=float(base_bound), extension=float(extension),
    )


# ---------------------------------------------------------------------------
# Synthetic generation


def synth_generate(params: SynthParams, seed: int) -> Problem:
    """One random problem honoring all model invariants; deterministic per
    (params, seed).  Solvability is not known in advance."""
    rng = random.Random(seed)
    periods: list[TimePeriod] = []
    requirements: list[LinearRequirement] = []
    for pi in range(params.projects):
        project = f"p{pi + 1}"
        own: list[TimePeriod] = []
        for k in range(params.periods_per_project):
            length = rng.randint(params.min_length, params.max_length)
            span = params.horizon - length
            window = max(1, round(span * params.window_density)) if span > 0 else 1
            start = rng.randrange(window)
            own.append(TimePeriod(
                id=f"{project}-{k + 1}",
                project=project,
                antenna=f"a{rng.randrange(params.antennas) + 1}",
                start=start,
                end=start + length,
            ))
        periods.extend(own)
        for j in range(params.requirements_per_project):
            if params.minutes_weights:
                terms = [(p.id, Fraction(p.length)) for p in own]
            else:
                terms = [(p.id, Fraction(1)) for p in own]
            attainable = sum(c for _, c in terms)
            tight = params.requirement_tightness
            if j > 0:
                # Additional requirements jitter around the base tightness.
                tight = min(1.0, tight * (0.5 + rng.random()))
            if rng.random() < params.le_fraction:
                bound = Fraction(math.floor(attainable * max(tight, 0.05)))
                if bound < 1:
                    bound = Fraction(1)
                relation = Relation.LE
            else:
                bound = Fraction(math.ceil(attainable * tight))
                relation = Relation.GE
            if bound == 0:
                continue
            requirements.append(LinearRequirement(
                id=f"{project}-r{j + 1}",
                terms=tuple(terms),
                relation=relation,
                bound=bound,
            ))
    return Problem(
        projects=tuple(f"p{i + 1}" for i in range(params.projects)),
        antennas=tuple(f"a{i + 1}" for i in range(params.antennas)),
        periods=tuple(periods),
        requirements=tuple(requirements),
    )


# ---------------------------------------------------------------------------
# Spec files and retained-index caches


def _requirement_to_json(req: LinearRequirement) -> dict:
    return {
        "id": req.id,
        "relation": req.relation.value,
        "bound": _rational_to_json(req.bound),
        "terms": [{"period": pid, "coeff": _rational_to_json(c)}
                  for pid, c in req.terms],
    }


def _requirement_from_json(entry: dict) -> LinearRequirement:
    try:
        relation = Relation(entry["relation"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad requirement entry: {exc}") from exc
    return LinearRequirement(
        id=str(entry["id"]),
        terms=tuple(
            (str(t["period"]), _as_rational(t["coeff"], "terms"))
            for t in entry.get("terms", [])
        ),
        relation=relation,
        bound=_as_rational(entry.get("bound", 0), "bound"),
    )


def spec_to_dict(spec: DistributionSpec) -> dict:
    if spec.mode == "synthetic":
        doc: dict = {
            "mode": "synthetic",
            "seed": spec.seed,
            "params": {
                "projects": spec.synth.projects,
                "antennas": spec.synth.antennas,
                "periods_per_project": spec.synth.periods_per_project,
                "horizon": spec.synth.horizon,
                "min_length": spec.synth.min_length,
                "max_length": spec.synth.max_length,
                "window_density": spec.synth.window_density,
                "requirement_tightness": spec.synth.requirement_tightness,
                "requirements_per_project": spec.synth.requirements_per_project,
                "minutes_weights": spec.synth.minutes_weights,
                "le_fraction": spec.synth.le_fraction,
                "pool": spec.synth.pool,
            },
        }
    else:
        doc = {
            "mode": "cross",
            "seed": spec.seed,
            "blocks": [
                {
                    "project": b.project,
                    "requirements": [_requirement_to_json(r)
                                     for r in b.requirements],
                    "weekly_variants": [
                        [{"id": p.id, "project": p.project,
                          "antenna": p.antenna,
                          "start": p.start, "end": p.end}
                         for p in variant]
                        for variant in b.weekly_variants
                    ],
                }
                for b in spec.blocks
            ],
        }
    if spec.retained is not None:
        doc["retained"] = list(spec.retained)
    return doc


def spec_from_dict(doc: dict, base_dir: Path | None = None) -> DistributionSpec:
    mode = doc.get("mode", "cross")
    seed = int(doc.get("seed", 0))
    retained = tuple(doc["retained"]) if "retained" in doc else None
    if mode == "synthetic":
        params = doc.get("params", {})
        try:
            synth = SynthParams(**params)
        except TypeError as exc:
            raise ParseError(f"bad synthetic params: {exc}") from exc
        return DistributionSpec(synth=synth, seed=seed, retained=retained)
    if mode != "cross":
        raise ParseError(f"unknown distribution mode {mode!r}")
    blocks = []
    for bidx, bdoc in enumerate(doc.get("blocks", [])):
        project = str(bdoc.get("project", f"block{bidx}"))
        reqs = tuple(_requirement_from_json(r)
                     for r in bdoc.get("requirements", []))
        variants = []
        for vdoc in bdoc.get("weekly_variants", []):
            if isinstance(vdoc, dict) and "file" in vdoc:
                path = Path(vdoc["file"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                prob = load_problem(path)
                variants.append(tuple(
                    p for p in prob.periods if p.project == project
                ))
            else:
                variants.append(tuple(
                    TimePeriod(
                        id=str(p["id"]), project=str(p["project"]),
                        antenna=str(p["antenna"]),
                        start=int(p["start"]), end=int(p["end"]),
                    )
                    for p in vdoc
                ))
        blocks.append(ProjectBlock(project, reqs, tuple(variants)))
    return DistributionSpec(blocks=tuple(blocks), seed=seed, retained=retained)


def load_spec(path: str | Path) -> DistributionSpec:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"), parse_float=Fraction)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON in {path}: {exc}") from exc
    if "params" in doc and isinstance(doc["params"], dict):
        # SynthParams carries plain floats, not JSON-exact rationals.
        doc["params"] = {
            k: float(v) if isinstance(v, Fraction) else v
            for k, v in doc["params"].items()
        }
    return spec_from_dict(doc, base_dir=p.parent)


def save_spec(spec: DistributionSpec, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(spec_to_dict(spec), indent=2) + "\n", encoding="utf-8"
    )


def save_retained_cache(
    report: TractabilityReport, path: str | Path, spec_label: str = ""
) -> None:
    doc = {
        "indices": list(report.retained),
        "fingerprint": {
            "strategies": list(report.strategies),
            "bound": str(report.bound),
            "total": report.total,
            "spec": spec_label,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_retained_cache(path: str | Path) -> tuple[list[int], dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return list(doc["indices"]), dict(doc.get("fingerprint", {}))

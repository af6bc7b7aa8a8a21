"""The solver's control grammar: five control points, each resolved by one
method drawn from a fixed code set.

    value ordering        1a prefer-gain, 1b penalize-loss,
                          1c penalize-conflictedness,
                          1d prefer-conflictedness, 1e arbitrary
    weight search         2a subgradient-optimization, 2b dual-descent,
                          2c truncated-dual-descent, 2d first-solution
    constraint ordering   3a prefer-max-gain, 3b prefer-total-gain,
    (primary + secondary) 3c penalize-max-loss,
                          3d penalize-max-conflictedness,
                          3e prefer-total-conflictedness,
                          3f penalize-total-conflictedness,
                          3g prefer-min-conflictedness,
                          3h penalize-unforced-periods,
                          3i penalize-satisfaction-distance
    refinement            4a basic, 4b systematic

A strategy assigns one method to each point and is written as the code
string "v,w,p,s,r", e.g. the hand-tuned default "1e,2b,3h,3h,4a".  The
weight-search element may carry parameters, e.g. "2c[c=1,budget=50]".
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, replace
from fractions import Fraction

from .relaxation import (
    DEFAULT_BUDGET,
    DEFAULT_STEP_SCALE,
    WEIGHT_SEARCH_CODES,
    WeightSearchMethod,
)

VALUE_ORDERING_CODES = ("1a", "1b", "1c", "1d", "1e")
CONSTRAINT_ORDERING_CODES = ("3a", "3b", "3c", "3d", "3e", "3f", "3g", "3h", "3i")
REFINEMENT_CODES = ("4a", "4b")

METHOD_NAMES = {
    "1a": "prefer-gain",
    "1b": "penalize-loss",
    "1c": "penalize-conflictedness",
    "1d": "prefer-conflictedness",
    "1e": "arbitrary",
    "2a": "subgradient-optimization",
    "2b": "dual-descent",
    "2c": "truncated-dual-descent",
    "2d": "first-solution",
    "3a": "prefer-max-gain",
    "3b": "prefer-total-gain",
    "3c": "penalize-max-loss",
    "3d": "penalize-max-conflictedness",
    "3e": "prefer-total-conflictedness",
    "3f": "penalize-total-conflictedness",
    "3g": "prefer-min-conflictedness",
    "3h": "penalize-unforced-periods",
    "3i": "penalize-satisfaction-distance",
    "4a": "basic-refinement",
    "4b": "systematic-refinement",
}


class StrategyParseError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    """One method id per control point."""

    value_ordering: str = "1e"
    weight_search: WeightSearchMethod = WeightSearchMethod("2b")
    primary_ordering: str = "3h"
    secondary_ordering: str = "3h"
    refinement: str = "4a"

    def __post_init__(self) -> None:
        if self.value_ordering not in VALUE_ORDERING_CODES:
            raise ValueError(f"bad value ordering {self.value_ordering!r}")
        if self.primary_ordering not in CONSTRAINT_ORDERING_CODES:
            raise ValueError(f"bad primary ordering {self.primary_ordering!r}")
        if self.secondary_ordering not in CONSTRAINT_ORDERING_CODES:
            raise ValueError(f"bad secondary ordering {self.secondary_ordering!r}")
        if self.refinement not in REFINEMENT_CODES:
            raise ValueError(f"bad refinement method {self.refinement!r}")

    def code(self) -> str:
        """Canonical code string; weight-search parameters are shown only
        when they differ from the defaults."""
        ws = self.weight_search
        token = ws.code
        params = []
        if ws.step_scale != DEFAULT_STEP_SCALE:
            params.append(f"c={ws.step_scale}")
        if ws.budget != DEFAULT_BUDGET:
            params.append(f"budget={ws.budget}")
        if params:
            token += "[" + ",".join(params) + "]"
        return ",".join((self.value_ordering, token, self.primary_ordering,
                         self.secondary_ordering, self.refinement))

    def with_methods(self, **changes) -> "Strategy":
        if "weight_search" in changes and isinstance(changes["weight_search"], str):
            changes["weight_search"] = WeightSearchMethod(changes["weight_search"])
        return replace(self, **changes)

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.code()


EXPERT_STRATEGY = Strategy("1e", WeightSearchMethod("2b"), "3h", "3h", "4a")

_WS_TOKEN = re.compile(r"^(2[a-d])(?:\[([^\]]*)\])?$")


def _parse_weight_search(token: str) -> WeightSearchMethod:
    m = _WS_TOKEN.match(token)
    if not m:
        raise StrategyParseError(f"bad weight-search token {token!r}")
    code, params = m.group(1), m.group(2)
    scale = DEFAULT_STEP_SCALE
    budget = DEFAULT_BUDGET
    if params:
        for item in params.split(","):
            if not item.strip():
                continue
            key, _, raw = item.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key == "c":
                try:
                    scale = Fraction(raw)
                except (ValueError, ZeroDivisionError):
                    raise StrategyParseError(f"bad step scale {raw!r}") from None
            elif key == "budget":
                if not raw.isdigit() or int(raw) < 1:
                    raise StrategyParseError(f"bad budget {raw!r}")
                budget = int(raw)
            else:
                raise StrategyParseError(f"unknown weight-search parameter {key!r}")
    return WeightSearchMethod(code, scale, budget)


def parse_strategy(text: str) -> Strategy:
    """Parse a code string like "1c,2d,3h,3e,4b".

    Surrounding whitespace and angle brackets are tolerated.
    """
    cleaned = text.strip().strip("<>⟨⟩ ")
    parts = [p.strip() for p in cleaned.split(",")]
    # Re-join weight-search parameter lists that contained commas.
    merged: list[str] = []
    for part in parts:
        if merged and "[" in merged[-1] and "]" not in merged[-1]:
            merged[-1] += "," + part
        else:
            merged.append(part)
    if len(merged) != 5:
        raise StrategyParseError(
            f"expected 5 comma-separated method codes, got {text!r}"
        )
    v, w, p, s, r = merged
    try:
        return Strategy(v, _parse_weight_search(w), p, s, r)
    except ValueError as exc:
        raise StrategyParseError(str(exc)) from None


def all_strategies() -> list[Strategy]:
    """Every strategy expressible in the grammar (5*4*9*9*2 = 3240)."""
    out = []
    for v, w, p, s, r in itertools.product(
        VALUE_ORDERING_CODES, WEIGHT_SEARCH_CODES,
        CONSTRAINT_ORDERING_CODES, CONSTRAINT_ORDERING_CODES,
        REFINEMENT_CODES,
    ):
        out.append(Strategy(v, WeightSearchMethod(w), p, s, r))
    return out


def strategy_space_size() -> int:
    return (len(VALUE_ORDERING_CODES) * len(WEIGHT_SEARCH_CODES)
            * len(CONSTRAINT_ORDERING_CODES) ** 2 * len(REFINEMENT_CODES))

"""JSON serialization of scheduling problems.

File format (UTF-8 JSON)::

    {
      "projects": ["A", ...],
      "antennas": ["a1", ...],
      "periods": [{"id": "s1", "project": "A", "antenna": "a1",
                   "start": 0, "end": 10}, ...],
      "requirements": [{"id": "P1", "relation": "ge", "bound": 2,
                        "terms": [{"period": "s1", "coeff": 1}, ...]}, ...]
    }

Times are integer minutes in [0, 10080].  Coefficients and bounds may be
integers, decimal numbers (parsed exactly as decimals), or "p/q" strings;
save() emits integers where possible and "p/q" otherwise so that
load(save(p)) is the identity.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .model import (
    LinearRequirement,
    Problem,
    Relation,
    TimePeriod,
    ValidationReport,
    WEEK_MINUTES,
    validate,
)


class ParseError(ValueError):
    """Malformed problem file: bad JSON, missing fields, bad tokens."""


class ValidationError(ValueError):
    """Structurally parseable problem that breaks the model invariants."""

    def __init__(self, report: ValidationReport):
        self.report = report
        lines = "; ".join(f"{f.code}({f.subject})" for f in report.findings)
        super().__init__(f"invalid problem: {lines}")


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ParseError(f"{where}: missing required field {key!r}")
    return obj[key]


def _as_rational(value: Any, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{where}: bad rational literal {value!r}") from exc
    raise ParseError(f"{where}: expected a number, got {type(value).__name__}")


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return value


def problem_from_dict(doc: dict) -> Problem:
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")
    projects = tuple(str(p) for p in doc.get("projects", []))
    antennas = tuple(str(a) for a in doc.get("antennas", []))
    periods = []
    for idx, entry in enumerate(doc.get("periods", [])):
        where = f"periods[{idx}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{where}: expected an object")
        periods.append(TimePeriod(
            id=str(_require(entry, "id", where)),
            project=str(_require(entry, "project", where)),
            antenna=str(_require(entry, "antenna", where)),
            start=_as_int(_require(entry, "start", where), where),
            end=_as_int(_require(entry, "end", where), where),
        ))
    requirements = []
    for idx, entry in enumerate(doc.get("requirements", [])):
        where = f"requirements[{idx}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{where}: expected an object")
        rel_token = _require(entry, "relation", where)
        try:
            relation = Relation(rel_token)
        except ValueError:
            raise ParseError(
                f"{where}: relation must be 'ge' or 'le', got {rel_token!r}"
            ) from None
        terms = []
        for tidx, term in enumerate(entry.get("terms", [])):
            twhere = f"{where}.terms[{tidx}]"
            if not isinstance(term, dict):
                raise ParseError(f"{twhere}: expected an object")
            terms.append((
                str(_require(term, "period", twhere)),
                _as_rational(_require(term, "coeff", twhere), twhere),
            ))
        requirements.append(LinearRequirement(
            id=str(_require(entry, "id", where)),
            terms=tuple(terms),
            relation=relation,
            bound=_as_rational(_require(entry, "bound", where), where),
        ))
    if not projects:
        projects = tuple(sorted({p.project for p in periods}))
    if not antennas:
        antennas = tuple(sorted({p.antenna for p in periods}))
    return Problem(projects, antennas, tuple(periods), tuple(requirements))


def drop_invalid_entries(prob: Problem) -> tuple[Problem, ValidationReport]:
    """Preprocessing mode: remove periods with bad intervals, terms that
    dangle or carry zero coefficients, instead of rejecting the file.

    Returns the cleaned problem plus a report of what was dropped.
    """
    dropped = ValidationReport()
    keep_periods = []
    for p in prob.periods:
        if 0 <= p.start < p.end <= WEEK_MINUTES:
            keep_periods.append(p)
        else:
            code = "empty-interval" if p.start >= p.end else "time-out-of-range"
            dropped.add(code, p.id, f"dropped period {p.id!r}")
    kept_ids = {p.id for p in keep_periods}
    keep_reqs = []
    for r in prob.requirements:
        terms = []
        for pid, coeff in r.terms:
            if pid not in kept_ids:
                dropped.add("dangling-reference", r.id,
                            f"dropped term {pid!r} of requirement {r.id!r}")
            elif coeff == 0:
                dropped.add("zero-coefficient", r.id,
                            f"dropped zero-coefficient term {pid!r} of {r.id!r}")
            else:
                terms.append((pid, coeff))
        keep_reqs.append(LinearRequirement(r.id, tuple(terms), r.relation, r.bound))
    cleaned = Problem(prob.projects, prob.antennas,
                      tuple(keep_periods), tuple(keep_reqs))
    return cleaned, dropped


def loads_problem(text: str, drop_invalid: bool = False) -> Problem:
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc}") from exc
    prob = problem_from_dict(doc)
    if drop_invalid:
        prob, _ = drop_invalid_entries(prob)
    report = validate(prob)
    if not report.ok():
        raise ValidationError(report)
    return prob


def load_problem(path: str | Path, drop_invalid: bool = False) -> Problem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return loads_problem(text, drop_invalid=drop_invalid)


def _rational_to_json(x: Fraction) -> int | str:
    if x.denominator == 1:
        return int(x)
    return f"{x.numerator}/{x.denominator}"


def problem_to_dict(prob: Problem) -> dict:
    return {
        "projects": list(prob.projects),
        "antennas": list(prob.antennas),
        "periods": [
            {"id": p.id, "project": p.project, "antenna": p.antenna,
             "start": p.start, "end": p.end}
            for p in prob.periods
        ],
        "requirements": [
            {"id": r.id, "relation": r.relation.value,
             "bound": _rational_to_json(r.bound),
             "terms": [{"period": pid, "coeff": _rational_to_json(c)}
                       for pid, c in r.terms]}
            for r in prob.requirements
        ],
    }


def dumps_problem(prob: Problem) -> str:
    return json.dumps(problem_to_dict(prob), indent=2, sort_keys=False) + "\n"


def save_problem(prob: Problem, path: str | Path) -> None:
    Path(path).write_text(dumps_problem(prob), encoding="utf-8")

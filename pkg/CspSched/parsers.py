# csp_sched/parsers.py
"""
Parse instance and solution JSON into model objects, and back.

Every error names where in the document it happened, e.g.
  instance.json: users[2].preferences[0].values[1]: expected [re, im]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from core_model import (
    ComplexPower,
    DemandPreference,
    Elasticity,
    FractionalSolution,
    Instance,
    Pair,
    Selection,
    User,
)
from errors import CspSchedError, ParseError


# ─── Field readers ────────────────────────────────────────────────────────────

def _get(obj: Any, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(where, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise ParseError(where, f"missing field {key!r}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ParseError(where, f"expected a finite number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(where, f"expected an integer, got {value!r}")
    return value


def _string(value: Any, where: str) -> str:
    if not isinstance(value, str):
        raise ParseError(where, f"expected a string, got {value!r}")
    return value


def _list(value: Any, where: str) -> list:
    if not isinstance(value, list):
        raise ParseError(where, f"expected a list, got {type(value).__name__}")
    return value


# ─── Instance ─────────────────────────────────────────────────────────────────

def parse_instance(data: Any, source: str = 'instance') -> Instance:
    """
    {"m": int, "capacities": [real], "users": [{"id", "preferences": [...]}]}

    Structure only; modelling assumptions are left to core_model.validate.
    """
    m = _integer(_get(data, 'm', source), f"{source}: m")
    capacities = tuple(
        _number(c, f"{source}: capacities[{t}]")
        for t, c in enumerate(_list(_get(data, 'capacities', source), f"{source}: capacities"))
    )

    users = []
    for k, raw_user in enumerate(_list(_get(data, 'users', source), f"{source}: users")):
        where_user = f"{source}: users[{k}]"
        user_id = _string(_get(raw_user, 'id', where_user), f"{where_user}.id")
        prefs = []
        raw_prefs = _list(_get(raw_user, 'preferences', where_user), f"{where_user}.preferences")
        for j, raw_pref in enumerate(raw_prefs):
            where = f"{where_user}.preferences[{j}]"
            window = tuple(
                _integer(t, f"{where}.window[{i}]")
                for i, t in enumerate(_list(_get(raw_pref, 'window', where), f"{where}.window"))
            )
            raw_values = _list(_get(raw_pref, 'values', where), f"{where}.values")
            if len(raw_values) != len(window):
                raise ParseError(
                    f"{where}.values",
                    f"{len(raw_values)} values for a window of {len(window)} slots",
                )
            values = []
            for i, pair in enumerate(raw_values):
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ParseError(f"{where}.values[{i}]", f"expected [re, im], got {pair!r}")
                values.append(ComplexPower(
                    _number(pair[0], f"{where}.values[{i}][0]"),
                    _number(pair[1], f"{where}.values[{i}][1]"),
                ))
            elastic = raw_pref.get('elastic', False)
            if not isinstance(elastic, bool):
                raise ParseError(f"{where}.elastic", f"expected true/false, got {elastic!r}")
            try:
                prefs.append(DemandPreference(
                    pref_id=_string(_get(raw_pref, 'id', where), f"{where}.id"),
                    window=window,
                    values=tuple(values),
                    utility=_number(_get(raw_pref, 'utility', where), f"{where}.utility"),
                    elasticity=Elasticity.ELASTIC if elastic else Elasticity.INELASTIC,
                ))
            except CspSchedError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(where, str(exc)) from exc
        users.append(User(user_id, tuple(prefs)))

    return Instance(m, capacities, tuple(users))


def instance_to_json(instance: Instance) -> dict:
    return {
        'm': instance.m,
        'capacities': list(instance.capacities),
        'users': [
            {
                'id': user.user_id,
                'preferences': [
                    {
                        'id': pref.pref_id,
                        'window': list(pref.window),
                        'values': [[v.re, v.im] for v in pref.values],
                        'utility': pref.utility,
                        'elastic': pref.is_elastic,
                    }
                    for pref in user.preferences
                ],
            }
            for user in instance.users
        ],
    }


# ─── Solution ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SolutionRecord:
    """What a solution file holds: integral choices plus fractional ones."""

    chosen:     tuple[Pair, ...] = ()
    fractional: tuple[tuple[str, str, float], ...] = ()
    metadata:   dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_selection(cls, selection: Selection) -> 'SolutionRecord':
        return cls(tuple(selection.pairs))

    @classmethod
    def from_fractional(cls, solution: FractionalSolution, tol: float = 1e-9) -> 'SolutionRecord':
        chosen = tuple(pair for pair, x in solution.x.items() if x >= 1 - tol)
        fractional = tuple(
            (u, p, float(x)) for (u, p), x in solution.x.items() if tol < x < 1 - tol
        )
        return cls(chosen, fractional)

    def selection(self) -> Selection:
        return Selection(self.chosen)

    def weights(self) -> FractionalSolution:
        x: dict[Pair, float] = {pair: 1.0 for pair in self.chosen}
        for u, p, v in self.fractional:
            x[(u, p)] = x.get((u, p), 0.0) + v
        return FractionalSolution(x)

    @property
    def is_integral(self) -> bool:
        return not self.fractional


def parse_solution(data: Any, source: str = 'solution') -> SolutionRecord:
    chosen = []
    for i, pair in enumerate(_list(_get(data, 'chosen', source), f"{source}: chosen")):
        where = f"{source}: chosen[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(where, f"expected [user, pref], got {pair!r}")
        chosen.append((_string(pair[0], f"{where}[0]"), _string(pair[1], f"{where}[1]")))

    fractional = []
    for i, entry in enumerate(_list(data.get('fractional', []), f"{source}: fractional")):
        where = f"{source}: fractional[{i}]"
        if not isinstance(entry, list) or len(entry) != 3:
            raise ParseError(where, f"expected [user, pref, x], got {entry!r}")
        x = _number(entry[2], f"{where}[2]")
        if not 0 <= x <= 1:
            raise ParseError(f"{where}[2]", f"x={x} outside [0, 1]")
        fractional.append((_string(entry[0], f"{where}[0]"), _string(entry[1], f"{where}[1]"), x))

    return SolutionRecord(tuple(chosen), tuple(fractional))


def solution_to_json(record: SolutionRecord) -> dict:
    return {
        'chosen': [[u, p] for u, p in record.chosen],
        'fractional': [[u, p, x] for u, p, x in record.fractional],
    }

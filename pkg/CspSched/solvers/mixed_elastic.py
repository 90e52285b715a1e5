# csp_sched/solvers/mixed_elastic.py
"""
Elastic demands through an inelastic solver

An elastic preference may be served at any fraction x ∈ [0, 1]. Each one
is replaced by a ladder of inelastic levels, level i serving the fraction
εLB(1+ε)^i / (n·u) (capped at 1), all levels in the user's original bag.
Levels that overflow a slot on their own are never built. Any inelastic
solver runs on the ladder instance and its choice is mapped back
level → fraction; the per-slot loads are unchanged by the mapping,
so the inner solver's β carries over and utility drops by at most (1−ε).
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from core_model import (
    FEAS_TOL,
    DemandPreference,
    Elasticity,
    FractionalSolution,
    Instance,
    Pair,
    Selection,
    SolveReport,
    User,
    evaluate_fractional,
)
from errors import InstanceError
from preconditions import assert_epsilon

log = logging.getLogger(__name__)

SOLVER_NAME = 'mixed'

InnerSolver = Callable[[Instance], tuple[Selection, Any]]


@dataclass(frozen=True)
class LowerBoundLB:
    value: float


@dataclass(frozen=True)
class ElasticLevel:
    user_id:  str
    pref_id:  str
    level:    int
    fraction: float


@dataclass(frozen=True)
class LevelMap:
    lb:      float
    epsilon: float
    levels:  dict = field(default_factory=dict)   # (user_id, level pref_id) -> ElasticLevel
    dropped: int = 0                               # levels over C_t, never built

    def origin(self, pair: Pair) -> ElasticLevel | None:
        return self.levels.get(pair)


def level_pref_id(pref_id: str, level: int) -> str:
    return f"{pref_id}#L{level}"


# ─── Lower bound ──────────────────────────────────────────────────────────────

def _elastic_cap(pref: DemandPreference, instance: Instance) -> float:
    """Utility of serving an elastic pref at the largest fraction that fits alone."""
    ratios = [
        pref.utility * instance.capacity(t) / value.magnitude
        for t, value in pref.slot_values.items()
        if value.magnitude > 0
    ]
    return min([*ratios, pref.utility])


def compute_lb(instance: Instance) -> LowerBoundLB:
    """Larger of the best inelastic utility and the best elastic pref served alone."""
    values = [
        _elastic_cap(pref, instance) if pref.is_elastic else pref.utility
        for _, pref in instance.pairs()
    ]
    if not values:
        raise InstanceError(
            "[mixed_elastic] ❌ compute_lb needs at least one preference — the instance is empty"
        )
    return LowerBoundLB(max(values))


def lb_witness(instance: Instance) -> FractionalSolution:
    """A single-demand feasible solution whose utility is exactly LB."""
    best: tuple[float, Pair, float] | None = None
    for user, pref in instance.pairs():
        if pref.is_elastic:
            x = min([1.0, *(
                instance.capacity(t) / v.magnitude
                for t, v in pref.slot_values.items() if v.magnitude > 0
            )])
        else:
            x = 1.0
        candidate = (pref.utility * x, (user.user_id, pref.pref_id), x)
        if best is None or candidate[0] > best[0]:
            best = candidate
    if best is None:
        return FractionalSolution({})
    return FractionalSolution({best[1]: best[2]})


# ─── Discretization ───────────────────────────────────────────────────────────

def level_count(n: int, utility: float, epsilon: float, lb: float) -> int:
    """max(1, ⌈log_{1+ε}(n·u / (ε·LB))⌉), counted exactly."""
    target = Fraction(n) * Fraction(utility) / (Fraction(epsilon) * Fraction(lb))
    step = 1 + Fraction(epsilon)
    count, power = 0, Fraction(1)
    while power < target:
        power *= step
        count += 1
    return max(1, count)


def _fractions(n: int, utility: float, epsilon: float, lb: float, exact: bool) -> list[float]:
    count = level_count(n, utility, epsilon, lb)
    if exact:
        base = Fraction(epsilon) * Fraction(lb) / (Fraction(n) * Fraction(utility))
        step = 1 + Fraction(epsilon)
        out = []
        for i in range(1, count + 1):
            value = base * step ** i
            if i < count and value > 1:
                raise AssertionError(f"level {i} of {count} exceeds 1 ({float(value)})")
            out.append(float(min(value, Fraction(1))))
        return out
    base = epsilon * lb / (n * utility)
    return [min(base * (1 + epsilon) ** i, 1.0) for i in range(1, count + 1)]


def _fits_alone(pref: DemandPreference, fraction: float, instance: Instance) -> bool:
    return all(
        value.magnitude * fraction <= instance.capacity(t) * (1 + FEAS_TOL)
        for t, value in pref.slot_values.items()
    )


def discretize(instance: Instance, epsilon: float,
               exact: bool = False) -> tuple[Instance, LevelMap]:
    """
    Fully inelastic instance: every elastic pref becomes its ladder of levels.

    Inelastic prefs are copied as they are. A level whose demand exceeds
    C_t in some slot of its window is not built; a user left with no
    preferences is dropped. With exact=True the level fractions are
    computed in rational arithmetic.
    """
    assert_epsilon(epsilon, SOLVER_NAME)
    if not instance.has_elastic:
        return instance, LevelMap(0.0, epsilon, {})

    lb = compute_lb(instance).value
    n = instance.n
    levels: dict[Pair, ElasticLevel] = {}
    dropped = 0
    users = []
    for user in instance.users:
        prefs = []
        for pref in user.preferences:
            if not pref.is_elastic:
                prefs.append(pref)
                continue
            for i, frac in enumerate(_fractions(n, pref.utility, epsilon, lb, exact), start=1):
                if not _fits_alone(pref, frac, instance):
                    dropped += 1
                    continue
                new_id = level_pref_id(pref.pref_id, i)
                prefs.append(pref.replace_values(
                    (v.scaled(frac) for v in pref.values),
                    pref_id=new_id,
                    utility=pref.utility * frac,
                    elasticity=Elasticity.INELASTIC,
                ))
                levels[(user.user_id, new_id)] = ElasticLevel(user.user_id, pref.pref_id, i, frac)
        if prefs:
            users.append(User(user.user_id, tuple(prefs)))

    log.debug("discretized %d elastic prefs into %d levels, %d over capacity (LB=%.6g)",
              len({(lv.user_id, lv.pref_id) for lv in levels.values()}), len(levels), dropped, lb)
    return instance.with_users(users), LevelMap(lb, epsilon, levels, dropped)


def map_back(level_solution: Selection, level_map: LevelMap) -> FractionalSolution:
    """Chosen level i of an elastic pref becomes its fraction; inelastic choices stay 1."""
    if not level_solution.respects_bags():
        raise ValueError("map_back needs a selection with at most one preference per user")
    x: dict[Pair, float] = {}
    for pair in level_solution.pairs:
        level = level_map.origin(pair)
        if level is None:
            x[pair] = 1.0
            continue
        if level.fraction > 1 + 1e-12:
            raise AssertionError(f"level {pair} maps to fraction {level.fraction} > 1")
        x[(level.user_id, level.pref_id)] = min(level.fraction, 1.0)
    return FractionalSolution(x)


# ─── Solve ────────────────────────────────────────────────────────────────────

def solve_mixed(instance: Instance, epsilon: float,
                inner_solver: InnerSolver) -> tuple[FractionalSolution, SolveReport]:
    """map_back(inner_solver(discretize(instance)))."""
    started = time.perf_counter()
    discretized, level_map = discretize(instance, epsilon)
    inner = inner_solver(discretized)
    selection = inner[0]
    solution = map_back(selection, level_map)

    report = evaluate_fractional(instance, solution, SOLVER_NAME, time.perf_counter() - started)
    inner_report = inner[1] if isinstance(inner[1], SolveReport) else None
    report.metadata.update(
        epsilon=epsilon,
        lb=level_map.lb,
        levels=len(level_map.levels),
        dropped_levels=level_map.dropped,
        discretized_prefs=sum(len(u.preferences) for u in discretized.users),
        inner_solver=inner_report.solver_name if inner_report else getattr(inner_solver, '__name__', 'inner'),
    )
    log.info("%s: utility=%.6g beta=%.6g (%d levels)",
             SOLVER_NAME, report.utility, report.violation_beta, len(level_map.levels))
    return solution, report

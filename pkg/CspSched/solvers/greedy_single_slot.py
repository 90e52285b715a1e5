# csp_sched/solvers/greedy_single_slot.py
"""
Single-slot greedy

For m = 1 only magnitudes matter to the greedy: every preference set is
pruned to an upper concave chain, the chain is cut into incremental
items, and the items are packed in efficiency order.

  solve_fractional  -> optimal value of the magnitude relaxation
  solve             -> integral greedy vs best single demand, β = 1
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import math
import time
from dataclasses import dataclass

from core_model import (
    FEAS_TOL,
    FractionalSolution,
    Instance,
    Selection,
    SolveReport,
    User,
    evaluate,
)
from errors import PreconditionError
from preconditions import assert_first_quadrant, assert_single_slot

log = logging.getLogger(__name__)

SOLVER_NAME = 'greedy'


# ─── Types ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Level:
    pref_id:   str | None
    magnitude: float
    utility:   float


@dataclass(frozen=True)
class IncrementalItem:
    user_id: str
    level:   int
    delta_u: float
    delta_s: float

    @property
    def efficiency(self) -> float:
        return math.inf if self.delta_s == 0 else self.delta_u / self.delta_s

    def sort_key(self) -> tuple:
        return (-self.efficiency, self.user_id, self.level)


@dataclass(frozen=True)
class ReducedPreferenceSet:
    """
    Levels 0..r of one user; level 0 is the dummy (no demand).

    |s| and u increase strictly along the levels and the incremental
    efficiencies decrease strictly. The only exception is a zero-magnitude
    demand, which sits at level 1 with |s| = 0 and infinite efficiency.
    """

    user_id: str
    levels:  tuple[Level, ...]

    def items(self) -> list[IncrementalItem]:
        return [
            IncrementalItem(
                self.user_id, j,
                self.levels[j].utility - self.levels[j - 1].utility,
                self.levels[j].magnitude - self.levels[j - 1].magnitude,
            )
            for j in range(1, len(self.levels))
        ]


DUMMY = Level(None, 0.0, 0.0)


# ─── Preprocessing ────────────────────────────────────────────────────────────

def _below_or_on(a: Level, b: Level, c: Level) -> bool:
    """b lies on or below the segment a → c."""
    cross = (b.magnitude - a.magnitude) * (c.utility - a.utility) \
          - (b.utility - a.utility) * (c.magnitude - a.magnitude)
    return cross >= 0


def reduce_preferences(user: User, m: int = 1) -> ReducedPreferenceSet:
    """
    Drop every preference that some optimal solution never needs.

    Dominated demands (no smaller and no more useful) go first; what is
    left is scanned into the upper concave hull anchored at the dummy,
    which removes the efficiency- and LP-dominated ones in one pass.
    On exact ties the higher-utility demand is kept.
    """
    if m != 1 or any(t != 1 for p in user.preferences for t in p.window):
        raise PreconditionError(
            f"reduce_preferences requires m=1 (single-slot instance); user {user.user_id} "
            "has a demand outside slot 1"
        )

    points = sorted(
        (Level(p.pref_id, p.value_at(1).magnitude, p.utility) for p in user.preferences),
        key=lambda lv: (lv.magnitude, -lv.utility, lv.pref_id),
    )

    # Dominance: keep a point only if it beats every smaller one on utility.
    frontier: list[Level] = []
    for point in points:
        if frontier and point.utility <= frontier[-1].utility:
            continue
        frontier.append(point)

    anchor_is_zero = bool(frontier) and frontier[0].magnitude == 0
    hull: list[Level] = [DUMMY]
    start = 0
    if anchor_is_zero:
        hull.append(frontier[0])
        start = 1

    for point in frontier[start:]:
        while len(hull) >= 2 + int(anchor_is_zero) and _below_or_on(hull[-2], hull[-1], point):
            hull.pop()
        hull.append(point)

    return ReducedPreferenceSet(user.user_id, tuple(hull))


def _sorted_items(instance: Instance) -> tuple[dict[str, ReducedPreferenceSet], list[IncrementalItem]]:
    reduced = {u.user_id: reduce_preferences(u, instance.m) for u in instance.users}
    items = [item for r in reduced.values() for item in r.items()]
    items.sort(key=IncrementalItem.sort_key)
    return reduced, items


# ─── Fractional optimum ───────────────────────────────────────────────────────

def solve_fractional(instance: Instance) -> tuple[FractionalSolution, float]:
    """
    Optimal solution of the magnitude relaxation with Σ_j x = 1 per user.

    Items are packed whole while they fit; the first that does not is taken
    fractionally, so at most two adjacent levels of one user are fractional.
    """
    assert_single_slot(instance, 'greedy')
    assert_first_quadrant(instance, 'greedy')
    if not instance.users:
        return FractionalSolution({}), 0.0

    reduced, items = _sorted_items(instance)
    capacity = instance.capacity(1)
    remaining = capacity
    reached = {user_id: 0 for user_id in reduced}
    split: tuple[str, int, float] | None = None

    for item in items:
        if item.delta_s <= remaining + FEAS_TOL * capacity:
            remaining = max(remaining - item.delta_s, 0.0)
            reached[item.user_id] = item.level
            continue
        split = (item.user_id, item.level, remaining / item.delta_s)
        break

    x: dict[tuple[str, str], float] = {}
    for user_id, level in reached.items():
        pref_id = reduced[user_id].levels[level].pref_id
        if pref_id is not None:
            x[(user_id, pref_id)] = 1.0

    if split is not None and split[2] > 0:
        user_id, level, f = split
        levels = reduced[user_id].levels
        below = levels[level - 1].pref_id
        if below is not None:
            x[(user_id, below)] = 1.0 - f
        x[(user_id, levels[level].pref_id)] = f

    solution = FractionalSolution(x)
    return solution, solution.utility(instance)


# ─── Integral greedy ──────────────────────────────────────────────────────────

def _greedy_selection(instance: Instance) -> Selection:
    reduced, items = _sorted_items(instance)
    capacity = instance.capacity(1)
    remaining = capacity
    reached = {user_id: 0 for user_id in reduced}

    for item in items:
        if item.delta_s > remaining + FEAS_TOL * capacity:
            break
        remaining = max(remaining - item.delta_s, 0.0)
        reached[item.user_id] = item.level

    return Selection(tuple(
        (user_id, reduced[user_id].levels[level].pref_id)
        for user_id, level in reached.items()
        if level > 0
    ))


def _best_single(instance: Instance) -> Selection:
    capacity = instance.capacity(1)
    best = min(
        ((u, p) for u, p in instance.pairs()
         if p.value_at(1).magnitude <= capacity * (1 + FEAS_TOL)),
        key=lambda up: (-up[1].utility, up[0].user_id, up[1].pref_id),
        default=None,
    )
    if best is None:
        return Selection()
    user, pref = best
    return Selection(((user.user_id, pref.pref_id),))


def solve(instance: Instance) -> tuple[Selection, SolveReport]:
    """Better of the packed greedy prefix and the single most useful demand."""
    started = time.perf_counter()
    assert_single_slot(instance, 'greedy')
    assert_first_quadrant(instance, 'greedy')

    greedy = _greedy_selection(instance)
    single = _best_single(instance)
    greedy_u = greedy.utility(instance)
    single_u = single.utility(instance)
    selection = greedy if greedy_u >= single_u else single

    report = evaluate(instance, selection, SOLVER_NAME, time.perf_counter() - started)
    report.metadata.update(greedy_utility=greedy_u, best_single_utility=single_u)
    log.info("%s: utility=%.6g beta=%.6g", SOLVER_NAME, report.utility, report.violation_beta)
    return selection, report

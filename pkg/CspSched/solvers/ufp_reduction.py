# csp_sched/solvers/ufp_reduction.py
"""
Reduction to bag-UFP

When every demand is constant over a contiguous window and sits in the
first quadrant, replacing each demand by its magnitude gives a real
unsplittable-flow-on-a-path instance with bags. Any selection that is
feasible there is feasible for the complex instance (|Σ s| ≤ Σ |s|), so
real solvers can be run and their answers carried straight back.

Demands are split by size relative to their bottleneck capacity:

  large  -> pairwise-disjoint selection by local ratio (½ of the best
            disjoint bag-respecting selection)
  small  -> efficiency greedy on residual capacities (no ratio claimed)

Both sub-solvers share one signature, (bag, split) -> Selection, so the
exhaustive solver can stand in for either.
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import math
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable

from core_model import (
    FEAS_TOL,
    Instance,
    Pair,
    Selection,
    SolveReport,
    angle_stats,
    evaluate,
    is_feasible,
)
from errors import PreconditionError
from oracle import OracleBudget
from preconditions import assert_constant_contiguous, assert_first_quadrant

log = logging.getLogger(__name__)

SOLVER_NAME = 'ufp'


# ─── Types ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BagPreference:
    pref_id: str
    demand:  float
    start:   int
    end:     int
    utility: float

    def covers(self, t: int) -> bool:
        return self.start <= t <= self.end

    def overlaps(self, other: 'BagPreference') -> bool:
        return self.start <= other.end and other.start <= self.end

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class BagUser:
    user_id:     str
    preferences: tuple[BagPreference, ...]


@dataclass(frozen=True)
class RealBagInstance:
    m:          int
    capacities: tuple[float, ...]
    users:      tuple[BagUser, ...]

    @cached_property
    def index(self) -> dict[Pair, BagPreference]:
        return {(u.user_id, p.pref_id): p for u in self.users for p in u.preferences}

    def capacity(self, t: int) -> float:
        return self.capacities[t - 1]

    def bottleneck(self, pref: BagPreference) -> int:
        """Slot of least capacity in the interval; ties go to the earliest slot."""
        return min(range(pref.start, pref.end + 1), key=lambda t: (self.capacity(t), t))


@dataclass(frozen=True)
class DeltaSplit:
    delta:      float
    small:      frozenset[Pair]
    large:      frozenset[Pair]
    bottleneck: dict

    def is_large(self, pair: Pair) -> bool:
        return pair in self.large


BagSolver = Callable[[RealBagInstance, DeltaSplit], Selection]


# ─── Reduction ────────────────────────────────────────────────────────────────

def to_bag_ufp(instance: Instance) -> RealBagInstance:
    """Magnitudes in place of complex demands; intervals, utilities and capacities kept."""
    assert_constant_contiguous(instance, SOLVER_NAME)
    assert_first_quadrant(instance, SOLVER_NAME)
    users = []
    for user in instance.users:
        prefs = []
        for pref in user.preferences:
            window = sorted(pref.window)
            prefs.append(BagPreference(
                pref.pref_id, pref.values[0].magnitude, window[0], window[-1], pref.utility,
            ))
        users.append(BagUser(user.user_id, tuple(prefs)))
    return RealBagInstance(instance.m, tuple(instance.capacities), tuple(users))


def bag_loads(bag: RealBagInstance, selection: Selection) -> list[float]:
    loads = [0.0] * bag.m
    for pair in selection.pairs:
        pref = bag.index[pair]
        for t in range(pref.start, pref.end + 1):
            loads[t - 1] += pref.demand
    return loads


def is_bag_feasible(bag: RealBagInstance, selection: Selection) -> bool:
    if not selection.respects_bags():
        return False
    return all(
        load <= cap * (1 + FEAS_TOL)
        for load, cap in zip(bag_loads(bag, selection), bag.capacities)
    )


def check_nba(bag: RealBagInstance) -> bool:
    """Largest demand no bigger than the smallest capacity."""
    demands = [p.demand for p in bag.index.values()]
    if not demands:
        return True
    return max(demands) <= min(bag.capacities) * (1 + FEAS_TOL)


def split_by_delta(bag: RealBagInstance, delta: float) -> DeltaSplit:
    if not 0 < delta <= 1:
        raise PreconditionError(f"{SOLVER_NAME} requires 0 < delta ≤ 1; got delta={delta}")
    small, large, bottleneck = set(), set(), {}
    for pair, pref in bag.index.items():
        b = bag.bottleneck(pref)
        bottleneck[pair] = b
        (large if pref.demand > delta * bag.capacity(b) else small).add(pair)
    return DeltaSplit(delta, frozenset(small), frozenset(large), bottleneck)


def carry_back(instance: Instance, bag_selection: Selection) -> tuple[Selection, SolveReport]:
    """The same selection, certified feasible for the complex instance."""
    started = time.perf_counter()
    if not is_feasible(instance, bag_selection):
        raise AssertionError(
            "carried-back selection is infeasible for the complex instance — "
            "the bag-UFP solver upstream returned a bag-infeasible answer"
        )
    selection = bag_selection.canonical(instance)
    return selection, evaluate(instance, selection, SOLVER_NAME, time.perf_counter() - started)


# ─── Large demands: local ratio ───────────────────────────────────────────────

def solve_large_local_ratio(bag: RealBagInstance, split: DeltaSplit) -> Selection:
    """
    Pairwise-disjoint, one-per-bag selection of large demands.

    Intervals are scanned by right end. Each gets the residual weight left
    after subtracting the residuals of stacked intervals it conflicts with
    (overlap or same bag); positive ones are stacked. Unstacking in reverse
    keeps each interval that conflicts with nothing kept so far.
    """
    candidates = []
    for user in bag.users:
        for pref in user.preferences:
            pair = (user.user_id, pref.pref_id)
            if pair not in split.large:
                continue
            if any(pref.demand > bag.capacity(t) * (1 + FEAS_TOL)
                   for t in range(pref.start, pref.end + 1)):
                continue
            candidates.append((pair, pref))
    candidates.sort(key=lambda c: (c[1].end, c[1].start, c[0]))

    def conflict(a: tuple[Pair, BagPreference], b: tuple[Pair, BagPreference]) -> bool:
        return a[0][0] == b[0][0] or a[1].overlaps(b[1])

    stack: list[tuple[tuple[Pair, BagPreference], float]] = []
    for cand in candidates:
        residual = cand[1].utility - sum(v for other, v in stack if conflict(cand, other))
        if residual > 0:
            stack.append((cand, residual))

    kept: list[tuple[Pair, BagPreference]] = []
    while stack:
        cand, _ = stack.pop()
        if not any(conflict(cand, other) for other in kept):
            kept.append(cand)

    return Selection(tuple(sorted(pair for pair, _ in kept)))


# ─── Small demands: greedy ────────────────────────────────────────────────────

def solve_small_greedy(bag: RealBagInstance, split: DeltaSplit) -> Selection:
    """Small demands by u/(|s|·|T|), kept whenever they still fit."""
    def efficiency(item):
        pair, pref = item
        volume = pref.demand * pref.length
        return (-(math.inf if volume == 0 else pref.utility / volume), pair)

    items = sorted(
        ((pair, pref) for pair, pref in bag.index.items() if pair in split.small),
        key=efficiency,
    )
    residual = list(bag.capacities)
    used: set[str] = set()
    chosen: list[Pair] = []
    for pair, pref in items:
        if pair[0] in used:
            continue
        slots = range(pref.start - 1, pref.end)
        if any(pref.demand > residual[t] + FEAS_TOL * bag.capacities[t] for t in slots):
            continue
        for t in slots:
            residual[t] -= pref.demand
        used.add(pair[0])
        chosen.append(pair)
    return Selection(tuple(chosen))


# ─── Exhaustive ───────────────────────────────────────────────────────────────

def solve_bag_exact(bag: RealBagInstance, pairs: Iterable[Pair] | None = None,
                    budget: OracleBudget | None = None) -> Selection:
    """Best bag-feasible selection among `pairs` (all demands by default), by enumeration."""
    allowed = set(bag.index) if pairs is None else set(pairs)
    groups = [
        [(u.user_id, p.pref_id) for p in u.preferences if (u.user_id, p.pref_id) in allowed]
        for u in bag.users
    ]
    groups = [g for g in groups if g]
    (budget or OracleBudget()).require(math.prod(len(g) + 1 for g in groups))

    limit = [c * (1 + FEAS_TOL) for c in bag.capacities]
    best_u, best_key = 0.0, ()

    def walk(k: int, loads: list[float], utility: float, chosen: list[Pair]) -> None:
        nonlocal best_u, best_key
        if k == len(groups):
            key = tuple(sorted(chosen))
            if utility > best_u + 1e-12 or (math.isclose(utility, best_u, abs_tol=1e-12) and key < best_key):
                best_u, best_key = utility, key
            return
        walk(k + 1, loads, utility, chosen)
        for pair in groups[k]:
            pref = bag.index[pair]
            nxt = list(loads)
            ok = True
            for t in range(pref.start - 1, pref.end):
                nxt[t] += pref.demand
                if nxt[t] > limit[t]:
                    ok = False
                    break
            if ok:
                chosen.append(pair)
                walk(k + 1, nxt, utility + pref.utility, chosen)
                chosen.pop()

    walk(0, [0.0] * bag.m, 0.0, [])
    return Selection(best_key)


def solve_large_exact(bag: RealBagInstance, split: DeltaSplit) -> Selection:
    return solve_bag_exact(bag, split.large)


def solve_small_exact(bag: RealBagInstance, split: DeltaSplit) -> Selection:
    return solve_bag_exact(bag, split.small)


# ─── Split solve ──────────────────────────────────────────────────────────────

def solve_split(instance: Instance, delta: float = 0.5, *,
                large_solver: BagSolver = solve_large_local_ratio,
                small_solver: BagSolver = solve_small_greedy) -> tuple[Selection, SolveReport]:
    """Solve large and small demands apart, keep the more useful side, carry it back."""
    started = time.perf_counter()
    bag = to_bag_ufp(instance)
    if not check_nba(bag):
        worst_pair, worst = max(bag.index.items(), key=lambda kv: (kv[1].demand, kv[0]))
        raise PreconditionError(
            f"{SOLVER_NAME} requires the no-bottleneck assumption (largest demand ≤ smallest "
            f"capacity); user {worst_pair[0]} pref {worst_pair[1]} has |s|={worst.demand:g} "
            f"> min C={min(bag.capacities):g}"
        )
    split = split_by_delta(bag, delta)

    large = large_solver(bag, split)
    small = small_solver(bag, split)
    large_u = sum(bag.index[p].utility for p in large.pairs)
    small_u = sum(bag.index[p].utility for p in small.pairs)
    winner = large if large_u >= small_u else small

    selection, report = carry_back(instance, winner)
    report = report.with_timing(
        SOLVER_NAME, time.perf_counter() - started,
        delta=delta, large_utility=large_u, small_utility=small_u,
        large_count=len(split.large), small_count=len(split.small),
    )
    log.info("%s: utility=%.6g (large %.6g, small %.6g, δ=%g)",
             SOLVER_NAME, report.utility, large_u, small_u, delta)
    return selection, report


def crossing_bound(phi: float, delta: float) -> int:
    return 2 * math.floor(1.0 / math.cos(phi / 2) / delta ** 2 + 1e-12)


def crossing_bound_check(instance: Instance, selection: Selection, delta: float) -> bool:
    """Every slot is crossed by at most 2⌊sec(φ/2)/δ²⌋ selected δ-large demands."""
    bag = to_bag_ufp(instance)
    split = split_by_delta(bag, delta)
    phi, _ = angle_stats(instance)
    bound = crossing_bound(phi, delta)
    large = [bag.index[p] for p in selection.pairs if split.is_large(p)]
    return all(
        sum(1 for pref in large if pref.covers(t)) <= bound
        for t in range(1, bag.m + 1)
    )

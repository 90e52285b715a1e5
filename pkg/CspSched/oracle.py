# csp_sched/oracle.py
"""
Oracle - brute-force ground truth

Exponential-time exact solvers. Every approximation algorithm in the
package is checked against these at desk scale, so they favour being
obviously correct over being fast: a depth-first walk over every user's
options with nothing but a utility bound (and, on first-quadrant
instances, a capacity cut) to prune it.

Ties between equal-utility optima go to the lexicographically smallest
sorted tuple of (user_id, pref_id) pairs, so golden outputs are stable.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from core_model import (
    FEAS_TOL,
    FractionalSolution,
    Instance,
    Pair,
    Selection,
)
from errors import ResourceCapError

if TYPE_CHECKING:
    from solvers.fptas_multislot import RoundedUser

log = logging.getLogger(__name__)

DEFAULT_MAX_ASSIGNMENTS = 2 * 10 ** 7


@dataclass(frozen=True)
class OracleBudget:
    max_assignments: int = DEFAULT_MAX_ASSIGNMENTS

    def __post_init__(self):
        if self.max_assignments <= 0:
            raise ValueError(f"max_assignments must be positive, got {self.max_assignments}")

    def require(self, assignments: int) -> None:
        if assignments > self.max_assignments:
            raise ResourceCapError(
                'instance too large for oracle',
                assignments,
                self.max_assignments,
                hint='Raise CSP_SCHED_ORACLE_BUDGET or solve with an approximation algorithm.',
            )


@dataclass(frozen=True)
class _Option:
    pair:    Pair | None
    weight:  float
    utility: float
    load:    np.ndarray


def _is_better(utility: float, key: tuple, best_utility: float, best_key: tuple | None) -> bool:
    if best_key is None:
        return True
    if math.isclose(utility, best_utility, rel_tol=1e-12, abs_tol=1e-12):
        return key < best_key
    return utility > best_utility


def _search(options: list[list[_Option]], capacities: np.ndarray,
            monotone: bool) -> tuple[float, tuple[_Option, ...]]:
    """
    Best leaf of the option tree.

    monotone=True means partial loads can only grow in magnitude (all
    demands in one closed quadrant), so an over-capacity prefix is cut.
    """
    m = len(capacities)
    limit = capacities * (1 + FEAS_TOL)

    # suffix[k] = best utility still reachable from users k..n-1
    suffix = [0.0] * (len(options) + 1)
    for k in range(len(options) - 1, -1, -1):
        suffix[k] = suffix[k + 1] + max(o.utility for o in options[k])

    best_utility = 0.0
    best_key: tuple | None = None
    best_path: tuple[_Option, ...] = ()
    path: list[_Option] = []

    def walk(k: int, load: np.ndarray, utility: float) -> None:
        nonlocal best_utility, best_key, best_path
        if best_key is not None and utility + suffix[k] < best_utility - 1e-12:
            return
        if k == len(options):
            if np.all(np.abs(load) <= limit):
                key = tuple(sorted(o.pair for o in path if o.pair is not None))
                if _is_better(utility, key, best_utility, best_key):
                    best_utility, best_key, best_path = utility, key, tuple(path)
            return
        for option in options[k]:
            next_load = load + option.load if option.pair is not None else load
            if monotone and option.pair is not None and not np.all(np.abs(next_load) <= limit):
                continue
            path.append(option)
            walk(k + 1, next_load, utility + option.utility)
            path.pop()

    walk(0, np.zeros(m, dtype=complex), 0.0)
    return best_utility, best_path


def _load_vector(instance: Instance, pair: Pair, weight: float) -> np.ndarray:
    load = np.zeros(instance.m, dtype=complex)
    for t, value in instance.preference(*pair).slot_values.items():
        load[t - 1] = weight * value.to_complex()
    return load


def _first_quadrant(instance: Instance) -> bool:
    return all(
        v.re >= 0 and v.im >= 0
        for _, pref in instance.pairs()
        for v in pref.values
    )


# ─── Integral oracle ──────────────────────────────────────────────────────────

def exact_solve(instance: Instance,
                budget: OracleBudget | None = None) -> tuple[Selection, float]:
    """
    Maximum-utility β=1 feasible selection, by enumeration.

    Elastic preferences are treated as all-or-nothing.
    """
    budget = budget or OracleBudget()
    budget.require(math.prod(len(u.preferences) + 1 for u in instance.users))

    none = _Option(None, 0.0, 0.0, np.zeros(instance.m, dtype=complex))
    options = [
        [none] + [
            _Option((user.user_id, pref.pref_id), 1.0, pref.utility,
                    _load_vector(instance, (user.user_id, pref.pref_id), 1.0))
            for pref in user.preferences
        ]
        for user in instance.users
    ]
    utility, path = _search(options, np.array(instance.capacities, dtype=float),
                            monotone=_first_quadrant(instance))
    selection = Selection(tuple(o.pair for o in path if o.pair is not None))
    log.debug("exact_solve: utility=%.6g over %d users", utility, instance.n)
    return selection, utility


# ─── Exact-fit oracle ─────────────────────────────────────────────────────────

def exact_fit_solve(users: Sequence['RoundedUser'], c1: Sequence[int], c2: Sequence[int],
                    budget: OracleBudget | None = None) -> tuple[Selection, float] | None:
    """
    Maximum utility over selections whose rounded sums equal (c1, c2) exactly.

    Brute-force counterpart of the exact-fit DP; None when no subset fits.
    """
    budget = budget or OracleBudget()
    budget.require(math.prod(len(u.preferences) + 1 for u in users))

    target = (tuple(c1), tuple(c2))
    m = len(c1)
    best_utility = 0.0
    best_key: tuple | None = None

    for combo in itertools.product(*[(None, *u.preferences) for u in users]):
        re = [0] * m
        im = [0] * m
        utility = 0.0
        pairs: list[Pair] = []
        for user, pref in zip(users, combo):
            if pref is None:
                continue
            for t in range(m):
                re[t] += pref.re[t]
                im[t] += pref.im[t]
            utility += pref.utility
            pairs.append((user.user_id, pref.pref_id))
        if (tuple(re), tuple(im)) != target:
            continue
        key = tuple(sorted(pairs))
        if _is_better(utility, key, best_utility, best_key):
            best_utility, best_key = utility, key

    if best_key is None:
        return None
    return Selection(best_key), best_utility


# ─── Mixed oracle ─────────────────────────────────────────────────────────────

def grid_error(instance: Instance, grid_resolution: int) -> float:
    """Upper bound on how far the grid search can fall below the true mixed optimum."""
    return sum(p.utility for _, p in instance.pairs() if p.is_elastic) / grid_resolution


def exact_solve_mixed(instance: Instance, grid_resolution: int = 100,
                      budget: OracleBudget | None = None) -> tuple[FractionalSolution, float]:
    """
    Best mixed solution with elastic fractions searched on {1/g, 2/g, ..., 1}.

    The utility is a lower bound on the mixed optimum, short of it by at
    most grid_error(instance, grid_resolution).
    """
    if grid_resolution < 10:
        raise ValueError(f"grid_resolution must be ≥ 10, got {grid_resolution}")
    budget = budget or OracleBudget()
    budget.require(math.prod(
        1 + sum(grid_resolution if p.is_elastic else 1 for p in u.preferences)
        for u in instance.users
    ))

    grid = [i / grid_resolution for i in range(grid_resolution, 0, -1)]
    none = _Option(None, 0.0, 0.0, np.zeros(instance.m, dtype=complex))
    options = []
    for user in instance.users:
        user_options = [none]
        for pref in user.preferences:
            pair = (user.user_id, pref.pref_id)
            base = _load_vector(instance, pair, 1.0)
            for x in (grid if pref.is_elastic else [1.0]):
                user_options.append(_Option(pair, x, pref.utility * x, base * x))
        options.append(user_options)

    utility, path = _search(options, np.array(instance.capacities, dtype=float),
                            monotone=_first_quadrant(instance))
    solution = FractionalSolution({o.pair: o.weight for o in path if o.pair is not None})
    log.debug("exact_solve_mixed: utility=%.6g (grid %d)", utility, grid_resolution)
    return solution, utility

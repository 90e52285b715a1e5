# csp_sched/solvers/fptas_multislot.py
"""
Bi-criteria FPTAS for a constant number of slots

Demands are rounded onto a per-slot lattice of step L_t, users are split
into N₊ (real parts ≥ 0) and N₋ (real parts < 0), and every admissible
guess (ξ₊, ξ₋, ζ₊, ζ₋) of the rounded projections is answered with an
exact-fit knapsack on each side. The best pair of answers wins.

Rather than running the exact-fit DP once per guess, the forward DP for
each side is run once and its reachable end states are paired directly;
a guess is reachable on both sides exactly when both exact-fit calls
would return a solution, so the answer is the same. per_guess=True runs
the per-guess DP instead, for cross-checking and small grids.

Guarantee: utility ≥ Opt, every |load_t| ≤ (1 + 4ε)·C_t.
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from core_model import (
    ComplexPower,
    Instance,
    Pair,
    Selection,
    SolveReport,
    angle_stats,
    evaluate,
)
from errors import PreconditionError, ResourceCapError
from file_manager import load_settings
from preconditions import assert_angle_margin, assert_epsilon, assert_slot_cap

log = logging.getLogger(__name__)

SOLVER_NAME = 'fptas'


# ─── Types ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RoundingScale:
    L:          tuple[float, ...]
    capacities: tuple[float, ...]
    epsilon:    float
    theta:      float
    n:          int

    @property
    def m(self) -> int:
        return len(self.L)

    @property
    def tan_theta(self) -> float:
        return math.tan(self.theta)


@dataclass(frozen=True)
class RoundedPreference:
    """Rounded demand in lattice units, one (re, im) pair per slot (zeros outside the window)."""

    pref_id: str
    utility: float
    re:      tuple[int, ...]
    im:      tuple[int, ...]


@dataclass(frozen=True)
class RoundedUser:
    user_id:     str
    preferences: tuple[RoundedPreference, ...]
    negative:    bool = False

    def negated(self) -> 'RoundedUser':
        """Real parts flipped, so N₋ users can enter the exact-fit DP with nonneg coordinates."""
        return RoundedUser(
            self.user_id,
            tuple(
                RoundedPreference(p.pref_id, p.utility, tuple(-r for r in p.re), p.im)
                for p in self.preferences
            ),
            self.negative,
        )


@dataclass(frozen=True)
class GuessVector:
    """Guessed rounded projections in lattice units, per slot."""

    xi_plus:    tuple[int, ...]
    xi_minus:   tuple[int, ...]
    zeta_plus:  tuple[int, ...]
    zeta_minus: tuple[int, ...]

    def key(self) -> tuple[int, ...]:
        return self.xi_plus + self.xi_minus + self.zeta_plus + self.zeta_minus


@dataclass(frozen=True)
class GridBounds:
    """Largest lattice index per slot for each of the four guess coordinates."""

    xi_plus:  tuple[int, ...]
    xi_minus: tuple[int, ...]
    zeta:     tuple[int, ...]


# ─── Rounding ─────────────────────────────────────────────────────────────────

def _ceil_steps(x: float) -> int:
    # 1.1 / 0.1 is 11.000000000000002 in floats; that is still 11 steps.
    return math.ceil(x - 1e-9 * max(1.0, abs(x)))


def round_value(value: ComplexPower, L: float) -> tuple[int, int]:
    """Imaginary part up; real part up when ≥ 0, down when < 0 (away from zero)."""
    re = _ceil_steps(value.re / L) if value.re >= 0 else -_ceil_steps(-value.re / L)
    return re, _ceil_steps(value.im / L)


def rounding_scale(instance: Instance, epsilon: float) -> RoundingScale:
    assert_epsilon(epsilon, SOLVER_NAME)
    _, theta = angle_stats(instance)
    if theta >= math.pi / 2:
        raise PreconditionError(
            f"{SOLVER_NAME} requires φ < π (finite tan θ); got θ={theta:.6f}"
        )
    n = max(instance.n, 1)
    tan_theta = math.tan(theta)
    L = tuple(epsilon * c / (n * (tan_theta + 1)) for c in instance.capacities)
    return RoundingScale(L, tuple(instance.capacities), epsilon, theta, instance.n)


def round_demands(instance: Instance, epsilon: float) -> tuple[tuple[RoundedUser, ...], RoundingScale]:
    """Every demand moved onto the lattice; slots outside a window round to 0."""
    scale = rounding_scale(instance, epsilon)
    users = []
    for user in instance.users:
        prefs = []
        for pref in user.preferences:
            pairs = [round_value(pref.value_at(t), scale.L[t - 1]) for t in range(1, instance.m + 1)]
            prefs.append(RoundedPreference(
                pref.pref_id, pref.utility,
                tuple(r for r, _ in pairs), tuple(i for _, i in pairs),
            ))
        users.append(RoundedUser(user.user_id, tuple(prefs), user.in_second_quadrant))
    return tuple(users), scale


def rounded_loads(users: Sequence[RoundedUser], selection: Selection,
                  scale: RoundingScale) -> list[complex]:
    """Per-slot load of a selection measured in rounded demands (real units)."""
    by_pair = {(u.user_id, p.pref_id): p for u in users for p in u.preferences}
    loads = [0j] * scale.m
    for pair in selection.pairs:
        pref = by_pair[pair]
        for t in range(scale.m):
            loads[t] += complex(pref.re[t] * scale.L[t], pref.im[t] * scale.L[t])
    return loads


# ─── Guess grid ───────────────────────────────────────────────────────────────

def grid_bounds(scale: RoundingScale, pad: bool = True) -> GridBounds:
    """
    Top lattice index of each grid.

    With pad=True every grid is extended by n steps: rounding can push the
    optimum's projections up to n·L_t past the unpadded ends.
    """
    extra = scale.n if pad else 0
    tan_theta = scale.tan_theta
    xi_plus, xi_minus, zeta = [], [], []
    for L, c in zip(scale.L, scale.capacities):
        xi_plus.append(math.ceil(c * (1 + tan_theta) / L - 1e-9) + extra)
        xi_minus.append(math.ceil(c * tan_theta / L - 1e-9) + extra)
        zeta.append(math.ceil(c / L - 1e-9) + extra)
    return GridBounds(tuple(xi_plus), tuple(xi_minus), tuple(zeta))


def is_admissible(guess: GuessVector, scale: RoundingScale) -> bool:
    limit = (1 + 2 * scale.epsilon) ** 2
    for t, (L, c) in enumerate(zip(scale.L, scale.capacities)):
        re = (guess.xi_plus[t] - guess.xi_minus[t]) * L
        im = (guess.zeta_plus[t] + guess.zeta_minus[t]) * L
        if re * re + im * im > limit * c * c * (1 + 1e-12):
            return False
    return True


def count_raw_guesses(scale: RoundingScale, pad: bool = True) -> int:
    bounds = grid_bounds(scale, pad)
    return math.prod(
        (a + 1) * (b + 1) * (z + 1) ** 2
        for a, b, z in zip(bounds.xi_plus, bounds.xi_minus, bounds.zeta)
    )


def enumerate_guesses(instance: Instance, scale: RoundingScale,
                      pad: bool = True) -> Iterator[GuessVector]:
    """Admissible guesses in lexicographic order of (ξ₊, ξ₋, ζ₊, ζ₋), slot by slot."""
    bounds = grid_bounds(scale, pad)
    m = scale.m
    ranges = (
        [range(top + 1) for top in bounds.xi_plus]
        + [range(top + 1) for top in bounds.xi_minus]
        + [range(top + 1) for top in bounds.zeta]
        + [range(top + 1) for top in bounds.zeta]
    )
    for flat in itertools.product(*ranges):
        guess = GuessVector(flat[:m], flat[m:2 * m], flat[2 * m:3 * m], flat[3 * m:])
        if is_admissible(guess, scale):
            yield guess


# ─── Exact-fit DP ─────────────────────────────────────────────────────────────

State = tuple[tuple[int, ...], tuple[int, ...]]


def _forward_table(users: Sequence[RoundedUser], top1: Sequence[int], top2: Sequence[int],
                   max_entries: int) -> dict[State, tuple[float, tuple[Pair, ...]]]:
    """
    Every exact (c¹, c²) reachable with at most one preference per user.

    States beyond (top1, top2) are dropped: coordinates never decrease.
    On equal utility the first state found is kept (skip before take,
    preferences in declaration order).
    """
    m = len(top1)
    zero = (tuple([0] * m), tuple([0] * m))
    layer: dict[State, tuple[float, tuple[Pair, ...]]] = {zero: (0.0, ())}
    entries = 1

    for k, user in enumerate(users):
        nxt = dict(layer)
        for (c1, c2), (utility, chosen) in layer.items():
            for pref in user.preferences:
                if any(r < 0 for r in pref.re) or any(i < 0 for i in pref.im):
                    raise ValueError(
                        f"exact-fit DP needs nonnegative coordinates; user {user.user_id} "
                        f"pref {pref.pref_id} has re={pref.re} im={pref.im}"
                    )
                n1 = tuple(a + b for a, b in zip(c1, pref.re))
                n2 = tuple(a + b for a, b in zip(c2, pref.im))
                if any(a > b for a, b in zip(n1, top1)) or any(a > b for a, b in zip(n2, top2)):
                    continue
                candidate = utility + pref.utility
                current = nxt.get((n1, n2))
                if current is None or candidate > current[0] + 1e-12:
                    nxt[(n1, n2)] = (candidate, chosen + ((user.user_id, pref.pref_id),))
        layer = nxt
        entries += len(layer)
        if entries > max_entries:
            raise ResourceCapError(
                'exact-fit DP table', entries, max_entries,
                hint='Raise CSP_SCHED_MEM_CAP or use a larger epsilon.',
            )
        log.debug("DP layer %d/%d: %d states", k + 1, len(users), len(layer))
    return layer


def dkp_exact(users: Sequence[RoundedUser], c1: Sequence[int], c2: Sequence[int],
              max_entries: int | None = None) -> tuple[Selection, float] | None:
    """
    Best selection whose rounded sums hit (c1, c2) exactly, or None.

    Coordinates must be nonnegative integers; N₋ users go in negated.
    Skipping a user is always allowed, so (0, 0) is reachable with utility 0.
    """
    if any(c < 0 for c in c1) or any(c < 0 for c in c2):
        return None
    if max_entries is None:
        max_entries = load_settings().mem_cap_entries
    table = _forward_table(users, c1, c2, max_entries)
    hit = table.get((tuple(c1), tuple(c2)))
    if hit is None:
        return None
    utility, chosen = hit
    return Selection(chosen), utility


# ─── Solver ───────────────────────────────────────────────────────────────────

def _best_pairing(plus: dict, minus: dict, scale: RoundingScale,
                  bounds: GridBounds, max_entries: int) -> tuple[float, GuessVector, tuple[Pair, ...], int]:
    """Highest-utility admissible (N₊ state, N₋ state) pair; ties to the smallest guess key."""
    def side(table, top_re):
        keys = [s for s in table if all(a <= b for a, b in zip(s[0], top_re))
                and all(a <= b for a, b in zip(s[1], bounds.zeta))]
        re = np.array([s[0] for s in keys], dtype=float).reshape(len(keys), scale.m)
        im = np.array([s[1] for s in keys], dtype=float).reshape(len(keys), scale.m)
        util = np.array([table[s][0] for s in keys], dtype=float)
        return keys, re, im, util

    p_keys, p_re, p_im, p_u = side(plus, bounds.xi_plus)
    n_keys, n_re, n_im, n_u = side(minus, bounds.xi_minus)

    pairs = len(p_keys) * len(n_keys)
    if pairs > max_entries:
        raise ResourceCapError(
            'fptas guess space', pairs, max_entries,
            hint='Raise CSP_SCHED_MEM_CAP or use a larger epsilon.',
        )

    L = np.array(scale.L)
    cap = np.array(scale.capacities)
    limit = ((1 + 2 * scale.epsilon) * cap) ** 2 * (1 + 1e-12)

    best_u = 0.0
    best: tuple[tuple[int, ...], int, int] | None = None
    admissible = 0
    chunk = max(1, 4_000_000 // max(len(n_keys) * scale.m, 1))

    for lo in range(0, len(p_keys), chunk):
        hi = min(lo + chunk, len(p_keys))
        re = (p_re[lo:hi, None, :] - n_re[None, :, :]) * L
        im = (p_im[lo:hi, None, :] + n_im[None, :, :]) * L
        ok = np.all(re * re + im * im <= limit, axis=2)
        admissible += int(ok.sum())
        total = np.where(ok, p_u[lo:hi, None] + n_u[None, :], -math.inf)
        top = total.max(initial=-math.inf)
        if top == -math.inf:
            continue
        for i, j in zip(*np.nonzero(np.isclose(total, top, rtol=1e-12, atol=1e-12) & ok)):
            pk, nk = p_keys[lo + i], n_keys[j]
            key = GuessVector(pk[0], nk[0], pk[1], nk[1]).key()
            if best is None or top > best_u + 1e-12 * max(1.0, abs(best_u)) or (
                math.isclose(top, best_u, rel_tol=1e-12, abs_tol=1e-12) and key < best[0]
            ):
                best_u, best = top, (key, lo + i, j)

    if best is None:
        raise AssertionError("fptas: the empty selection must always be admissible")
    _, i, j = best
    pk, nk = p_keys[i], n_keys[j]
    guess = GuessVector(pk[0], nk[0], pk[1], nk[1])
    chosen = plus[pk][1] + minus[nk][1]
    return float(best_u), guess, chosen, admissible


def _best_by_guess(instance: Instance, plus_users: Sequence[RoundedUser],
                   minus_users: Sequence[RoundedUser], scale: RoundingScale,
                   max_entries: int) -> tuple[float, GuessVector, tuple[Pair, ...], int]:
    """One exact-fit call per side for every admissible guess; first best guess wins."""
    raw = count_raw_guesses(scale)
    if raw > max_entries:
        raise ResourceCapError(
            'fptas guess enumeration', raw, max_entries,
            hint='Use the paired tables (per_guess=False) or a larger epsilon.',
        )
    best_u = 0.0
    best: tuple[GuessVector, tuple[Pair, ...]] | None = None
    admissible = 0
    for guess in enumerate_guesses(instance, scale):
        admissible += 1
        plus = dkp_exact(plus_users, guess.xi_plus, guess.zeta_plus, max_entries)
        if plus is None:
            continue
        minus = dkp_exact(minus_users, guess.xi_minus, guess.zeta_minus, max_entries)
        if minus is None:
            continue
        utility = plus[1] + minus[1]
        if best is None or utility > best_u + 1e-12 * max(1.0, abs(best_u)):
            best_u, best = utility, (guess, plus[0].pairs + minus[0].pairs)

    if best is None:
        raise AssertionError("fptas: the all-zero guess must always be answered")
    return float(best_u), best[0], best[1], admissible


def solve_bifptas(instance: Instance, epsilon: float, *,
                  angle_margin: float | None = None,
                  max_slots: int | None = None,
                  max_entries: int | None = None,
                  per_guess: bool = False) -> tuple[Selection, SolveReport]:
    """
    (1, 1+4ε) bi-criteria solve for small m and any φ < π.

    per_guess=True walks enumerate_guesses and calls dkp_exact on both sides
    of every guess. It returns the same selection as the default paired
    tables, at a much higher cost.
    """
    started = time.perf_counter()
    settings = load_settings()
    max_slots = settings.max_slots if max_slots is None else max_slots
    max_entries = settings.mem_cap_entries if max_entries is None else max_entries

    assert_epsilon(epsilon, SOLVER_NAME)
    assert_slot_cap(instance, max_slots, SOLVER_NAME)
    if angle_margin is not None:
        assert_angle_margin(instance, angle_margin, SOLVER_NAME)

    if not instance.users:
        report = evaluate(instance, Selection(), SOLVER_NAME, time.perf_counter() - started)
        return Selection(), report

    users, scale = round_demands(instance, epsilon)
    bounds = grid_bounds(scale)

    plus_users = [u for u in users if not u.negative]
    minus_users = [u.negated() for u in users if u.negative]
    if per_guess:
        utility, guess, chosen, admissible = _best_by_guess(
            instance, plus_users, minus_users, scale, max_entries)
        reachable = {}
    else:
        plus = _forward_table(plus_users, bounds.xi_plus, bounds.zeta, max_entries)
        minus = _forward_table(minus_users, bounds.xi_minus, bounds.zeta, max_entries)
        utility, guess, chosen, admissible = _best_pairing(plus, minus, scale, bounds, max_entries)
        reachable = {'reachable_plus': len(plus), 'reachable_minus': len(minus)}
    selection = Selection(chosen).canonical(instance)

    report = evaluate(instance, selection, SOLVER_NAME, time.perf_counter() - started)
    report.metadata.update(
        epsilon=epsilon,
        L=list(scale.L),
        theta=scale.theta,
        guess=list(guess.key()),
        strategy='per-guess' if per_guess else 'paired',
        admissible=admissible,
        **reachable,
    )
    log.info("%s: utility=%.6g beta=%.6g (ε=%g, %d admissible %s)",
             SOLVER_NAME, report.utility, report.violation_beta, epsilon, admissible,
             'guesses' if per_guess else 'pairs')
    return selection, report

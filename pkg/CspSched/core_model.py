# csp_sched/core_model.py
"""
Instance model, validation and evaluation.

Everything here is an immutable value: instances, selections and reports
are frozen dataclasses, and every function is pure, so any of them can be
evaluated from many threads at once.

Slots are 1-based everywhere (slot t lives at index t-1 of capacities and
per-slot loads).

Conventions:
  * a validated instance has every demand in the closed upper half-plane
    with argument in [0, π)
  * all capacity comparisons allow an absolute slack of FEAS_TOL * C_t
"""

from __future__ import annotations

import cmath
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from errors import InstanceError

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9

Pair = tuple[str, str]


# ─── Domain types ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ComplexPower:
    """Active power (re, watts) plus reactive power (im, vars)."""

    re: float
    im: float

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise InstanceError(f"complex power must be finite, got ({self.re}, {self.im})")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)

    @property
    def argument(self) -> float:
        """Angle with the positive real axis, in [-π, π]."""
        return math.atan2(self.im, self.re)

    def to_complex(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def from_complex(cls, z: complex) -> 'ComplexPower':
        return cls(z.real, z.imag)

    def scaled(self, factor: float) -> 'ComplexPower':
        return ComplexPower(self.re * factor, self.im * factor)

    def rotated(self, rho: float) -> 'ComplexPower':
        return ComplexPower.from_complex(self.to_complex() * cmath.exp(1j * rho))


ZERO = ComplexPower(0.0, 0.0)


class Elasticity(str, Enum):
    INELASTIC = 'inelastic'
    ELASTIC   = 'elastic'


@dataclass(frozen=True)
class DemandPreference:
    """One candidate demand of a user: a window, a value per window slot, a utility."""

    pref_id:    str
    window:     tuple[int, ...]
    values:     tuple[ComplexPower, ...]
    utility:    float
    elasticity: Elasticity = Elasticity.INELASTIC

    def __post_init__(self):
        if len(self.window) != len(self.values):
            raise InstanceError(
                f"preference {self.pref_id!r}: window has {len(self.window)} slots "
                f"but {len(self.values)} values were given"
            )
        if len(set(self.window)) != len(self.window):
            raise InstanceError(f"preference {self.pref_id!r}: window repeats a slot")

    @cached_property
    def slot_values(self) -> dict[int, ComplexPower]:
        return dict(zip(self.window, self.values))

    def value_at(self, t: int) -> ComplexPower:
        """Demand at slot t; zero outside the window."""
        return self.slot_values.get(t, ZERO)

    @property
    def is_elastic(self) -> bool:
        return self.elasticity is Elasticity.ELASTIC

    @property
    def is_contiguous(self) -> bool:
        if not self.window:
            return True
        ordered = sorted(self.window)
        return ordered[-1] - ordered[0] + 1 == len(ordered)

    @property
    def is_constant(self) -> bool:
        return all(v == self.values[0] for v in self.values)

    @property
    def max_magnitude(self) -> float:
        return max((v.magnitude for v in self.values), default=0.0)

    def replace_values(self, values: Iterable[ComplexPower], **changes) -> 'DemandPreference':
        return DemandPreference(
            pref_id=changes.get('pref_id', self.pref_id),
            window=self.window,
            values=tuple(values),
            utility=changes.get('utility', self.utility),
            elasticity=changes.get('elasticity', self.elasticity),
        )


@dataclass(frozen=True)
class User:
    user_id:     str
    preferences: tuple[DemandPreference, ...]

    @property
    def in_second_quadrant(self) -> bool:
        """True when every real part is negative (the N₋ side of the partition)."""
        reals = [v.re for p in self.preferences for v in p.values]
        return bool(reals) and all(r < 0 for r in reals)


@dataclass(frozen=True)
class Instance:
    m:          int
    capacities: tuple[float, ...]
    users:      tuple[User, ...]

    @property
    def n(self) -> int:
        return len(self.users)

    @cached_property
    def index(self) -> dict[Pair, tuple[User, DemandPreference]]:
        return {
            (user.user_id, pref.pref_id): (user, pref)
            for user in self.users
            for pref in user.preferences
        }

    def pairs(self) -> Iterator[tuple[User, DemandPreference]]:
        for user in self.users:
            for pref in user.preferences:
                yield user, pref

    def preference(self, user_id: str, pref_id: str) -> DemandPreference:
        try:
            return self.index[(user_id, pref_id)][1]
        except KeyError:
            raise InstanceError(
                f"unknown preference ({user_id!r}, {pref_id!r}) — "
                "check the solution against the instance it was solved for"
            ) from None

    def capacity(self, t: int) -> float:
        return self.capacities[t - 1]

    @property
    def has_elastic(self) -> bool:
        return any(pref.is_elastic for _, pref in self.pairs())

    def with_users(self, users: Iterable[User]) -> 'Instance':
        return Instance(self.m, self.capacities, tuple(users))


@dataclass(frozen=True)
class Selection:
    """Integral choice: the chosen (user_id, pref_id) pairs in instance order."""

    pairs: tuple[Pair, ...] = ()

    @classmethod
    def from_mapping(cls, chosen: Mapping[str, str | None]) -> 'Selection':
        return cls(tuple((u, p) for u, p in chosen.items() if p is not None))

    @property
    def chosen(self) -> dict[str, str]:
        return dict(self.pairs)

    def respects_bags(self) -> bool:
        users = [u for u, _ in self.pairs]
        return len(users) == len(set(users))

    def utility(self, instance: Instance) -> float:
        return sum(instance.preference(u, p).utility for u, p in self.pairs)

    def canonical(self, instance: Instance) -> 'Selection':
        """Same pairs, ordered as they appear in the instance."""
        chosen = set(self.pairs)
        return Selection(tuple(pair for pair in instance.index if pair in chosen))


@dataclass(frozen=True)
class FractionalSolution:
    """x value per (user_id, pref_id); absent pairs are 0."""

    x: Mapping[Pair, float] = field(default_factory=dict)

    @classmethod
    def from_selection(cls, selection: Selection) -> 'FractionalSolution':
        return cls({pair: 1.0 for pair in selection.pairs})

    def value(self, pair: Pair) -> float:
        return self.x.get(pair, 0.0)

    def utility(self, instance: Instance) -> float:
        return sum(instance.preference(*pair).utility * v for pair, v in self.x.items())

    def respects_bags(self, tol: float = FEAS_TOL) -> bool:
        totals: dict[str, float] = {}
        for (u, _), v in self.x.items():
            if v < -tol or v > 1 + tol:
                return False
            totals[u] = totals.get(u, 0.0) + v
        return all(total <= 1 + tol for total in totals.values())

    def fractional_pairs(self, tol: float = 1e-7) -> list[Pair]:
        return [pair for pair, v in self.x.items() if tol < v < 1 - tol]

    def integral_part(self, tol: float = 1e-7) -> Selection:
        return Selection(tuple(pair for pair, v in self.x.items() if v >= 1 - tol))


@dataclass(frozen=True)
class SolveReport:
    utility:        float
    per_slot_load:  tuple[ComplexPower, ...]
    violation_beta: float
    solver_name:    str
    elapsed:        float = 0.0
    metadata:       dict = field(default_factory=dict, compare=False)

    def feasible_at(self, beta: float) -> bool:
        return self.violation_beta <= beta + FEAS_TOL

    def with_timing(self, solver_name: str, elapsed: float, **metadata) -> 'SolveReport':
        return SolveReport(
            utility=self.utility,
            per_slot_load=self.per_slot_load,
            violation_beta=self.violation_beta,
            solver_name=solver_name,
            elapsed=elapsed,
            metadata={**self.metadata, **metadata},
        )


# ─── Validation ───────────────────────────────────────────────────────────────

def validate(instance: Instance) -> list[str]:
    """
    Return every violated modelling assumption; an empty list means ok.

    Diagnostics, not exceptions: the CLI prints them all at once.
    """
    violations: list[str] = []

    if instance.m < 1:
        violations.append(f"m={instance.m}: need at least one slot")
    if len(instance.capacities) != instance.m:
        violations.append(
            f"{len(instance.capacities)} capacities given for m={instance.m} slots"
        )
    for t, cap in enumerate(instance.capacities, start=1):
        if not cap > 0:
            violations.append(f"slot {t}: capacity C_t={cap:g} must be positive")

    seen_users: set[str] = set()
    for user in instance.users:
        if user.user_id in seen_users:
            violations.append(f"user {user.user_id}: duplicate user id")
        seen_users.add(user.user_id)

        if not user.preferences:
            violations.append(f"user {user.user_id}: no preferences")

        seen_prefs: set[str] = set()
        signs: set[bool] = set()
        for pref in user.preferences:
            where = f"user {user.user_id} pref {pref.pref_id}"
            if pref.pref_id in seen_prefs:
                violations.append(f"{where}: duplicate preference id")
            seen_prefs.add(pref.pref_id)

            if not pref.utility > 0:
                violations.append(f"{where}: utility {pref.utility:g} must be > 0")
            if not pref.window:
                violations.append(f"{where}: empty window")

            for t, value in zip(pref.window, pref.values):
                if not 1 <= t <= instance.m:
                    violations.append(f"{where}: slot index {t} outside 1..{instance.m}")
                    continue
                signs.add(value.re >= 0)
                cap = instance.capacity(t)
                # Elastic demands may exceed C_t; only a fraction of them is served.
                if not pref.is_elastic and value.magnitude > cap * (1 + FEAS_TOL):
                    violations.append(
                        f"{where} slot {t}: |s|={value.magnitude:g} > C_t={cap:g}"
                    )
                if value.im < 0 or (value.im == 0 and value.re < 0):
                    violations.append(
                        f"{where} slot {t}: argument {value.argument:.6g} outside [0, π)"
                    )

        if len(signs) > 1:
            violations.append(
                f"user {user.user_id}: quadrant mixing (real parts of both signs)"
            )

    return violations


def assert_valid(instance: Instance) -> None:
    """Hard fail with every violation listed."""
    violations = validate(instance)
    if violations:
        raise InstanceError(
            "[core_model] ❌ instance failed validation:\n"
            + "\n".join(f"  • {v}" for v in violations)
        )


# ─── Evaluation ───────────────────────────────────────────────────────────────

def slot_loads(instance: Instance, weights: Mapping[Pair, float]) -> list[complex]:
    """Σ x·s per slot for the given weights; unknown pairs are rejected."""
    loads = [0j] * instance.m
    for pair, weight in weights.items():
        if weight == 0:
            continue
        pref = instance.preference(*pair)
        for t, value in zip(pref.window, pref.values):
            loads[t - 1] += weight * value.to_complex()
    return loads


def violation_beta(instance: Instance, loads: Iterable[complex]) -> float:
    ratios = [abs(load) / cap for load, cap in zip(loads, instance.capacities)]
    return max([1.0, *ratios])


def evaluate_fractional(instance: Instance, solution: FractionalSolution,
                        solver_name: str = 'evaluate', elapsed: float = 0.0) -> SolveReport:
    loads = slot_loads(instance, solution.x)
    return SolveReport(
        utility=solution.utility(instance),
        per_slot_load=tuple(ComplexPower.from_complex(z) for z in loads),
        violation_beta=violation_beta(instance, loads),
        solver_name=solver_name,
        elapsed=elapsed,
    )


def evaluate(instance: Instance, selection: Selection,
             solver_name: str = 'evaluate', elapsed: float = 0.0) -> SolveReport:
    """Loads, utility and β of an integral selection."""
    weights: dict[Pair, float] = {}
    for pair in selection.pairs:
        instance.preference(*pair)
        weights[pair] = weights.get(pair, 0.0) + 1.0
    loads = slot_loads(instance, weights)
    return SolveReport(
        utility=sum(instance.preference(*pair).utility for pair in selection.pairs),
        per_slot_load=tuple(ComplexPower.from_complex(z) for z in loads),
        violation_beta=violation_beta(instance, loads),
        solver_name=solver_name,
        elapsed=elapsed,
    )


def _within(instance: Instance, loads: list[complex], beta: float) -> bool:
    return all(
        abs(load) <= beta * cap + FEAS_TOL * cap
        for load, cap in zip(loads, instance.capacities)
    )


def is_feasible(instance: Instance, selection: Selection, beta: float = 1.0) -> bool:
    """Bags respected and every |load_t| ≤ β·C_t."""
    if beta < 1:
        raise ValueError(f"beta must be ≥ 1, got {beta}")
    if not selection.respects_bags():
        return False
    weights = {pair: 1.0 for pair in selection.pairs}
    return _within(instance, slot_loads(instance, weights), beta)


def is_feasible_fractional(instance: Instance, solution: FractionalSolution,
                           beta: float = 1.0) -> bool:
    """Mixed-solution feasibility: inelastic x must be 0/1, elastic x in [0, 1]."""
    if beta < 1:
        raise ValueError(f"beta must be ≥ 1, got {beta}")
    if not solution.respects_bags():
        return False
    for pair, value in solution.x.items():
        pref = instance.preference(*pair)
        if not pref.is_elastic and min(abs(value), abs(1 - value)) > 1e-7:
            return False
    return _within(instance, slot_loads(instance, solution.x), beta)


# ─── Angles ───────────────────────────────────────────────────────────────────

def angle_stats(instance: Instance) -> tuple[float, float]:
    """(φ, θ): the largest demand argument and its excess beyond π/2."""
    args = [
        value.argument
        for _, pref in instance.pairs()
        for value in pref.values
        if value.magnitude > 0
    ]
    # No demands at all: φ = 0 by convention.
    phi = max(args, default=0.0)
    phi = max(phi, 0.0)
    return phi, max(phi - math.pi / 2, 0.0)


def _pairwise_angle(a: complex, b: complex) -> float:
    cos = (a.real * b.real + a.imag * b.imag) / (abs(a) * abs(b))
    return math.acos(min(1.0, max(-1.0, cos)))


def angle_sum_bound_check(vectors: Iterable[ComplexPower],
                          tol: float = 1e-9) -> tuple[float, float, bool]:
    """
    Compare Σ|d_i| / |Σ d_i| against sec(θ/2), θ the widest pairwise angle.

    Zero vectors are dropped before θ is measured.
    """
    zs = [v.to_complex() for v in vectors if v.magnitude > 0]
    if not zs:
        raise ValueError("need at least one nonzero vector")
    theta = max(
        (_pairwise_angle(a, b) for a, b in itertools.combinations(zs, 2)),
        default=0.0,
    )
    lhs = sum(abs(z) for z in zs) / abs(sum(zs))
    rhs = 1.0 / math.cos(theta / 2)
    return lhs, rhs, lhs <= rhs + tol


# ─── Rotation ─────────────────────────────────────────────────────────────────

def rotate(instance: Instance, rho: float) -> Instance:
    """Multiply every demand by e^{iρ}. No validation is performed."""
    users = tuple(
        User(user.user_id, tuple(
            pref.replace_values(v.rotated(rho) for v in pref.values)
            for pref in user.preferences
        ))
        for user in instance.users
    )
    return instance.with_users(users)


def normalize_rotation(instance: Instance) -> tuple[Instance, float]:
    """
    Rotate so the smallest arc holding every demand argument starts at 0.

    Accepts inputs in any quadrant (for instance the usual I/IV convention)
    as long as the arc is narrower than π. Returns the rotated instance and ρ.
    """
    args = sorted(
        value.argument % (2 * math.pi)
        for _, pref in instance.pairs()
        for value in pref.values
        if value.magnitude > 0
    )
    if not args:
        return instance, 0.0

    # The largest gap between consecutive angles is the part of the circle
    # the arc does not cover; the arc starts right after it.
    gaps = [(args[(i + 1) % len(args)] - args[i]) % (2 * math.pi) for i in range(len(args))]
    if len(args) == 1:
        gaps = [2 * math.pi]
    widest = max(range(len(gaps)), key=gaps.__getitem__)
    start  = args[(widest + 1) % len(args)]
    width  = 2 * math.pi - gaps[widest]
    if width >= math.pi:
        raise InstanceError(
            f"[core_model] ❌ demand arguments span {width:.4f} rad ≥ π — "
            "no rotation brings them into [0, π)"
        )

    rho = math.remainder(-start, 2 * math.pi)
    rotated = rotate(instance, rho)
    # Clean sign noise left by the rotation on the boundary rays.
    users = tuple(
        User(user.user_id, tuple(
            pref.replace_values(_snap(v) for v in pref.values)
            for pref in user.preferences
        ))
        for user in rotated.users
    )
    log.debug("normalized rotation by ρ=%.6f (arc width %.6f)", rho, width)
    return rotated.with_users(users), rho


def _snap(value: ComplexPower, tol: float = 1e-12) -> ComplexPower:
    scale = max(value.magnitude, 1.0)
    re = 0.0 if abs(value.re) <= tol * scale else value.re
    im = 0.0 if abs(value.im) <= tol * scale else value.im
    return ComplexPower(re, im)

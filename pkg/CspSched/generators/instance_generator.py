# csp_sched/generators/instance_generator.py
"""
Instance Generator

Seeded random instances that always pass core_model.validate.

Each user draws all of its arguments from one side of π/2, so no user
mixes quadrants; values are rounded to 6 decimals and kept just inside
their capacity so the rounding can never push them over.
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import math
from dataclasses import dataclass

import numpy as np

from core_model import (
    ComplexPower,
    DemandPreference,
    Elasticity,
    Instance,
    User,
    assert_valid,
)

log = logging.getLogger(__name__)

CAPACITY_PROFILES = ('constant', 'random', 'valley')
UTILITY_MODELS    = ('proportional', 'uniform')
WINDOW_MODELS     = ('full', 'random-contiguous')
DEMAND_MODELS     = ('constant', 'varying')

DECIMALS = 6
GUARD    = 1e-5


@dataclass(frozen=True)
class GeneratorConfig:
    seed:               int = 0
    n:                  int = 6
    max_prefs_per_user: int = 3
    m:                  int = 1
    angle_max:          float = math.pi / 2
    capacity_profile:   str = 'constant'
    capacity_base:      float = 10.0
    magnitude_range:    tuple[float, float] = (0.1, 0.6)
    utility_model:      str = 'proportional'
    elastic_fraction:   float = 0.0
    window_model:       str = 'full'
    demand_model:       str = 'constant'

    def check(self) -> None:
        """Raise ValueError naming the first bad field."""
        if self.n < 0:
            raise ValueError(f"n must be ≥ 0, got {self.n}")
        if self.max_prefs_per_user < 1:
            raise ValueError(f"max_prefs_per_user must be ≥ 1, got {self.max_prefs_per_user}")
        if self.m < 1:
            raise ValueError(f"m must be ≥ 1, got {self.m}")
        if not 0 <= self.angle_max < math.pi:
            raise ValueError(f"angle_max must lie in [0, π), got {self.angle_max}")
        if self.capacity_base <= 0:
            raise ValueError(f"capacity_base must be positive, got {self.capacity_base}")
        lo, hi = self.magnitude_range
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"magnitude_range must satisfy 0 < lo ≤ hi ≤ 1, got {self.magnitude_range}")
        if not 0 <= self.elastic_fraction <= 1:
            raise ValueError(f"elastic_fraction must lie in [0, 1], got {self.elastic_fraction}")
        for value, allowed, label in (
            (self.capacity_profile, CAPACITY_PROFILES, 'capacity_profile'),
            (self.utility_model, UTILITY_MODELS, 'utility_model'),
            (self.window_model, WINDOW_MODELS, 'window_model'),
            (self.demand_model, DEMAND_MODELS, 'demand_model'),
        ):
            if value not in allowed:
                raise ValueError(f"{label} must be one of {', '.join(allowed)}; got {value!r}")


def _capacities(config: GeneratorConfig, rng: np.random.Generator) -> tuple[float, ...]:
    base = config.capacity_base
    if config.capacity_profile == 'constant':
        caps = [base] * config.m
    elif config.capacity_profile == 'random':
        caps = list(base * rng.uniform(0.5, 1.5, size=config.m))
    else:
        # Lowest in the middle of the horizon, like an evening peak.
        caps = [base * (1 - 0.5 * math.sin(math.pi * t / (config.m + 1)))
                for t in range(1, config.m + 1)]
    return tuple(round(float(c), DECIMALS) for c in caps)


def _window(config: GeneratorConfig, rng: np.random.Generator) -> tuple[int, ...]:
    if config.window_model == 'full':
        return tuple(range(1, config.m + 1))
    length = int(rng.integers(1, config.m + 1))
    start = int(rng.integers(1, config.m - length + 2))
    return tuple(range(start, start + length))


def _point(magnitude: float, argument: float, second_quadrant: bool) -> ComplexPower:
    re = round(magnitude * math.cos(argument), DECIMALS)
    im = round(magnitude * math.sin(argument), DECIMALS)
    if second_quadrant:
        re = min(re, -10.0 ** -DECIMALS)
        im = max(im, 10.0 ** -DECIMALS)
    else:
        re = max(re, 0.0)
        im = max(im, 0.0)
    return ComplexPower(re, im)


def _argument(config: GeneratorConfig, rng: np.random.Generator, second_quadrant: bool) -> float:
    if second_quadrant:
        return float(rng.uniform(math.pi / 2, config.angle_max))
    return float(rng.uniform(0.0, min(config.angle_max, math.pi / 2)))


def generate_instance(config: GeneratorConfig) -> Instance:
    """Deterministic for a fixed config: same seed, same instance."""
    config.check()
    rng = np.random.default_rng(config.seed)
    capacities = _capacities(config, rng)
    lo, hi = config.magnitude_range
    mixed_sides = config.angle_max > math.pi / 2

    users = []
    for k in range(1, config.n + 1):
        second_quadrant = bool(mixed_sides and rng.random() < 0.5)
        prefs = []
        for j in range(1, int(rng.integers(1, config.max_prefs_per_user + 1)) + 1):
            window = _window(config, rng)
            if config.demand_model == 'constant':
                room = min(capacities[t - 1] for t in window)
                value = _point(max(float(rng.uniform(lo, hi)) * room - GUARD, GUARD),
                               _argument(config, rng, second_quadrant), second_quadrant)
                values = (value,) * len(window)
            else:
                values = tuple(
                    _point(max(float(rng.uniform(lo, hi)) * capacities[t - 1] - GUARD, GUARD),
                           _argument(config, rng, second_quadrant), second_quadrant)
                    for t in window
                )

            if config.utility_model == 'proportional':
                size = sum(v.magnitude for v in values)
                utility = size * float(rng.uniform(0.8, 1.2))
            else:
                utility = float(rng.uniform(1.0, 10.0))
            elastic = bool(config.elastic_fraction > 0 and rng.random() < config.elastic_fraction)

            prefs.append(DemandPreference(
                pref_id=f"p{j}",
                window=window,
                values=values,
                utility=max(round(utility, DECIMALS), 10.0 ** -3),
                elasticity=Elasticity.ELASTIC if elastic else Elasticity.INELASTIC,
            ))
        users.append(User(f"u{k}", tuple(prefs)))

    instance = Instance(config.m, capacities, tuple(users))
    assert_valid(instance)
    log.debug("generated seed=%d: n=%d m=%d", config.seed, config.n, config.m)
    return instance

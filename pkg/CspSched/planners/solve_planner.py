# csp_sched/planners/solve_planner.py
"""
Solve Planner

Turns an --algorithm string plus its flags into a SolvePlan, checked
against supported_algorithms.json. The plan says what to run and which
β its output is promised to meet; orchestrator.py does the running.

  'fptas'            -> SolvePlan(name='fptas')
  'mixed+greedy'     -> SolvePlan(name='mixed', inner=SolvePlan(name='greedy'))
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
from dataclasses import dataclass

from core_model import Instance
from errors import PreconditionError
from file_manager import assert_algorithm_supported
from preconditions import (
    assert_angle_margin,
    assert_constant_contiguous,
    assert_first_quadrant,
    assert_single_slot,
    assert_slot_cap,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON      = 0.25
DEFAULT_DELTA        = 0.5
DEFAULT_ANGLE_MARGIN = 1e-3


@dataclass(frozen=True)
class SolveRequest:
    algorithm:    str
    epsilon:      float = DEFAULT_EPSILON
    delta:        float = DEFAULT_DELTA
    angle_margin: float = DEFAULT_ANGLE_MARGIN
    normalize:    bool = False


@dataclass(frozen=True)
class SolvePlan:
    name:         str
    entry:        dict
    epsilon:      float
    delta:        float
    angle_margin: float
    normalize:    bool = False
    inner:        'SolvePlan | None' = None

    @property
    def label(self) -> str:
        return f"{self.name}+{self.inner.label}" if self.inner else self.name

    @property
    def uses_epsilon(self) -> bool:
        if self.inner is not None:
            return True
        return self.name in ('fptas', 'ptas')

    def advertised_beta(self) -> float:
        """The β every output of this plan must satisfy."""
        beta = self.entry.get('beta', '1')
        if beta == 'inner':
            return self.inner.advertised_beta()
        if beta == '1+4eps':
            return 1 + 4 * self.epsilon
        return float(beta)


def plan_solve(request: SolveRequest) -> SolvePlan:
    """
    Resolve an algorithm string against the registry.

    Raises PreconditionError for unknown names, bad nesting and out-of-range
    parameters, before any instance is read.
    """
    name, _, inner_name = request.algorithm.partition('+')
    entry = assert_algorithm_supported(name)

    if not 0 < request.epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1); got {request.epsilon}")
    if not 0 < request.delta <= 1:
        raise PreconditionError(f"delta must lie in (0, 1]; got {request.delta}")
    if request.angle_margin <= 0:
        raise PreconditionError(f"angle margin must be positive; got {request.angle_margin}")

    inner = None
    if name == 'mixed':
        if not inner_name:
            raise PreconditionError(
                "mixed needs an inner algorithm, e.g. --algorithm mixed+greedy"
            )
        if inner_name.startswith('mixed'):
            raise PreconditionError("mixed cannot wrap itself; pick an inelastic inner algorithm")
        inner = plan_solve(SolveRequest(inner_name, request.epsilon, request.delta, request.angle_margin))
    elif inner_name:
        raise PreconditionError(f"only mixed takes an inner algorithm; got {request.algorithm}")

    plan = SolvePlan(
        name=name,
        entry=entry,
        epsilon=request.epsilon,
        delta=request.delta,
        angle_margin=request.angle_margin,
        normalize=request.normalize,
        inner=inner,
    )
    log.debug("planned %s (advertised β=%g)", plan.label, plan.advertised_beta())
    return plan


def assert_plan_applies(plan: SolvePlan, instance: Instance, max_slots: int) -> None:
    """
    Check the instance against the registry limits of the plan.

    mixed defers to its inner plan: the level instance keeps the slots,
    angles and windows of the original.
    """
    if plan.inner is not None:
        assert_plan_applies(plan.inner, instance, max_slots)
    entry, label = plan.entry, plan.label

    slots = entry.get('slots', 'any')
    if slots == 'one':
        assert_single_slot(instance, label)
    elif slots == 'capped':
        assert_slot_cap(instance, max_slots, label)

    angle = entry.get('angle', 'any')
    if angle == 'first-quadrant':
        assert_first_quadrant(instance, label)
    elif angle == 'below-pi':
        assert_angle_margin(instance, plan.angle_margin, label)

    if entry.get('needs_constant_contiguous', False):
        assert_constant_contiguous(instance, label)

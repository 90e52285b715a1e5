# csp_sched/preconditions.py
"""
Guards that every solver calls before doing any work.

Each assert_* raises PreconditionError naming the assumption the
instance breaks, so the CLI can print it and exit 2.
"""

import math

from core_model import Instance, angle_stats
from errors import PreconditionError

ANGLE_TOL = 1e-9


def assert_epsilon(epsilon: float, algorithm: str) -> None:
    if not 0 < epsilon < 1:
        raise PreconditionError(
            f"{algorithm} requires 0 < epsilon < 1; got epsilon={epsilon}"
        )


def assert_single_slot(instance: Instance, algorithm: str) -> None:
    if instance.m != 1:
        raise PreconditionError(
            f"{algorithm} requires m=1 (single-slot instance); got m={instance.m}"
        )


def assert_slot_cap(instance: Instance, max_slots: int, algorithm: str) -> None:
    if instance.m > max_slots:
        raise PreconditionError(
            f"{algorithm} requires a constant number of slots, m ≤ {max_slots}; "
            f"got m={instance.m} — raise CSP_SCHED_MAX_SLOTS to allow more"
        )


def assert_first_quadrant(instance: Instance, algorithm: str) -> None:
    """All demand arguments in [0, π/2]."""
    phi, _ = angle_stats(instance)
    if phi > math.pi / 2 + ANGLE_TOL:
        raise PreconditionError(
            f"{algorithm} requires every demand argument ≤ π/2 (first quadrant); "
            f"got φ={phi:.6f}"
        )


def assert_angle_margin(instance: Instance, angle_margin: float, algorithm: str) -> None:
    """φ ≤ π − margin, so tan θ stays bounded."""
    phi, _ = angle_stats(instance)
    if angle_margin <= 0:
        raise PreconditionError(f"{algorithm} requires a positive angle margin; got {angle_margin}")
    if phi > math.pi - angle_margin + ANGLE_TOL:
        raise PreconditionError(
            f"{algorithm} requires φ ≤ π − {angle_margin:g} (bounded tan θ); got φ={phi:.6f}"
        )


def assert_constant_contiguous(instance: Instance, algorithm: str) -> None:
    for user, pref in instance.pairs():
        if not pref.is_contiguous:
            raise PreconditionError(
                f"{algorithm} requires contiguous windows; "
                f"user {user.user_id} pref {pref.pref_id} has window {list(pref.window)}"
            )
        if not pref.is_constant:
            raise PreconditionError(
                f"{algorithm} requires demands constant over their window; "
                f"user {user.user_id} pref {pref.pref_id} varies"
            )

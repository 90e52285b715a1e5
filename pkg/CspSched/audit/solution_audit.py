# csp_sched/audit/solution_audit.py
"""
Solution Audit

Re-checks a solution file against its instance: every id must exist,
each user may hold at most one unit of preference, inelastic choices must
be whole, and every slot load must stay within β·C_t. Problems are
collected rather than raised so `csp-sched verify` can print them all.
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
from collections import Counter
from dataclasses import dataclass, field

from core_model import (
    FEAS_TOL,
    Instance,
    SolveReport,
    evaluate_fractional,
)
from parsers import SolutionRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuditResult:
    ok:          bool
    beta:        float
    diagnostics: tuple[str, ...] = ()
    report:      SolveReport | None = None
    excess:      dict = field(default_factory=dict)   # slot -> |load| − β·C_t, only where positive


def audit_solution(instance: Instance, record: SolutionRecord, beta: float = 1.0) -> AuditResult:
    if beta < 1:
        raise ValueError(f"beta must be ≥ 1, got {beta}")
    diagnostics: list[str] = []

    known = [*record.chosen, *((u, p) for u, p, _ in record.fractional)]
    unknown = [pair for pair in known if pair not in instance.index]
    for u, p in unknown:
        diagnostics.append(f"unknown preference: user {u} pref {p}")
    if unknown:
        return AuditResult(False, beta, tuple(diagnostics))

    for pair, count in Counter(known).items():
        if count > 1:
            diagnostics.append(f"user {pair[0]} pref {pair[1]}: listed {count} times")

    weights = record.weights()
    per_user: dict[str, float] = {}
    for (u, p), x in weights.x.items():
        per_user[u] = per_user.get(u, 0.0) + x
        pref = instance.preference(u, p)
        if not pref.is_elastic and 1e-7 < x < 1 - 1e-7:
            diagnostics.append(f"user {u} pref {p}: inelastic preference at fractional x={x:g}")
    for u, total in per_user.items():
        if total > 1 + 1e-9:
            diagnostics.append(f"user {u}: preferences sum to {total:g} > 1 (bag violated)")

    report = evaluate_fractional(instance, weights, 'verify')
    excess = {}
    for t, (load, cap) in enumerate(zip(report.per_slot_load, instance.capacities), start=1):
        over = load.magnitude - beta * cap
        if over > FEAS_TOL * cap:
            excess[t] = over
            diagnostics.append(
                f"slot {t}: |load|={load.magnitude:.6g} > β·C_t={beta * cap:.6g} (excess {over:.6g})"
            )

    ok = not diagnostics
    log.debug("audit at β=%g: %s", beta, 'ok' if ok else f"{len(diagnostics)} problems")
    return AuditResult(ok, beta, tuple(diagnostics), report, excess)

# csp_sched/orchestrator.py
"""
Orchestrator for csp-sched

Solve flow:
  1. solve_planner     → SolvePlan (algorithm + parameters, checked against the registry)
  2. prepare_instance  → optional rotation, hard validation, registry limits
  3. run_algorithm     → dispatch to the solver, elastic handling per algorithm
  4. audit             → the result re-checked at the plan's advertised β

compare() runs the same flow for every (instance, algorithm) pair and
turns the outcomes into report rows.
"""

import glob
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from tqdm import tqdm

from audit.solution_audit import audit_solution
from core_model import (
    FEAS_TOL,
    DemandPreference,
    Instance,
    Selection,
    SolveReport,
    User,
    assert_valid,
    evaluate,
    evaluate_fractional,
    normalize_rotation,
)
from errors import CspSchedError
from file_manager import format_report_row, load_instance, load_settings
from oracle import OracleBudget, exact_solve
from parsers import SolutionRecord
from planners.solve_planner import SolvePlan, SolveRequest, assert_plan_applies, plan_solve
from preconditions import assert_first_quadrant
from solvers.fptas_multislot import solve_bifptas
from solvers.greedy_single_slot import solve as solve_greedy
from solvers.mixed_elastic import solve_mixed
from solvers.ptas_multislot import solve_ptas, solve_ptas_fractional
from solvers.ufp_reduction import solve_split

log = logging.getLogger(__name__)

COMPARE_FIELDS = ['instance', 'algorithm', 'epsilon', 'utility', 'beta', 'elapsed_ms',
                  'ratio', 'feasible', 'error']


@dataclass(frozen=True)
class SolveOutcome:
    record:  SolutionRecord
    report:  SolveReport
    rho:     float = 0.0
    audit_ok: bool = True
    diagnostics: tuple[str, ...] = field(default_factory=tuple)


# ─── Greedy per slot ──────────────────────────────────────────────────────────

def solve_sequential(instance: Instance) -> tuple[Selection, SolveReport]:
    """
    Slot-by-slot greedy on residual magnitude capacities. No guarantee.

    Each slot runs the single-slot greedy over the users still free and the
    preferences active in that slot; its picks are committed in utility
    order whenever their magnitudes fit the residual capacity on every slot
    of their window.
    """
    started = time.perf_counter()
    assert_first_quadrant(instance, 'greedy-sequential')

    residual = list(instance.capacities)
    taken: dict[str, str] = {}

    for t in range(1, instance.m + 1):
        if residual[t - 1] <= FEAS_TOL * instance.capacity(t):
            continue
        users = []
        for user in instance.users:
            if user.user_id in taken:
                continue
            prefs = tuple(
                DemandPreference(p.pref_id, (1,), (p.value_at(t),), p.utility)
                for p in user.preferences if t in p.slot_values
            )
            if prefs:
                users.append(User(user.user_id, prefs))
        if not users:
            continue

        picked, _ = solve_greedy(Instance(1, (residual[t - 1],), tuple(users)))
        ordered = sorted(
            picked.pairs,
            key=lambda pair: (-instance.preference(*pair).utility, pair),
        )
        for user_id, pref_id in ordered:
            pref = instance.preference(user_id, pref_id)
            fits = all(
                v.magnitude <= residual[s - 1] + FEAS_TOL * instance.capacity(s)
                for s, v in pref.slot_values.items()
            )
            if user_id in taken or not fits:
                continue
            for s, v in pref.slot_values.items():
                residual[s - 1] -= v.magnitude
            taken[user_id] = pref_id
        log.debug("greedy-sequential slot %d: %d users committed so far", t, len(taken))

    selection = Selection(tuple(taken.items())).canonical(instance)
    report = evaluate(instance, selection, 'greedy-sequential', time.perf_counter() - started)
    report.metadata['guarantee'] = 'none'
    return selection, report


# ─── Dispatch ─────────────────────────────────────────────────────────────────

def prepare_instance(instance: Instance, normalize: bool = False) -> tuple[Instance, float]:
    rho = 0.0
    if normalize:
        instance, rho = normalize_rotation(instance)
    assert_valid(instance)
    return instance, rho


def _run_inelastic(instance: Instance, plan: SolvePlan) -> tuple[Selection, SolveReport]:
    name = plan.name
    if name == 'exact':
        started = time.perf_counter()
        selection, _ = exact_solve(instance, OracleBudget(load_settings().oracle_budget))
        return selection, evaluate(instance, selection, 'exact', time.perf_counter() - started)
    if name == 'greedy':
        return solve_greedy(instance)
    if name == 'greedy-sequential':
        return solve_sequential(instance)
    if name == 'fptas':
        return solve_bifptas(instance, plan.epsilon, angle_margin=plan.angle_margin)
    if name == 'ptas':
        return solve_ptas(instance, plan.epsilon)
    if name == 'ufp':
        return solve_split(instance, plan.delta)
    raise CspSchedError(f"[orchestrator] no dispatch for algorithm {name!r}")


def run_algorithm(instance: Instance, plan: SolvePlan) -> tuple[SolutionRecord, SolveReport]:
    """Run one plan on a validated instance."""
    if plan.name == 'mixed':
        solution, report = solve_mixed(
            instance, plan.epsilon, lambda inst: _run_inelastic(inst, plan.inner),
        )
        return SolutionRecord.from_fractional(solution), report.with_timing(plan.label, report.elapsed)

    if plan.name == 'ptas' and instance.has_elastic:
        solution, report = solve_ptas_fractional(instance, plan.epsilon)
        return SolutionRecord.from_fractional(solution), report

    if instance.has_elastic:
        log.warning("%s treats elastic preferences as all-or-nothing; use mixed+%s to serve fractions",
                    plan.name, plan.name)
    selection, report = _run_inelastic(instance, plan)
    return SolutionRecord.from_selection(selection), report


def solve_instance(instance: Instance, plan: SolvePlan) -> SolveOutcome:
    """Steps 2-4 of the solve flow for an instance already in memory."""
    log.info("Step 2/4 — preparing instance (m=%d, n=%d)", instance.m, instance.n)
    prepared, rho = prepare_instance(instance, plan.normalize)
    assert_plan_applies(plan, prepared, load_settings().max_slots)

    log.info("Step 3/4 — running %s", plan.label)
    record, report = run_algorithm(prepared, plan)
    if rho:
        # Same choices, loads reported in the caller's frame.
        rotated_meta = {**report.metadata, 'rho': rho}
        report = evaluate_fractional(instance, record.weights(), report.solver_name, report.elapsed)
        report.metadata.update(rotated_meta)

    log.info("Step 4/4 — auditing at advertised β=%g", plan.advertised_beta())
    audit = audit_solution(prepared, record, plan.advertised_beta())
    if not audit.ok:
        for line in audit.diagnostics:
            log.warning("audit: %s", line)
    return SolveOutcome(record, report, rho, audit.ok, audit.diagnostics)


def solve_file(path, request: SolveRequest) -> tuple[Instance, SolvePlan, SolveOutcome]:
    """The whole solve flow, starting from an instance file."""
    log.info("Step 1/4 — planning %s", request.algorithm)
    plan = plan_solve(request)
    instance = load_instance(path)
    return instance, plan, solve_instance(instance, plan)


# ─── Compare ──────────────────────────────────────────────────────────────────

def expand_instances(pattern: str) -> list[Path]:
    """Sorted matches of a glob; an empty match is not an error."""
    return [Path(p) for p in sorted(glob.glob(pattern, recursive=True))]


def _compare_one(path: str, algorithms: tuple[str, ...], epsilon: float, delta: float,
                 angle_margin: float) -> list[dict]:
    rows: list[dict] = []
    try:
        instance = load_instance(path)
    except CspSchedError as exc:
        return [{**format_report_row(path, name, None, None, None, None),
                 'ratio': '', 'feasible': '', 'error': str(exc).strip().splitlines()[0]}
                for name in algorithms]

    outcomes: dict[str, SolveOutcome | str] = {}
    for name in algorithms:
        try:
            plan = plan_solve(SolveRequest(name, epsilon, delta, angle_margin))
            outcomes[name] = solve_instance(instance, plan)
        except (CspSchedError, ValueError) as exc:
            outcomes[name] = str(exc).strip().splitlines()[0]

    exact = outcomes.get('exact')
    opt = exact.report.utility if isinstance(exact, SolveOutcome) else None

    for name in algorithms:
        outcome = outcomes[name]
        if isinstance(outcome, str):
            rows.append({**format_report_row(path, name, None, None, None, None),
                         'ratio': '', 'feasible': '', 'error': outcome})
            continue
        plan_eps = epsilon if name in ('fptas', 'ptas') or name.startswith('mixed') else None
        ratio = ''
        if opt is not None:
            ratio = f"{outcome.report.utility / opt:.10g}" if opt > 0 else '1'
        rows.append({
            **format_report_row(path, name, plan_eps, outcome.report.utility,
                                outcome.report.violation_beta, outcome.report.elapsed),
            'ratio': ratio,
            'feasible': 'yes' if outcome.audit_ok else 'no',
            'error': '',
        })
    return rows


def compare(pattern: str, algorithms: list[str], epsilon: float = 0.25, delta: float = 0.5,
            angle_margin: float = 1e-3, jobs: int = 1, progress: bool = True) -> list[dict]:
    """
    One row per (instance, algorithm), instances in sorted path order.

    Failures are recorded in the row's error column and the run goes on.
    With jobs > 1 instances are solved in worker processes; rows are
    reassembled in path order, so the table does not depend on scheduling.
    """
    paths = [str(p) for p in expand_instances(pattern)]
    args = (tuple(algorithms), epsilon, delta, angle_margin)
    results: list[list[dict]] = [[] for _ in paths]

    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_compare_one, path, *args) for path in paths]
            for i, future in enumerate(tqdm(futures, desc='compare', disable=not progress)):
                results[i] = future.result()
    else:
        for i, path in enumerate(tqdm(paths, desc='compare', disable=not progress)):
            results[i] = _compare_one(path, *args)

    return [row for rows in results for row in rows]

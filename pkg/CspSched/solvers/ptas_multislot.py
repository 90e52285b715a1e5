# csp_sched/solvers/ptas_multislot.py
"""
PTAS for a constant number of slots, first-quadrant demands

Per guess S₁ (a feasible set of at most ⌈8m/ε⌉ demands, one per user):

  1. S₀ ← every other demand more useful than the least useful one in S₁
  2. solve the convex relaxation with S₁ fixed to 1 and S₀ to 0
  3. read off its real/imaginary loads (the projection budget)
  4. move to a vertex of the budget LP without losing objective
  5. round the remaining fractional inelastic variables down

The best rounded guess is returned. Rounding down keeps every real and
imaginary load inside its budget, and the budget lies inside the disk,
so every output is feasible at β = 1.

Guesses are visited best-bound-first: a guess whose magnitude-knapsack
upper bound is already below the best rounded utility is skipped,
which never changes the answer.
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Protocol

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from core_model import (
    FEAS_TOL,
    FractionalSolution,
    Instance,
    Pair,
    Selection,
    SolveReport,
    angle_stats,
    evaluate,
    evaluate_fractional,
)
from errors import ResourceCapError
from file_manager import load_settings
from preconditions import assert_epsilon, assert_first_quadrant, assert_slot_cap

log = logging.getLogger(__name__)

SOLVER_NAME = 'ptas'

INT_TOL = 1e-9


# ─── Types ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GuessPair:
    S1: frozenset[Pair]
    S0: frozenset[Pair]

    @property
    def fixed(self) -> frozenset[Pair]:
        return self.S1 | self.S0


@dataclass(frozen=True)
class ProjectionBudget:
    LR: tuple[float, ...]
    LI: tuple[float, ...]

    def within_disk(self, capacities: Iterable[float], tol: float = FEAS_TOL) -> bool:
        return all(
            math.hypot(r, i) <= c * (1 + tol)
            for r, i, c in zip(self.LR, self.LI, capacities)
        )


@dataclass(frozen=True)
class Items:
    """Every (user, pref) of an instance as parallel arrays, in instance order."""

    pairs:    tuple[Pair, ...]
    u:        np.ndarray
    S:        np.ndarray   # complex, shape (m, N)
    owner:    np.ndarray   # user index per item
    elastic:  np.ndarray
    capacity: np.ndarray

    @classmethod
    def from_instance(cls, instance: Instance) -> 'Items':
        pairs, u, cols, owner, elastic = [], [], [], [], []
        for k, user in enumerate(instance.users):
            for pref in user.preferences:
                pairs.append((user.user_id, pref.pref_id))
                u.append(pref.utility)
                cols.append([pref.value_at(t).to_complex() for t in range(1, instance.m + 1)])
                owner.append(k)
                elastic.append(pref.is_elastic)
        S = np.array(cols, dtype=complex).T.reshape(instance.m, len(pairs))
        return cls(
            tuple(pairs), np.array(u, dtype=float), S,
            np.array(owner, dtype=int), np.array(elastic, dtype=bool),
            np.array(instance.capacities, dtype=float),
        )

    @property
    def N(self) -> int:
        return len(self.pairs)

    def mask(self, pairs: Iterable[Pair]) -> np.ndarray:
        wanted = set(pairs)
        return np.array([p in wanted for p in self.pairs], dtype=bool)

    def vector(self, solution: FractionalSolution) -> np.ndarray:
        return np.array([solution.value(p) for p in self.pairs], dtype=float)

    def solution(self, x: np.ndarray) -> FractionalSolution:
        return FractionalSolution({
            pair: float(v) for pair, v in zip(self.pairs, x) if v > INT_TOL
        })

    def loads(self, x: np.ndarray) -> np.ndarray:
        return self.S @ x

    def bag_matrix(self) -> np.ndarray:
        users = np.unique(self.owner)
        return (self.owner[None, :] == users[:, None]).astype(float)


# ─── Convex relaxation ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RelaxationProblem:
    """max u·x  s.t. |S_t·x| ≤ C_t, Σ_j x_kj ≤ 1, x = 1 on S₁, x = 0 on fixed-zero."""

    items:      Items
    fixed_one:  np.ndarray
    fixed_zero: np.ndarray

    @property
    def free(self) -> np.ndarray:
        locked_users = set(self.items.owner[self.fixed_one])
        locked = np.array([k in locked_users for k in self.items.owner], dtype=bool)
        return ~self.fixed_one & ~self.fixed_zero & ~locked

    def base(self) -> np.ndarray:
        return self.fixed_one.astype(float)


class RelaxationSolver(Protocol):
    def __call__(self, problem: RelaxationProblem, delta: float) -> np.ndarray: ...


def _max_step_in_disks(a: np.ndarray, b: np.ndarray, capacity: np.ndarray) -> float:
    """Largest λ ∈ [0, 1] with |a_t + λ b_t| ≤ C_t on every slot, given |a_t| ≤ C_t."""
    lam = 1.0
    for a_t, b_t, c in zip(a, b, capacity):
        qa = abs(b_t) ** 2
        if qa == 0:
            continue
        qb = 2 * (a_t.real * b_t.real + a_t.imag * b_t.imag)
        qc = abs(a_t) ** 2 - c * c
        if qa + qb + qc <= 0:
            continue
        disc = max(qb * qb - 4 * qa * qc, 0.0)
        lam = min(lam, max((-qb + math.sqrt(disc)) / (2 * qa), 0.0))
    return lam


class CuttingPlaneRelaxation:
    """
    Outer approximation of the disks by tangent cuts, solved as an LP.

    Each LP optimum is an upper bound; pulling it back towards the S₁
    indicator until it fits the disks gives a feasible point. The loop
    adds a cut at the angle of every violated load and stops once the
    bound and the feasible point are within delta.
    """

    def __init__(self, initial_cuts: int = 7, max_iterations: int = 200):
        self.initial_cuts   = initial_cuts
        self.max_iterations = max_iterations

    def __call__(self, problem: RelaxationProblem, delta: float) -> np.ndarray:
        items = problem.items
        free = np.nonzero(problem.free)[0]
        x0 = problem.base()
        if free.size == 0:
            return x0

        m = items.S.shape[0]
        a = items.loads(x0)
        S_free = items.S[:, free]
        u_free = items.u[free]

        bag_rows = []
        for k in np.unique(items.owner[free]):
            row = (items.owner[free] == k).astype(float)
            if row.sum() > 1:
                bag_rows.append(row)

        cuts = [(t, alpha) for t in range(m)
                for alpha in np.linspace(0.0, math.pi / 2, self.initial_cuts)]
        best = x0
        best_obj = float(items.u @ x0)

        for iteration in range(1, self.max_iterations + 1):
            A = np.array([
                np.cos(alpha) * S_free[t].real + np.sin(alpha) * S_free[t].imag
                for t, alpha in cuts
            ])
            b = np.array([
                items.capacity[t] - (math.cos(alpha) * a[t].real + math.sin(alpha) * a[t].imag)
                for t, alpha in cuts
            ])
            if bag_rows:
                A = np.vstack([A, np.array(bag_rows)])
                b = np.concatenate([b, np.ones(len(bag_rows))])

            res = linprog(-u_free, A_ub=A, b_ub=b, bounds=(0, 1), method='highs')
            if res.status != 0:
                raise AssertionError(
                    f"relaxation LP failed under a feasible guess: {res.message}"
                )

            x_out = x0.copy()
            x_out[free] = np.clip(res.x, 0.0, 1.0)
            upper = float(items.u @ x_out)

            lam = _max_step_in_disks(a, items.loads(x_out) - a, items.capacity)
            x_rep = x0 + lam * (x_out - x0)
            obj = float(items.u @ x_rep)
            if obj > best_obj:
                best, best_obj = x_rep, obj

            if upper - best_obj <= delta:
                log.debug("relaxation converged in %d LPs (gap %.3g)", iteration, upper - best_obj)
                return best

            loads = items.loads(x_out)
            added = 0
            for t in range(m):
                if abs(loads[t]) > items.capacity[t] * (1 + FEAS_TOL):
                    cuts.append((t, math.atan2(loads[t].imag, loads[t].real)))
                    added += 1
            if added == 0:
                return best

        log.warning("relaxation stopped after %d LPs with gap %.3g > δ=%.3g",
                    self.max_iterations, upper - best_obj, delta)
        return best


def _problem(instance: Instance, S1: Iterable[Pair], S0: Iterable[Pair]) -> RelaxationProblem:
    items = Items.from_instance(instance)
    return RelaxationProblem(items, items.mask(S1), items.mask(S0))


def solve_relaxation(instance: Instance, S1: Iterable[Pair], S0: Iterable[Pair],
                     delta: float, solver: RelaxationSolver | None = None) -> FractionalSolution:
    """Feasible point of the relaxation within delta of its optimum."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    problem = _problem(instance, S1, S0)
    x = (solver or CuttingPlaneRelaxation())(problem, delta)
    return problem.items.solution(x)


def projection_budget(instance: Instance, x_cx: FractionalSolution) -> ProjectionBudget:
    items = Items.from_instance(instance)
    loads = items.loads(items.vector(x_cx))
    return ProjectionBudget(tuple(float(v) for v in loads.real), tuple(float(v) for v in loads.imag))


# ─── Purification ─────────────────────────────────────────────────────────────

def _rational_null_vector(A: np.ndarray) -> np.ndarray:
    """One kernel vector of A by exact Gauss-Jordan over the rationals (n × 0 if none)."""
    rows, cols = A.shape
    M = [[Fraction(float(v)) for v in row] for row in A]
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if pivot is None:
            continue
        M[r], M[pivot] = M[pivot], M[r]
        lead = M[r][c]
        M[r] = [v / lead for v in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                factor = M[i][c]
                M[i] = [vi - factor * vr for vi, vr in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break

    free_cols = [c for c in range(cols) if c not in pivots]
    if not free_cols:
        return np.zeros((cols, 0))
    f = free_cols[0]
    vec = [Fraction(0)] * cols
    vec[f] = Fraction(1)
    for i, c in enumerate(pivots):
        vec[c] = -M[i][f]
    return np.array([[float(v)] for v in vec])


def purify_to_bfs(instance: Instance, budget: ProjectionBudget, x_start: FractionalSolution,
                  fixed: Iterable[Pair], tol: float = INT_TOL) -> FractionalSolution:
    """
    Walk from x_start to a vertex of the budget LP, never losing objective.

    Each step picks a kernel direction of the tight rows restricted to the
    fractional free variables, orients it uphill and moves until a bound or
    a new row becomes tight. A step that stalls forces the blocking row tight
    and takes the next kernel vector in exact arithmetic.
    """
    items = Items.from_instance(instance)
    x = items.vector(x_start)
    free = ~items.mask(fixed)
    m = items.S.shape[0]

    rows = np.vstack([items.S.real, items.S.imag])
    rhs = np.array(budget.LR + budget.LI, dtype=float)
    row_tol = tol * np.maximum(1.0, np.abs(rhs))
    bags = items.bag_matrix()

    forced_rows: set[int] = set()
    forced_bags: set[int] = set()
    exact = False
    limit = 10 * (items.N + 2 * m + bags.shape[0]) + 10

    for _ in range(limit):
        J = np.nonzero(free & (x > tol) & (x < 1 - tol))[0]
        if J.size == 0:
            break

        row_slack = rhs - rows @ x
        bag_slack = 1.0 - bags @ x
        tight_rows = [r for r in range(2 * m) if row_slack[r] <= row_tol[r] or r in forced_rows]
        tight_bags = [k for k in range(bags.shape[0])
                      if (bag_slack[k] <= tol or k in forced_bags) and bags[k, J].any()]

        A = np.vstack([rows[tight_rows][:, J], bags[tight_bags][:, J]]) \
            if tight_rows or tight_bags else np.zeros((0, J.size))
        if A.shape[0] == 0:
            kernel = np.eye(J.size)[:, :1]
        elif exact:
            kernel = _rational_null_vector(A)
        else:
            kernel = null_space(A)
        if kernel.shape[1] == 0:
            break

        d = kernel[:, 0] / np.max(np.abs(kernel[:, 0]))
        if items.u[J] @ d < 0:
            d = -d

        step, blocker = math.inf, None
        for idx, di in zip(J, d):
            if di > 1e-15:
                cand = (1 - x[idx]) / di
            elif di < -1e-15:
                cand = x[idx] / -di
            else:
                continue
            if cand < step:
                step, blocker = cand, ('var', idx)
        for r in range(2 * m):
            if r in tight_rows:
                continue
            rate = rows[r, J] @ d
            if rate > 1e-15 and row_slack[r] / rate < step:
                step, blocker = max(row_slack[r], 0.0) / rate, ('row', r)
        for k in range(bags.shape[0]):
            if k in tight_bags:
                continue
            rate = bags[k, J] @ d
            if rate > 1e-15 and bag_slack[k] / rate < step:
                step, blocker = max(bag_slack[k], 0.0) / rate, ('bag', k)

        if blocker is None:
            break

        if step < 1e-12:
            kind, which = blocker
            if kind == 'var':
                x[which] = 0.0 if x[which] < 0.5 else 1.0
            elif kind == 'row':
                forced_rows.add(which)
            else:
                forced_bags.add(which)
            exact = True
            continue

        x[J] += step * d
        x[np.abs(x) < tol] = 0.0
        x[np.abs(x - 1) < tol] = 1.0
        np.clip(x, 0.0, 1.0, out=x)
        exact = False
    else:
        log.warning("purification hit its step limit; returning the current point")

    return items.solution(x)


# ─── Guess enumeration ────────────────────────────────────────────────────────

def count_guesses(n_items: int, k_max: int) -> int:
    return sum(math.comb(n_items, i) for i in range(min(k_max, n_items) + 1))


def _feasible_subsets(items: Items, eligible: np.ndarray, k_max: int) -> list[tuple[int, ...]]:
    """
    Every bag-respecting subset of eligible items, of size ≤ k_max, that fits.

    First-quadrant loads only grow, so an over-capacity prefix is cut.
    """
    candidates = [int(i) for i in np.nonzero(eligible)[0]]
    cols = [tuple(items.S[:, i]) for i in candidates]
    limit = items.capacity * (1 + FEAS_TOL)
    found: list[tuple[int, ...]] = []

    def walk(start: int, chosen: list[int], load: tuple, users: set[int]) -> None:
        found.append(tuple(chosen))
        if len(chosen) == k_max:
            return
        for pos in range(start, len(candidates)):
            i = candidates[pos]
            owner = int(items.owner[i])
            if owner in users:
                continue
            nxt = tuple(a + b for a, b in zip(load, cols[pos]))
            if any(abs(z) > c for z, c in zip(nxt, limit)):
                continue
            chosen.append(i)
            users.add(owner)
            walk(pos + 1, chosen, nxt, users)
            users.discard(owner)
            chosen.pop()

    walk(0, [], tuple(0j for _ in range(items.S.shape[0])), set())
    found.sort(key=lambda s: (len(s), s))
    return found


def _guess(items: Items, eligible: np.ndarray, subset: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    one = np.zeros(items.N, dtype=bool)
    one[list(subset)] = True
    zero = np.zeros(items.N, dtype=bool)
    if subset:
        floor_u = items.u[list(subset)].min()
        zero = eligible & ~one & (items.u > floor_u)
    return one, zero


class _GuessBound:
    """
    Upper bound on what a guess can reach.

    Nonneg combinations of first-quadrant demands satisfy
    Σ|s| ≤ sec(φ/2)·|Σ s|, so per slot the free demands fit a
    magnitude budget of sec(φ/2)·C_t − Σ_{S₁}|s|; a fractional
    knapsack on that budget bounds the relaxation.
    """

    def __init__(self, items: Items, phi: float):
        self.items = items
        self.mags = np.abs(items.S)
        self.sec = 1.0 / math.cos(phi / 2)
        self.orders = []
        for t in range(items.S.shape[0]):
            mags = self.mags[t]
            eff = np.where(mags > 0, items.u / np.where(mags > 0, mags, 1.0), np.inf)
            self.orders.append(sorted(range(items.N), key=lambda i: (-eff[i], i)))

    def __call__(self, one: np.ndarray, blocked: np.ndarray) -> float:
        items = self.items
        base = float(items.u[one].sum())
        per_user: dict[int, float] = {}
        for i in np.nonzero(~blocked)[0]:
            k = int(items.owner[i])
            per_user[k] = max(per_user.get(k, 0.0), float(items.u[i]))
        bound = sum(per_user.values())

        for t, order in enumerate(self.orders):
            room = self.sec * items.capacity[t] - float(self.mags[t][one].sum())
            room = max(room, 0.0)
            total = 0.0
            for i in order:
                if blocked[i]:
                    continue
                mag = self.mags[t, i]
                if mag <= room:
                    total += items.u[i]
                    room -= mag
                else:
                    total += items.u[i] * room / mag
                    break
            bound = min(bound, total)
        return base + bound


# ─── Solver ───────────────────────────────────────────────────────────────────

def _run(instance: Instance, epsilon: float, keep_elastic: bool,
         relaxation: RelaxationSolver | None, max_slots: int | None,
         guess_cap: int | None) -> tuple[np.ndarray, Items, dict]:
    settings = load_settings()
    max_slots = settings.max_slots if max_slots is None else max_slots
    guess_cap = settings.ptas_guess_cap if guess_cap is None else guess_cap

    assert_epsilon(epsilon, SOLVER_NAME)
    assert_slot_cap(instance, max_slots, SOLVER_NAME)
    assert_first_quadrant(instance, SOLVER_NAME)

    items = Items.from_instance(instance)
    metadata: dict = {'epsilon': epsilon, 'guesses': 0, 'guesses_evaluated': 0, 'purification': []}
    if items.N == 0:
        return np.zeros(0), items, metadata

    m = instance.m
    k_max = math.ceil(8 * m / epsilon)
    eligible = ~items.elastic if keep_elastic else np.ones(items.N, dtype=bool)
    raw = count_guesses(int(eligible.sum()), k_max)
    if raw > guess_cap:
        raise ResourceCapError(
            'ptas guess enumeration', raw, guess_cap,
            hint='Raise CSP_SCHED_PTAS_GUESS_CAP or use a larger epsilon.',
        )

    phi, _ = angle_stats(instance)
    delta = (epsilon / 2) * float(items.u.max())
    solver = relaxation or CuttingPlaneRelaxation()
    bound = _GuessBound(items, phi)

    subsets = _feasible_subsets(items, eligible, k_max)
    metadata.update(guesses=len(subsets), k_max=k_max, delta=delta)

    ranked = []
    for subset in subsets:
        one, zero = _guess(items, eligible, subset)
        locked = np.isin(items.owner, items.owner[one]) & ~one
        ranked.append((bound(one, one | zero | locked), subset, one, zero))
    ranked.sort(key=lambda r: (-r[0], len(r[1]), r[1]))

    best_u, best_key, best_x = 0.0, None, np.zeros(items.N)
    bags = items.bag_matrix()
    for upper, subset, one, zero in ranked:
        if best_key is not None and upper < best_u - 1e-9 * max(1.0, abs(best_u)):
            break
        metadata['guesses_evaluated'] += 1

        problem = RelaxationProblem(items, one, zero)
        x_cx = solver(problem, delta)
        budget = ProjectionBudget(
            tuple(float(v) for v in items.loads(x_cx).real),
            tuple(float(v) for v in items.loads(x_cx).imag),
        )
        if (bags @ x_cx > 1 + 1e-7).any():
            raise AssertionError(f"relaxation point breaks a bag constraint under guess {subset}")

        fixed_pairs = [items.pairs[i] for i in np.nonzero(one | zero)[0]]
        x_lp = items.vector(purify_to_bfs(instance, budget, items.solution(x_cx), fixed_pairs))

        free = ~(one | zero)
        fractional = int((free & (x_lp > INT_TOL) & (x_lp < 1 - INT_TOL)).sum())
        x_final = np.where(x_lp >= 1 - INT_TOL, 1.0, 0.0)
        if keep_elastic:
            x_final = np.where(items.elastic, x_lp, x_final)

        obj_start, obj_lp = float(items.u @ x_cx), float(items.u @ x_lp)
        utility = float(items.u @ x_final)
        loss = obj_lp - utility
        loss_bound = 4 * m * float(items.u[one].mean()) if len(subset) == k_max else None
        record = {
            'S1': [list(items.pairs[i]) for i in subset],
            'fractional': fractional,
            'objective_start': obj_start,
            'objective_vertex': obj_lp,
            'utility': utility,
            'loss': loss,
            'loss_bound': loss_bound,
        }
        metadata['purification'].append(record)
        if fractional > 4 * m:
            log.warning("guess %s: %d fractional variables after purification (> 4m)", subset, fractional)
        if loss_bound is not None and loss > loss_bound + 1e-7:
            log.warning("guess %s: round-down lost %.6g > %.6g", subset, loss, loss_bound)

        key = (len(subset), subset)
        if best_key is None or utility > best_u + 1e-9 * max(1.0, abs(best_u)) or (
            math.isclose(utility, best_u, rel_tol=1e-9, abs_tol=1e-9) and key < best_key
        ):
            best_u, best_key, best_x = utility, key, x_final

    metadata['best_S1'] = [list(items.pairs[i]) for i in best_key[1]] if best_key else []
    return best_x, items, metadata


def solve_ptas(instance: Instance, epsilon: float, *,
               relaxation: RelaxationSolver | None = None,
               max_slots: int | None = None,
               guess_cap: int | None = None) -> tuple[Selection, SolveReport]:
    """(1 − ε, 1) solve; elastic demands are treated as all-or-nothing."""
    started = time.perf_counter()
    x, items, metadata = _run(instance, epsilon, False, relaxation, max_slots, guess_cap)
    selection = Selection(tuple(p for p, v in zip(items.pairs, x) if v >= 1 - INT_TOL))
    report = evaluate(instance, selection, SOLVER_NAME, time.perf_counter() - started)
    report.metadata.update(metadata)
    log.info("%s: utility=%.6g beta=%.6g (%d/%d guesses evaluated)", SOLVER_NAME,
             report.utility, report.violation_beta, metadata['guesses_evaluated'], metadata['guesses'])
    return selection, report


def solve_ptas_fractional(instance: Instance, epsilon: float, *,
                          relaxation: RelaxationSolver | None = None,
                          max_slots: int | None = None,
                          guess_cap: int | None = None) -> tuple[FractionalSolution, SolveReport]:
    """Same scheme, but elastic variables keep their vertex values instead of rounding down."""
    started = time.perf_counter()
    x, items, metadata = _run(instance, epsilon, True, relaxation, max_slots, guess_cap)
    solution = items.solution(x)
    report = evaluate_fractional(instance, solution, SOLVER_NAME, time.perf_counter() - started)
    report.metadata.update(metadata)
    log.info("%s (fractional elastic): utility=%.6g beta=%.6g", SOLVER_NAME,
             report.utility, report.violation_beta)
    return solution, report

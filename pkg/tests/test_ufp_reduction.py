"""Tests for the bag-UFP reduction and its large/small sub-solvers."""

import itertools
import math

import pytest

from core_model import Selection, angle_stats, is_feasible
from errors import PreconditionError
from factories import instance, pref
from solvers.ufp_reduction import (
    BagPreference,
    BagUser,
    RealBagInstance,
    bag_loads,
    carry_back,
    check_nba,
    crossing_bound,
    crossing_bound_check,
    is_bag_feasible,
    solve_large_exact,
    solve_large_local_ratio,
    solve_small_exact,
    solve_small_greedy,
    solve_split,
    split_by_delta,
    to_bag_ufp,
)


def _bag(capacities, users):
    """users: {user_id: [(pref_id, demand, start, end, utility), ...]}"""
    return RealBagInstance(len(capacities), tuple(float(c) for c in capacities), tuple(
        BagUser(uid, tuple(BagPreference(*p) for p in prefs)) for uid, prefs in users.items()
    ))


def _every_selection(bag):
    choices = [[None] + [(u.user_id, p.pref_id) for p in u.preferences] for u in bag.users]
    for combo in itertools.product(*choices):
        yield Selection(tuple(c for c in combo if c is not None))


def _contiguous(make_random, seed, **overrides):
    return make_random(seed, window_model='random-contiguous', demand_model='constant', **overrides)


# ─── reduction ────────────────────────────────────────────────────────────────

def test_complex_demand_becomes_its_magnitude():
    inst = instance([5, 5, 5], {'u1': [pref('p1', [3 + 4j, 3 + 4j], 2, window=[2, 3])]})
    bag = to_bag_ufp(inst)
    assert bag.index[('u1', 'p1')] == BagPreference('p1', 5.0, 2, 3, 2.0)


def test_varying_demand_is_rejected():
    inst = instance([5, 5], {'u1': [pref('p1', [1 + 1j, 2 + 2j], 1)]})
    with pytest.raises(PreconditionError, match='constant'):
        to_bag_ufp(inst)


def test_gapped_window_is_rejected():
    inst = instance([5, 5, 5], {'u1': [pref('p1', [1 + 0j, 1 + 0j], 1, window=[1, 3])]})
    with pytest.raises(PreconditionError, match='contiguous'):
        to_bag_ufp(inst)


def test_real_instance_is_unchanged():
    inst = instance([4, 6], {
        'u1': [pref('p1', [2 + 0j, 2 + 0j], 3)],
        'u2': [pref('p1', [1.5 + 0j], 1, window=[2])],
    })
    bag = to_bag_ufp(inst)
    assert bag.capacities == (4.0, 6.0)
    assert bag.index[('u1', 'p1')] == BagPreference('p1', 2.0, 1, 2, 3.0)
    assert bag.index[('u2', 'p1')] == BagPreference('p1', 1.5, 2, 2, 1.0)


# ─── feasibility transfer ─────────────────────────────────────────────────────

def test_empty_selection_is_bag_feasible():
    assert is_bag_feasible(_bag([1], {}), Selection())


def test_exactly_tight_magnitudes_are_complex_feasible():
    inst = instance([5], {'u1': [pref('p1', 3 + 0j, 1)], 'u2': [pref('p1', 1.2 + 1.6j, 1)]})
    selection = Selection((('u1', 'p1'), ('u2', 'p1')))
    assert is_bag_feasible(to_bag_ufp(inst), selection)
    assert is_feasible(inst, selection)


def _carry_back_check(make_random, seeds, **overrides):
    checked = instances = 0
    for seed in seeds:
        inst = _contiguous(make_random, seed, n=4, m=3, max_prefs_per_user=2, **overrides)
        bag = to_bag_ufp(inst)
        if not check_nba(bag):
            continue
        instances += 1
        for selection in _every_selection(bag):
            if is_bag_feasible(bag, selection):
                assert is_feasible(inst, selection)
                checked += 1
    return instances, checked


def test_bag_feasible_implies_complex_feasible(make_random):
    instances, checked = _carry_back_check(make_random, range(100), magnitude_range=(0.2, 0.6))
    assert instances == 100
    assert checked > 100


@pytest.mark.slow
def test_bag_feasible_implies_complex_feasible_at_scale(make_random):
    instances, _ = _carry_back_check(make_random, range(1000, 1500))
    assert instances == 500


def test_complex_feasible_is_bag_feasible_after_cos_scaling(make_random):
    for seed in range(60):
        inst = _contiguous(make_random, seed, n=4, m=3, max_prefs_per_user=2)
        bag = to_bag_ufp(inst)
        phi, _ = angle_stats(inst)
        scale = math.cos(phi / 2)
        for selection in _every_selection(bag):
            if not is_feasible(inst, selection):
                continue
            for t, load in enumerate(bag_loads(bag, selection), start=1):
                assert scale * load <= bag.capacity(t) * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize('demands, capacities, expected', [
    ([3, 5], [5, 9], True),
    ([6], [5, 9], False),
    ([], [5, 9], True),
])
def test_no_bottleneck_assumption(demands, capacities, expected):
    bag = _bag(capacities, {f"u{k}": [('p1', d, 1, 1, 1.0)] for k, d in enumerate(demands)})
    assert check_nba(bag) is expected


# ─── large demands ────────────────────────────────────────────────────────────

def test_disjoint_large_intervals_are_both_kept():
    bag = _bag([1, 1, 1, 1], {'a': [('p1', 0.9, 1, 2, 5.0)], 'b': [('p1', 0.9, 3, 4, 3.0)]})
    selection = solve_large_local_ratio(bag, split_by_delta(bag, 0.5))
    assert selection.pairs == (('a', 'p1'), ('b', 'p1'))


def test_one_preference_per_bag():
    bag = _bag([1, 1, 1], {'a': [('p1', 0.9, 1, 2, 5.0), ('p2', 0.9, 2, 3, 4.0)]})
    selection = solve_large_local_ratio(bag, split_by_delta(bag, 0.5))
    assert len(selection.pairs) == 1


def _best_disjoint(bag, split):
    best = 0.0
    for selection in _every_selection(bag):
        prefs = [bag.index[p] for p in selection.pairs]
        if not all(split.is_large(p) for p in selection.pairs):
            continue
        if any(a.overlaps(b) for a, b in itertools.combinations(prefs, 2)):
            continue
        best = max(best, sum(p.utility for p in prefs))
    return best


def test_local_ratio_is_half_of_best_disjoint(make_random):
    for seed in range(60):
        inst = _contiguous(make_random, seed, n=5, m=4, max_prefs_per_user=2, magnitude_range=(0.55, 1.0))
        bag = to_bag_ufp(inst)
        split = split_by_delta(bag, 0.5)
        selection = solve_large_local_ratio(bag, split)
        prefs = [bag.index[p] for p in selection.pairs]
        assert selection.respects_bags()
        assert not any(a.overlaps(b) for a, b in itertools.combinations(prefs, 2))
        assert sum(p.utility for p in prefs) >= 0.5 * _best_disjoint(bag, split) - 1e-9


# ─── small demands ────────────────────────────────────────────────────────────

def test_single_small_demand_is_kept():
    bag = _bag([10], {'a': [('p1', 1.0, 1, 1, 2.0)]})
    assert solve_small_greedy(bag, split_by_delta(bag, 0.5)).pairs == (('a', 'p1'),)


def test_small_greedy_keeps_a_feasible_prefix():
    bag = _bag([1, 1], {f"u{k}": [('p1', 0.4, 1, 2, 1.0 + k)] for k in range(4)})
    selection = solve_small_greedy(bag, split_by_delta(bag, 0.5))
    assert is_bag_feasible(bag, selection)
    assert selection.pairs == (('u3', 'p1'), ('u2', 'p1'))


def test_small_greedy_without_small_demands():
    bag = _bag([1], {'a': [('p1', 0.9, 1, 1, 2.0)]})
    assert solve_small_greedy(bag, split_by_delta(bag, 0.5)).pairs == ()


def test_delta_must_be_in_range():
    with pytest.raises(PreconditionError):
        split_by_delta(_bag([1], {}), 0.0)
    with pytest.raises(PreconditionError):
        split_by_delta(_bag([1], {}), 1.5)


# ─── split solve ──────────────────────────────────────────────────────────────

def test_all_large_instance_uses_local_ratio(make_random):
    inst = _contiguous(make_random, 3, n=5, m=4, magnitude_range=(0.55, 1.0))
    bag = to_bag_ufp(inst)
    expected = solve_large_local_ratio(bag, split_by_delta(bag, 0.5))
    selection, report = solve_split(inst, 0.5)
    assert set(selection.pairs) == set(expected.pairs)
    assert report.metadata['small_count'] == 0


def test_all_small_instance_uses_greedy(make_random):
    inst = _contiguous(make_random, 4, n=6, m=3, magnitude_range=(0.05, 0.45))
    bag = to_bag_ufp(inst)
    expected = solve_small_greedy(bag, split_by_delta(bag, 0.5))
    selection, report = solve_split(inst, 0.5)
    assert set(selection.pairs) == set(expected.pairs)
    assert report.metadata['large_count'] == 0


@pytest.mark.parametrize('seed', range(30))
def test_split_solve_is_feasible_and_keeps_the_better_side(make_random, seed):
    inst = _contiguous(make_random, seed, n=5, m=3, max_prefs_per_user=2)
    selection, report = solve_split(inst, 0.5)
    assert is_feasible(inst, selection)
    assert report.utility == pytest.approx(
        max(report.metadata['large_utility'], report.metadata['small_utility']))


def test_exact_sub_solvers_plug_in(make_random):
    for seed in range(10):
        inst = _contiguous(make_random, seed, n=4, m=3, max_prefs_per_user=2)
        _, heuristic = solve_split(inst, 0.5)
        selection, exact = solve_split(inst, 0.5, large_solver=solve_large_exact,
                                       small_solver=solve_small_exact)
        assert is_feasible(inst, selection)
        assert exact.utility >= heuristic.utility - 1e-9


def test_no_bottleneck_violation_names_the_demand():
    inst = instance([5, 9], {'u1': [pref('p1', [6 + 0j], 1, window=[2])]})
    with pytest.raises(PreconditionError, match='no-bottleneck') as excinfo:
        solve_split(inst)
    assert 'u1' in str(excinfo.value)


def test_carry_back_refuses_an_overloaded_selection():
    inst = instance([5], {'u1': [pref('p1', 4 + 0j, 1)], 'u2': [pref('p1', 4 + 0j, 1)]})
    with pytest.raises(AssertionError):
        carry_back(inst, Selection((('u1', 'p1'), ('u2', 'p1'))))


# ─── crossing bound ───────────────────────────────────────────────────────────

def test_crossing_bound_formula():
    assert crossing_bound(0.0, 0.5) == 8
    assert crossing_bound(0.0, 1.0) == 2


def test_crossing_bound_on_empty_selection(make_random):
    assert crossing_bound_check(_contiguous(make_random, 1, m=2), Selection(), 1.0)


def _crossing_check(make_random, seeds, delta, **overrides):
    for seed in seeds:
        inst = _contiguous(make_random, seed, n=4, m=3, max_prefs_per_user=2,
                           magnitude_range=(0.3, 1.0), **overrides)
        bag = to_bag_ufp(inst)
        for selection in _every_selection(bag):
            if is_feasible(inst, selection):
                assert crossing_bound_check(inst, selection, delta)


@pytest.mark.parametrize('delta', [0.5, 1.0])
def test_crossing_bound_holds_on_feasible_selections(make_random, delta):
    _crossing_check(make_random, range(40), delta, angle_max=0.0)


@pytest.mark.parametrize('delta', [0.5, 1.0])
def test_crossing_bound_holds_with_spread_angles(make_random, delta):
    _crossing_check(make_random, range(40), delta)


@pytest.mark.slow
@pytest.mark.parametrize('delta', [0.5, 1.0])
def test_crossing_bound_holds_at_scale(make_random, delta):
    _crossing_check(make_random, range(2000, 2500), delta)

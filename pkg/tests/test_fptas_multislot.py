"""Tests for the bi-criteria FPTAS: rounding, guess grid, exact-fit DP and the solver."""

import itertools

import pytest

from core_model import ComplexPower, DemandPreference, Instance, Selection, User, evaluate, is_feasible
from errors import PreconditionError, ResourceCapError
from factories import instance, pref, single_slot
from oracle import exact_fit_solve, exact_solve
from solvers.fptas_multislot import (
    GuessVector,
    RoundedPreference,
    RoundedUser,
    RoundingScale,
    count_raw_guesses,
    dkp_exact,
    enumerate_guesses,
    is_admissible,
    round_demands,
    round_value,
    rounded_loads,
    rounding_scale,
    solve_bifptas,
)


# ─── rounding ─────────────────────────────────────────────────────────────────

@pytest.mark.parametrize('value, L, expected', [
    ((1.3, 2.6), 1.0, (2, 3)),
    ((-1.3, 2.6), 1.0, (-2, 3)),
    ((2.0, 3.0), 1.0, (2, 3)),
    # 1.1 / 0.1 and 0.7 / 0.1 land just off their integers in floats
    ((1.1, 0.7), 0.1, (11, 7)),
    ((-1.1, 0.0), 0.1, (-11, 0)),
])
def test_round_value(value, L, expected):
    assert round_value(ComplexPower(*value), L) == expected


def test_rounding_scale():
    inst = single_slot(10, (1 + 0j, 1), (2 + 0j, 1))
    scale = rounding_scale(inst, 0.5)
    assert scale.L[0] == pytest.approx(2.5)
    assert scale.theta == 0.0


def test_rounding_rejects_right_angle_excess():
    inst = instance([10], {'u1': [pref('p1', 1 + 0j, 1)], 'u2': [pref('p1', -1 + 1e-18j, 1)]})
    with pytest.raises(PreconditionError):
        rounding_scale(inst, 0.5)


def test_rounded_loads_stay_within_stretched_capacity(make_random):
    """Every oracle-feasible selection has rounded loads ≤ (1+2ε)C_t."""
    for seed in range(30):
        inst = make_random(seed, n=4, m=int(seed % 2) + 1, angle_max=2.2, max_prefs_per_user=2)
        for epsilon in (0.25, 0.5):
            users, scale = round_demands(inst, epsilon)
            choices = [[None] + [(u.user_id, p.pref_id) for p in u.preferences] for u in inst.users]
            for combo in itertools.product(*choices):
                selection = Selection(tuple(c for c in combo if c is not None))
                if not is_feasible(inst, selection):
                    continue
                for load, cap in zip(rounded_loads(users, selection, scale), inst.capacities):
                    assert abs(load) <= (1 + 2 * epsilon) * cap + 1e-9


# ─── guess grid ───────────────────────────────────────────────────────────────

def _scale():
    return RoundingScale(L=(2.5,), capacities=(10.0,), epsilon=0.5, theta=0.0, n=2)


def test_raw_guess_count_without_padding():
    assert count_raw_guesses(_scale(), pad=False) == 125


def test_admissible_guess():
    # (ξ₊, ξ₋, ζ₊, ζ₋) = (10, 0, 10, 0) in lattice steps of 2.5
    assert is_admissible(GuessVector((4,), (0,), (4,), (0,)), _scale())


def test_inadmissible_guess():
    assert not is_admissible(GuessVector((4,), (0,), (4,), (4,)), _scale())


def test_enumeration_is_the_filtered_grid_product():
    inst = single_slot(10, (1 + 0j, 1), (2 + 0j, 1))
    scale = rounding_scale(inst, 0.5)
    guesses = list(enumerate_guesses(inst, scale, pad=False))
    assert all(is_admissible(g, scale) for g in guesses)
    # 125 raw tuples; ξ₊² + (ζ₊+ζ₋)² ≤ 64 keeps 25 + 24 + 24 + 24 + 22 of them
    assert len(guesses) == 119
    assert GuessVector((4,), (0,), (4,), (4,)) not in guesses
    assert [g.key() for g in guesses] == sorted(g.key() for g in guesses)


def test_admissibility_is_monotone(make_random):
    for seed in range(20):
        inst = make_random(seed, n=3, angle_max=0.5)
        scale = rounding_scale(inst, 0.5)
        for g in enumerate_guesses(inst, scale, pad=False):
            if all(v % 2 == 0 for v in g.key()):
                halved = GuessVector(*(tuple(v // 2 for v in side) for side in
                                       (g.xi_plus, g.xi_minus, g.zeta_plus, g.zeta_minus)))
                assert is_admissible(halved, scale)
            lowered = GuessVector(g.xi_plus, g.xi_minus,
                                  tuple(max(v - 1, 0) for v in g.zeta_plus), g.zeta_minus)
            assert is_admissible(lowered, scale)


# ─── exact-fit DP ─────────────────────────────────────────────────────────────

def _random_rounded(rng, n, m):
    return [
        RoundedUser(f"u{k}", tuple(
            RoundedPreference(
                f"p{j}", float(rng.integers(1, 10)),
                tuple(int(v) for v in rng.integers(0, 4, size=m)),
                tuple(int(v) for v in rng.integers(0, 4, size=m)),
            )
            for j in range(int(rng.integers(1, 4)))
        ))
        for k in range(n)
    ]


def test_dkp_without_users():
    assert dkp_exact([], [0], [0]) is not None
    assert dkp_exact([], [0], [0])[1] == 0
    assert dkp_exact([], [1], [0]) is None


def test_dkp_negative_target_is_unreachable():
    assert dkp_exact([], [-1], [0]) is None


def test_dkp_matches_enumeration(rng):
    for _ in range(1000):
        m = int(rng.integers(1, 3))
        users = _random_rounded(rng, int(rng.integers(0, 5)), m)
        c1 = [int(v) for v in rng.integers(0, 7, size=m)]
        c2 = [int(v) for v in rng.integers(0, 7, size=m)]
        got = dkp_exact(users, c1, c2, max_entries=10 ** 6)
        want = exact_fit_solve(users, c1, c2)
        if want is None:
            assert got is None
        else:
            assert got is not None
            assert got[1] == pytest.approx(want[1])


def test_dkp_table_cap():
    users = [RoundedUser(f"u{k}", (RoundedPreference('p1', 1.0, (k + 1,), (1,)),)) for k in range(12)]
    with pytest.raises(ResourceCapError):
        dkp_exact(users, [100], [100], max_entries=50)


# ─── solver ───────────────────────────────────────────────────────────────────

def test_single_demand_fits():
    selection, report = solve_bifptas(single_slot(5, (3 + 4j, 7)), 0.25)
    assert selection.pairs == (('u1', 'p1'),)
    assert report.utility == 7
    assert report.violation_beta <= 2


def test_empty_instance():
    selection, report = solve_bifptas(Instance(1, (1.0,), ()), 0.25)
    assert selection.pairs == ()
    assert report.utility == 0
    assert report.violation_beta == 1.0


def test_slot_cap_is_enforced():
    inst = instance([5] * 4, {'u1': [pref('p1', [1 + 0j] * 4, 1)]})
    with pytest.raises(PreconditionError, match='CSP_SCHED_MAX_SLOTS'):
        solve_bifptas(inst, 0.5, max_slots=3)


def test_angle_margin_is_enforced():
    inst = instance([5], {'u1': [pref('p1', 1 + 0j, 1)], 'u2': [pref('p1', -1 + 0.001j, 1)]})
    with pytest.raises(PreconditionError):
        solve_bifptas(inst, 0.5, angle_margin=0.01)


def test_epsilon_range():
    with pytest.raises(PreconditionError):
        solve_bifptas(single_slot(5, (3 + 4j, 7)), 1.5)


def test_beats_the_optimum_with_second_quadrant_users():
    inst = instance([5], {
        'u1': [pref('p1', 3 + 4j, 5)],
        'u2': [pref('p1', -3 + 4j, 5)],
        'u3': [pref('p1', 1 + 1j, 1)],
    })
    selection, report = solve_bifptas(inst, 0.5)
    _, opt = exact_solve(inst)
    assert report.utility >= opt
    assert report.violation_beta <= 1 + 4 * 0.5 + 1e-9
    assert report == evaluate(inst, selection, 'fptas', report.elapsed)


def _oracle_check(make_random, seeds):
    for seed in seeds:
        m = int(seed % 2) + 1
        inst = make_random(seed, n=int(seed % 5) + 2, m=m, angle_max=2.0, max_prefs_per_user=2)
        _, opt = exact_solve(inst)
        for epsilon in (0.25, 0.5):
            selection, report = solve_bifptas(inst, epsilon)
            assert selection.respects_bags()
            assert report.utility >= opt - 1e-9
            for load, cap in zip(report.per_slot_load, inst.capacities):
                assert load.magnitude <= (1 + 4 * epsilon) * cap + 1e-9


def test_bicriteria_against_oracle(make_random):
    _oracle_check(make_random, range(12))


@pytest.mark.slow
def test_bicriteria_against_oracle_at_scale(make_random):
    _oracle_check(make_random, range(100, 200))


def test_one_user_instance_is_solved():
    inst = Instance(1, (5.0,), (User('u1', (DemandPreference('p1', (1,), (ComplexPower(3, 4),), 7.0),)),))
    selection, report = solve_bifptas(inst, 0.25)
    assert selection.pairs == (('u1', 'p1'),)
    assert report.utility == 7.0
    assert report.metadata['guess'] != [0, 0, 0, 0]


def test_second_quadrant_users_only():
    inst = instance([5], {'u1': [pref('p1', -3 + 4j, 2)], 'u2': [pref('p1', -1 + 1j, 1)]})
    selection, report = solve_bifptas(inst, 0.5)
    _, opt = exact_solve(inst)
    assert report.utility >= opt
    assert selection.respects_bags()


def test_nothing_fits_gives_the_empty_selection():
    selection, report = solve_bifptas(single_slot(1, (30 + 0j, 5), (0 + 40j, 5)), 0.25)
    assert selection.pairs == ()
    assert report.utility == 0


def _per_guess_check(make_random, seeds):
    for seed in seeds:
        inst = make_random(seed, n=3, angle_max=0.5, max_prefs_per_user=2)
        paired, paired_report = solve_bifptas(inst, 0.5)
        walked, walked_report = solve_bifptas(inst, 0.5, per_guess=True)
        assert walked_report.utility == pytest.approx(paired_report.utility)
        assert walked_report.metadata['strategy'] == 'per-guess'
        assert walked.pairs == paired.pairs


def test_per_guess_walk_matches_paired_tables(make_random):
    _per_guess_check(make_random, range(4))


@pytest.mark.slow
def test_per_guess_walk_matches_paired_tables_at_scale(make_random):
    _per_guess_check(make_random, range(4, 24))


def test_per_guess_walk_respects_the_cap():
    with pytest.raises(ResourceCapError, match='guess enumeration'):
        solve_bifptas(single_slot(5, (3 + 4j, 7)), 0.25, per_guess=True, max_entries=10)

"""Tests for planning, dispatch, greedy-sequential and compare."""

import math

import pytest

from core_model import is_feasible
from errors import PreconditionError
from factories import instance, pref
from file_manager import write_instance
from oracle import exact_solve
from orchestrator import compare, expand_instances, solve_instance, solve_sequential
from planners import SolveRequest, plan_solve


# ─── planner ──────────────────────────────────────────────────────────────────

def test_plan_labels_and_beta():
    fptas = plan_solve(SolveRequest('fptas', epsilon=0.25))
    assert fptas.label == 'fptas'
    assert fptas.uses_epsilon
    assert fptas.advertised_beta() == pytest.approx(2.0)

    mixed = plan_solve(SolveRequest('mixed+fptas', epsilon=0.25))
    assert mixed.label == 'mixed+fptas'
    assert mixed.inner.name == 'fptas'
    assert mixed.advertised_beta() == pytest.approx(2.0)

    greedy = plan_solve(SolveRequest('greedy'))
    assert not greedy.uses_epsilon
    assert greedy.advertised_beta() == 1.0


@pytest.mark.parametrize('request_, fragment', [
    (SolveRequest('mixed+mixed+greedy'), 'cannot wrap itself'),
    (SolveRequest('fptas', epsilon=1.0), 'epsilon'),
    (SolveRequest('ufp', delta=0.0), 'delta'),
    (SolveRequest('fptas', angle_margin=0.0), 'angle margin'),
])
def test_plan_rejections(request_, fragment):
    with pytest.raises(PreconditionError, match=fragment):
        plan_solve(request_)


_TWO_SLOTS = instance([5, 5], {'u1': [pref('p1', [1 + 0j, 1 + 0j], 1)]})
_FOUR_SLOTS = instance([5] * 4, {'u1': [pref('p1', [1 + 0j] * 4, 1)]})
_SECOND_QUADRANT = instance([5], {'u1': [pref('p1', -1 + 1j, 1)], 'u2': [pref('p1', 1 + 0j, 1)]})
_NEARLY_OPPOSED = instance([5], {'u1': [pref('p1', 1 + 0j, 1)], 'u2': [pref('p1', -1 + 1e-5j, 1)]})
_GAPPED_WINDOW = instance([5, 5, 5], {'u1': [pref('p1', [1 + 0j, 1 + 0j], 1, window=[1, 3])]})
_ELASTIC_TWO_SLOTS = instance([5, 5], {'u1': [pref('p1', [2 + 0j, 2 + 0j], 1, elastic=True)]})


@pytest.mark.parametrize('algorithm, inst, fragment', [
    ('greedy', _TWO_SLOTS, 'greedy requires m=1'),
    ('fptas', _FOUR_SLOTS, r'fptas requires a constant number of slots, m ≤ 3'),
    ('ptas', _FOUR_SLOTS, 'ptas requires a constant number of slots'),
    ('ptas', _SECOND_QUADRANT, 'ptas requires every demand argument'),
    ('greedy-sequential', _SECOND_QUADRANT, 'greedy-sequential requires every demand argument'),
    ('fptas', _NEARLY_OPPOSED, 'fptas requires φ ≤ π'),
    ('ufp', _GAPPED_WINDOW, 'ufp requires contiguous windows'),
    ('mixed+greedy', _ELASTIC_TWO_SLOTS, 'greedy requires m=1'),
])
def test_registry_limits_are_enforced(algorithm, inst, fragment):
    with pytest.raises(PreconditionError, match=fragment):
        solve_instance(inst, plan_solve(SolveRequest(algorithm)))


def test_registry_limits_stop_the_run_before_dispatch(monkeypatch):
    def fail(_):
        raise AssertionError('solver reached')
    monkeypatch.setattr('orchestrator.solve_greedy', fail)
    with pytest.raises(PreconditionError, match='greedy requires m=1'):
        solve_instance(_TWO_SLOTS, plan_solve(SolveRequest('greedy')))


def test_slot_cap_follows_the_environment(monkeypatch):
    monkeypatch.setenv('CSP_SCHED_MAX_SLOTS', '4')
    outcome = solve_instance(_FOUR_SLOTS, plan_solve(SolveRequest('fptas')))
    assert outcome.audit_ok
    assert outcome.report.utility == pytest.approx(1.0)


def test_exact_accepts_any_angle():
    outcome = solve_instance(_NEARLY_OPPOSED, plan_solve(SolveRequest('exact')))
    assert outcome.audit_ok
    assert outcome.report.utility == pytest.approx(2.0)


# ─── greedy-sequential ────────────────────────────────────────────────────────

@pytest.mark.parametrize('seed', range(20))
def test_sequential_is_feasible(make_random, seed):
    inst = make_random(seed, n=6, m=3, window_model='random-contiguous', demand_model='varying')
    selection, report = solve_sequential(inst)
    assert is_feasible(inst, selection)
    assert selection.respects_bags()
    assert report.metadata['guarantee'] == 'none'


def test_sequential_commits_across_slots():
    inst = instance([5, 5], {
        'u1': [pref('p1', [4 + 0j, 4 + 0j], 3)],
        'u2': [pref('p1', [3 + 0j], 2, window=[2])],
        'u3': [pref('p1', [1 + 0j], 1, window=[2])],
    })
    selection, report = solve_sequential(inst)
    # u1 takes 4 of slot 2, leaving room for u3 only.
    assert selection.pairs == (('u1', 'p1'), ('u3', 'p1'))
    assert report.utility == 4


def test_sequential_on_one_slot_matches_greedy_choice():
    inst = instance([10], {'u1': [pref('p1', 1 + 0j, 2)], 'u2': [pref('p1', 10 + 0j, 10)]})
    selection, _ = solve_sequential(inst)
    assert selection.pairs == (('u2', 'p1'),)


# ─── solve_instance ───────────────────────────────────────────────────────────

def test_rotation_reports_loads_in_the_original_frame():
    inst = instance([5], {
        'u1': [pref('p1', -1 + 1j, 2)],
        'u2': [pref('p1', -2 + 0.5j, 3)],
    })
    outcome = solve_instance(inst, plan_solve(SolveRequest('exact', normalize=True)))
    assert outcome.rho == pytest.approx(-3 * math.pi / 4)
    assert outcome.report.metadata['rho'] == outcome.rho
    assert outcome.audit_ok
    load = outcome.report.per_slot_load[0]
    assert load.re == pytest.approx(-3.0)
    assert load.im == pytest.approx(1.5)


def test_elastic_preferences_with_plain_exact(make_random, caplog):
    inst = make_random(6, n=3, elastic_fraction=1.0)
    with caplog.at_level('WARNING'):
        outcome = solve_instance(inst, plan_solve(SolveRequest('exact')))
    assert 'all-or-nothing' in caplog.text
    assert outcome.record.is_integral
    assert outcome.report.utility == pytest.approx(exact_solve(inst)[1])


def test_ptas_serves_elastic_fractions(make_random):
    inst = make_random(6, n=3, elastic_fraction=1.0, magnitude_range=(0.5, 1.0))
    outcome = solve_instance(inst, plan_solve(SolveRequest('ptas', epsilon=0.5)))
    assert outcome.audit_ok


# ─── compare ──────────────────────────────────────────────────────────────────

def _instance_set(tmp_path, make_random, count=3):
    for seed in range(count):
        write_instance(make_random(seed, n=4), tmp_path / f"inst-{seed:04d}.json")
    return str(tmp_path / '*.json')


def test_expand_is_sorted(tmp_path, make_random):
    pattern = _instance_set(tmp_path, make_random)
    assert [p.name for p in expand_instances(pattern)] == [
        'inst-0000.json', 'inst-0001.json', 'inst-0002.json',
    ]


def test_compare_rows_in_path_order(tmp_path, make_random):
    rows = compare(_instance_set(tmp_path, make_random), ['exact', 'greedy'], progress=False)
    assert [r['algorithm'] for r in rows] == ['exact', 'greedy'] * 3
    assert all(r['feasible'] == 'yes' for r in rows)


def test_compare_with_workers_matches_serial(tmp_path, make_random):
    pattern = _instance_set(tmp_path, make_random, count=4)
    strip = lambda rows: [{k: v for k, v in r.items() if k != 'elapsed_ms'} for r in rows]
    serial = compare(pattern, ['exact', 'greedy'], progress=False)
    parallel = compare(pattern, ['exact', 'greedy'], jobs=2, progress=False)
    assert strip(parallel) == strip(serial)


def test_compare_without_exact_leaves_ratio_blank(tmp_path, make_random):
    rows = compare(_instance_set(tmp_path, make_random, count=1), ['greedy'], progress=False)
    assert rows[0]['ratio'] == ''


def test_compare_unreadable_instance(tmp_path):
    (tmp_path / 'broken.json').write_text('{', encoding='utf-8')
    rows = compare(str(tmp_path / '*.json'), ['exact', 'greedy'], progress=False)
    assert len(rows) == 2
    assert all(r['error'] and r['feasible'] == '' for r in rows)

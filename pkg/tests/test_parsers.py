"""Tests for instance / solution JSON parsing."""

import pytest

from core_model import FractionalSolution, Selection
from errors import ParseError
from parsers import (
    SolutionRecord,
    instance_to_json,
    parse_instance,
    parse_solution,
    solution_to_json,
)


def _doc(**pref_overrides):
    pref = {'id': 'p1', 'window': [1, 2], 'values': [[3, 4], [3, 4]], 'utility': 2.5}
    pref.update(pref_overrides)
    return {'m': 2, 'capacities': [5, 6], 'users': [{'id': 'u1', 'preferences': [pref]}]}


# ─── instance ─────────────────────────────────────────────────────────────────

def test_parse_instance():
    inst = parse_instance(_doc())
    assert inst.m == 2
    assert inst.capacities == (5.0, 6.0)
    p = inst.preference('u1', 'p1')
    assert p.window == (1, 2)
    assert p.values[1].magnitude == 5.0
    assert not p.is_elastic


def test_elastic_flag():
    assert parse_instance(_doc(elastic=True)).preference('u1', 'p1').is_elastic


def test_generated_instance_survives_json(make_random):
    inst = make_random(9, n=5, m=3, elastic_fraction=0.4, window_model='random-contiguous')
    assert parse_instance(instance_to_json(inst)) == inst


@pytest.mark.parametrize('doc, location', [
    ({'capacities': [1], 'users': []}, "instance: missing field 'm'"),
    ({'m': 1.5, 'capacities': [1], 'users': []}, 'instance: m'),
    ({'m': 1, 'capacities': ['x'], 'users': []}, 'instance: capacities[0]'),
    ({'m': 1, 'capacities': [1], 'users': {}}, 'instance: users'),
])
def test_top_level_errors_name_the_field(doc, location):
    with pytest.raises(ParseError) as excinfo:
        parse_instance(doc)
    assert location in str(excinfo.value)


def test_bad_value_pair_is_located():
    with pytest.raises(ParseError) as excinfo:
        parse_instance(_doc(values=[[3, 4], [3]]))
    assert excinfo.value.location == 'instance: users[0].preferences[0].values[1]'


def test_value_count_must_match_window():
    with pytest.raises(ParseError, match='3 values for a window of 2 slots'):
        parse_instance(_doc(values=[[1, 0]] * 3))


def test_repeated_slot_becomes_a_parse_error():
    with pytest.raises(ParseError) as excinfo:
        parse_instance(_doc(window=[1, 1]))
    assert excinfo.value.location == 'instance: users[0].preferences[0]'


@pytest.mark.parametrize('overrides, fragment', [
    ({'utility': float('nan')}, 'finite'),
    ({'utility': True}, 'number'),
    ({'elastic': 'yes'}, 'true/false'),
])
def test_bad_scalars(overrides, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_instance(_doc(**overrides))


def test_source_prefixes_locations():
    with pytest.raises(ParseError, match='data/a.json: users'):
        parse_instance({'m': 1, 'capacities': [1], 'users': 3}, 'data/a.json')


# ─── solution ─────────────────────────────────────────────────────────────────

def test_parse_solution():
    record = parse_solution({'chosen': [['u1', 'p2']], 'fractional': [['u2', 'p1', 0.25]]})
    assert record.chosen == (('u1', 'p2'),)
    assert record.fractional == (('u2', 'p1', 0.25),)
    assert not record.is_integral
    assert record.weights().x == {('u1', 'p2'): 1.0, ('u2', 'p1'): 0.25}


def test_fractional_is_optional():
    record = parse_solution({'chosen': []})
    assert record.is_integral
    assert record.selection() == Selection()


@pytest.mark.parametrize('doc, fragment', [
    ({}, "missing field 'chosen'"),
    ({'chosen': [['u1']]}, 'chosen[0]'),
    ({'chosen': [], 'fractional': [['u1', 'p1', 1.5]]}, 'outside [0, 1]'),
    ({'chosen': [], 'fractional': [['u1', 'p1']]}, 'fractional[0]'),
])
def test_solution_errors(doc, fragment):
    with pytest.raises(ParseError, match=fragment.replace('[', r'\[').replace(']', r'\]')):
        parse_solution(doc)


def test_record_from_fractional_splits_integral_values():
    record = SolutionRecord.from_fractional(FractionalSolution({
        ('u1', 'p1'): 1.0, ('u2', 'p1'): 0.4, ('u3', 'p1'): 0.0,
    }))
    assert record.chosen == (('u1', 'p1'),)
    assert record.fractional == (('u2', 'p1', 0.4),)
    assert solution_to_json(record) == {'chosen': [['u1', 'p1']], 'fractional': [['u2', 'p1', 0.4]]}

from dataclasses import replace
from fractions import Fraction

import pytest

from assignment import (assign_clients_matching, load_factor_candidates, location_capacities, tightest_matching,
                        transfer_capacities, weight_scale)
from conftest import line_instance
from helper import NumericHelper
from logging_config import DecompositionError, ModelError
from threshold_graph import build


def test_large_opening_serves_the_star(star_instance):
    g = build(star_instance, Fraction(1))
    assignment = assign_clients_matching(g, [(0, 1)], Fraction(1), 1)
    assert assignment == {0: 0, 1: 0, 2: 0, 3: 0}


def test_small_opening_needs_double_load(star_instance):
    g = build(star_instance, Fraction(1))
    assert assign_clients_matching(g, [(0, 0)], Fraction(1), 1) is None
    assignment, b = tightest_matching(g, [(0, 0)], Fraction(2), 1)
    assert b == 2
    assert set(assignment.values()) == {0}


def test_hops_limit_reach(star_instance):
    g = build(star_instance, Fraction(1))
    assert assign_clients_matching(g, [(0, 1)], Fraction(1), 0) is None
    assert assign_clients_matching(g, [(0, 1)], Fraction(1), 1, clients=[]) == {}
    assert tightest_matching(g, [(0, 1)], Fraction(1), 0) == (None, Fraction(1))


def test_load_factor_steps(star_instance):
    assert load_factor_candidates(star_instance, [(0, 0)], Fraction(2)) == [
        0, Fraction(1, 2), 1, Fraction(3, 2), 2]
    assert location_capacities(star_instance, [(0, 0), (0, 1)]) == {0: 6}


def test_weighted_clients_use_scaled_units():
    inst = line_instance([0], [1, 1, 1, 1], [(1, 2)], weights=[Fraction(1, 2), Fraction(1, 2), 1, 1])
    assert weight_scale(inst) == 2
    g = build(inst, Fraction(1))
    assert assign_clients_matching(g, [(0, 0)], Fraction(1), 1) is None
    assert assign_clients_matching(g, [(0, 0)], Fraction(3, 2), 1) is not None
    _, b = tightest_matching(g, [(0, 0)], Fraction(2), 1)
    assert b == Fraction(3, 2)


def test_float_weights_must_be_integral(star_instance):
    assert weight_scale(replace(star_instance, weights=(1.0, 2.0, 1.0, 1.0))) == 1
    with pytest.raises(ModelError):
        weight_scale(replace(star_instance, weights=(0.5, 1.0, 1.0, 1.0)))


def test_transfer_moves_mass_upwards():
    transfer = transfer_capacities((0, 1), (Fraction(1, 2), Fraction(3, 2)), (2, 2))
    assert transfer.s_tilde == (1, 1)
    assert transfer.t == (1, 1)
    assert transfer.upgrades == {0: [], 1: [1]}
    assert transfer.take(1) == 1


def test_transfer_rejects_overdrawn_mass():
    with pytest.raises(DecompositionError):
        transfer_capacities((0, 2), (Fraction(1, 2), Fraction(3, 2)), (2, 2))
    with pytest.raises(DecompositionError):
        transfer_capacities((0, 1), (Fraction(1, 2), Fraction(3, 2)), (0, 2))
    with pytest.raises(ModelError):
        transfer_capacities((0,), (Fraction(1), Fraction(1)), (1, 1))


@pytest.mark.parametrize("count", [50, pytest.param(1000, marks=pytest.mark.slow)])
def test_transfer_on_random_masses(rng, count):
    for _ in range(count):
        n = int(rng.integers(1, 5))
        y_s = [Fraction(int(rng.integers(0, 13)), 4) for _ in range(n)]
        floors = [NumericHelper.floor(sum(y_s[p:], Fraction(0))) for p in range(n)] + [0]
        s = [0] * n
        for p in reversed(range(n)):
            room = floors[p] - sum(s[p + 1:])
            s[p] = int(rng.integers(0, room + 1))
        transfer = transfer_capacities(s, y_s, [10] * n)
        assert sum(transfer.s_tilde) == floors[0]
        assert all(t == 10 - k for t, k in zip(transfer.t, transfer.s_tilde))
        for p, given in transfer.upgrades.items():
            assert len(given) == s[p]
            assert all(q >= p for q in given)
        handed = sorted(q for given in transfer.upgrades.values() for q in given)
        for q in range(n):
            assert handed.count(q) <= transfer.s_tilde[q]

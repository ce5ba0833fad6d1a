import itertools
from fractions import Fraction

import pytest

from config import SeparationConfig
from knapsack import max_knapsack_cardinality
from logging_config import GuardExceeded, ModelError


def test_budget_is_strict():
    result = max_knapsack_cardinality([3, 2], [5, 3], [2, 2], 2, 6)
    assert result.counts == (1, 1)
    assert result.value == 8
    assert result.cost == 5
    assert result.exact_grid


def test_unbounded_cardinality_uses_all_copies():
    result = max_knapsack_cardinality([3, 2], [5, 3], [2, 2], None, 7)
    assert result.counts == (2, 0)
    assert result.value == 10


def test_rational_costs_stay_exact():
    result = max_knapsack_cardinality([Fraction(1, 2), Fraction(1, 3)], [1, 1], [3, 3], 3, 1)
    assert result.exact_grid
    assert result.value == 2
    assert result.cost < 1


def test_float_budget_rounds_costs_up():
    result = max_knapsack_cardinality([0.5, 0.25], [1.0, 1.0], [2, 2], 4, 1.0)
    assert not result.exact_grid
    assert result.cost < 1.0
    assert result.value == 2


def test_empty_cases():
    assert max_knapsack_cardinality([1], [1], [1], 0, 5).counts == (0,)
    assert max_knapsack_cardinality([1], [1], [1], 1, 0).counts == (0,)
    assert max_knapsack_cardinality([9], [1], [1], 1, 5).value == 0


def test_rejects_bad_input():
    with pytest.raises(ModelError):
        max_knapsack_cardinality([1, 2], [1], [1], 1, 5)
    with pytest.raises(ModelError):
        max_knapsack_cardinality([-1], [1], [1], 1, 5)
    with pytest.raises(GuardExceeded):
        max_knapsack_cardinality([1], [1], [50], 50, 1000, SeparationConfig(knapsack_guard=10))


def test_matches_enumeration(rng):
    for _ in range(30):
        n = int(rng.integers(1, 4))
        costs = [int(c) for c in rng.integers(1, 8, size=n)]
        gains = [int(g) for g in rng.integers(1, 10, size=n)]
        copies = [int(s) for s in rng.integers(0, 4, size=n)]
        cardinality = int(rng.integers(1, 5))
        budget = int(rng.integers(1, 20))
        best = 0
        for counts in itertools.product(*(range(s + 1) for s in copies)):
            if sum(counts) <= cardinality and sum(c * k for c, k in zip(costs, counts)) < budget:
                best = max(best, sum(g * k for g, k in zip(gains, counts)))
        result = max_knapsack_cardinality(costs, gains, copies, cardinality, budget)
        assert result.value == best
        assert result.cost < budget
        assert sum(result.counts) <= cardinality

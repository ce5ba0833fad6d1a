from fractions import Fraction

import pytest

from conftest import random_cckp
from core import Allocation, CckpInstance, Machine, SupplyVector, evaluate_allocation
from logging_config import ModelError
from oracles import brute_force_cckp
from qptas import (QptasSolver, qptas_cckp, round_down_power, round_up_exponent, round_up_power,
                   trim_to_cardinality)

EPS = Fraction(1, 5)
BASE = 1 + EPS


def test_power_rounding():
    assert round_down_power(Fraction(10), BASE) == 12
    assert round_up_power(Fraction(10), BASE) == 13
    assert round_up_power(Fraction(1), BASE) == 0
    assert round_down_power(BASE ** 5, BASE) == 5
    assert round_up_power(BASE ** 5, BASE) == 5
    assert round_up_exponent(Fraction(50), BASE) == 22
    assert round_up_exponent(Fraction(1, 2), BASE) == -3
    assert round_up_exponent(BASE ** -2, BASE) == -2


def test_machines_with_close_demands_share_a_group():
    inst = CckpInstance(machines=(Machine(Fraction(10), 3), Machine(Fraction(21, 2), 3), Machine(Fraction(20), 3)),
                        job_types=(Fraction(1),))
    solver = QptasSolver(inst, SupplyVector((1,)), EPS)
    assert [g.members for g in solver.groups] == [(0, 1), (2,)]
    assert solver.groups[0].demand == BASE ** 12
    assert solver.groups[0].cardinality == 3


def test_near_equal_capacities_share_a_class():
    inst = CckpInstance(machines=(Machine(Fraction(20), 2),),
                        job_types=(Fraction(1, 10), Fraction(1), Fraction(10), Fraction(21, 2)))
    supply = SupplyVector((0, 0, 1, 1))
    solver = QptasSolver(inst, supply, EPS)
    assert solver.classes == [(-3, (0,)), (9, (1,)), (22, (2, 3))]
    assert solver.inst.job_types[2] == EPS * BASE ** 22
    assert solver.supply.counts == (0, 0, 2)
    allocation = solver.run()
    assert allocation.assignment == ((2, 3),)
    assert evaluate_allocation(inst, supply, allocation).min_ratio >= 1


def test_trim_keeps_the_largest_jobs():
    inst = CckpInstance(machines=(Machine(Fraction(4), 2),), job_types=(Fraction(1), Fraction(2), Fraction(3)))
    assert trim_to_cardinality(inst, Allocation.from_lists([[0, 1, 2]])).assignment == ((1, 2),)


def test_feasible_instance_is_solved():
    inst = CckpInstance(machines=(Machine(Fraction(4), 2), Machine(Fraction(4), 2)),
                        job_types=(Fraction(1), Fraction(3)))
    supply = SupplyVector((2, 2))
    allocation = qptas_cckp(inst, supply, EPS)
    report = evaluate_allocation(inst, supply, allocation)
    assert report.valid
    assert report.min_ratio >= 1 - 3 * EPS


def test_infeasible_instance_returns_none():
    inst = CckpInstance(machines=(Machine(Fraction(4), 2), Machine(Fraction(4), 2)),
                        job_types=(Fraction(1), Fraction(3)))
    assert qptas_cckp(inst, SupplyVector((0, 1)), EPS) is None


def test_epsilon_and_instance_checks():
    inst = CckpInstance(machines=(Machine(Fraction(4)),), job_types=(Fraction(1),))
    with pytest.raises(ModelError):
        qptas_cckp(inst, SupplyVector((1,)), Fraction(1, 3))
    with pytest.raises(ModelError):
        qptas_cckp(inst, SupplyVector((1, 1)), EPS)
    restricted = CckpInstance(machines=inst.machines, job_types=inst.job_types, admissible=(frozenset({0}),))
    with pytest.raises(ModelError):
        qptas_cckp(restricted, SupplyVector((1,)), EPS)


@pytest.mark.parametrize("count", [30, pytest.param(100, marks=pytest.mark.slow)])
def test_agrees_with_exhaustive_search(rng, count):
    for _ in range(count):
        inst, supply = random_cckp(rng, m=int(rng.integers(1, 4)), max_copies=7, n_types=3, cardinality=True)
        exact = brute_force_cckp(inst, supply)
        allocation = qptas_cckp(inst, supply, EPS)
        if allocation is None:
            assert exact.ratio < 1
            continue
        report = evaluate_allocation(inst, supply, allocation)
        assert report.valid
        if exact.ratio >= 1:
            assert report.min_ratio >= 1 - 3 * EPS

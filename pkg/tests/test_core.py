import math
from dataclasses import replace
from fractions import Fraction

import pytest

from conftest import line_instance, random_cckp
from core import (Allocation, CapacityType, CckpInstance, Machine, McKcSolution, SupplyVector, evaluate_allocation,
                  evaluate_solution, require_valid, validate_instance)
from helper import INFINITY
from logging_config import GuardExceeded, ModelError
from oracles import brute_force_cckp, brute_force_mckc, brute_force_restricted


def test_line_instance_is_valid(star_instance, path_instance):
    assert validate_instance(star_instance) == []
    assert validate_instance(path_instance) == []


def test_validator_reports_each_problem(star_instance):
    rows = [list(r) for r in star_instance.distance]
    rows[0][2] = Fraction(9)
    broken = replace(star_instance, distance=tuple(tuple(r) for r in rows))
    problems = validate_instance(broken)
    assert any(p.startswith("symmetry") for p in problems)
    assert any(p.startswith("triangle") for p in problems)

    flat = replace(star_instance, capacities=(CapacityType(1, Fraction(2)), CapacityType(1, Fraction(2))))
    assert any("strictly increasing" in p for p in validate_instance(flat))

    empty = replace(star_instance, capacities=(CapacityType(0, Fraction(2)),))
    assert any("total count" in p for p in validate_instance(empty))
    with pytest.raises(ModelError):
        require_valid(empty)


def test_infinite_distances_are_allowed(mckc_gap3):
    assert validate_instance(mckc_gap3.instance) == []


def test_evaluate_solution_measures_both_factors(star_instance):
    sol = McKcSolution(placements={0: (0,)}, assignment={j: 0 for j in range(4)}, radius_guess=Fraction(1))
    report = evaluate_solution(star_instance, sol, Fraction(1))
    assert report.max_assignment_distance == 1
    assert report.distance_factor == 1
    assert report.capacity_factor == 2
    assert report.feasible_counts
    assert report.per_facility_load == {0: 4}


def test_evaluate_solution_zero_radius(star_instance):
    sol = McKcSolution(placements={0: (1,)}, assignment={j: 0 for j in range(4)}, radius_guess=0)
    assert evaluate_solution(star_instance, sol, 0).distance_factor is INFINITY


def test_evaluate_solution_rejects_malformed(star_instance):
    with pytest.raises(ModelError):
        evaluate_solution(star_instance, McKcSolution({0: (0, 1)}, {j: 0 for j in range(4)}, 1), 1)
    with pytest.raises(ModelError):
        evaluate_solution(star_instance, McKcSolution({0: (1,)}, {0: 0}, 1), 1)
    with pytest.raises(ModelError):
        evaluate_solution(star_instance, McKcSolution({0: (1,)}, {j: 1 for j in range(4)}, 1), 1)


def test_over_placed_counts_are_flagged(star_instance):
    soft = replace(star_instance, soft=True)
    sol = McKcSolution(placements={0: (1, 1)}, assignment={j: 0 for j in range(4)}, radius_guess=1)
    assert not evaluate_solution(soft, sol, 1).feasible_counts


def test_evaluate_allocation_checks_every_rule():
    inst = CckpInstance(machines=(Machine(Fraction(4), 1), Machine(Fraction(2))),
                        job_types=(Fraction(1), Fraction(3)), admissible=(frozenset({1}), frozenset({0, 1})))
    supply = SupplyVector((2, 1))
    good = evaluate_allocation(inst, supply, Allocation.from_lists([[1], [0, 0]]))
    assert good.valid
    assert good.min_ratio == Fraction(3, 4)
    bad = evaluate_allocation(inst, supply, Allocation.from_lists([[0, 1], [1]]))
    kinds = {v.split(":")[0] for v in bad.violations}
    assert kinds == {"supply", "cardinality", "admissibility"}


def test_supply_vector_rejects_negative_counts():
    with pytest.raises(ModelError):
        SupplyVector((1, -1))


# -- oracles -----------------------------------------------------------------------------------

def test_gap_instance_needs_more_than_unit_load(mckc_gap3):
    inst = mckc_gap3.instance
    assert brute_force_mckc(inst, Fraction(1), Fraction(1)) is None
    for b in (Fraction(5, 4), Fraction(3, 2)):
        sol = brute_force_mckc(inst, Fraction(1), b)
        assert sol is not None
        report = evaluate_solution(inst, sol, Fraction(1))
        assert report.distance_factor == 1
        assert report.feasible_counts
        for i, load in report.per_facility_load.items():
            assert load <= math.ceil(b * report.per_facility_capacity[i])


def test_brute_force_mckc_on_star(star_instance):
    sol = brute_force_mckc(star_instance, Fraction(1), Fraction(1))
    assert sol.placements[0] == (1,)
    assert brute_force_mckc(star_instance, Fraction(1, 2), Fraction(1)) is None


def test_brute_force_mckc_guards(star_instance):
    many = line_instance(list(range(11)), [0], [(1, 1)])
    with pytest.raises(GuardExceeded):
        brute_force_mckc(many, 1, 1)
    weighted = replace(star_instance, weights=(Fraction(2),) * 4)
    with pytest.raises(ModelError):
        brute_force_mckc(weighted, 1, 1)


def test_brute_force_cckp_exact_ratio():
    inst = CckpInstance(machines=(Machine(Fraction(4)), Machine(Fraction(4))), job_types=(Fraction(3), Fraction(2)))
    result = brute_force_cckp(inst, SupplyVector((1, 2)))
    assert result.exact
    assert result.ratio == Fraction(3, 4)
    assert evaluate_allocation(inst, SupplyVector((1, 2)), result.allocation).min_ratio == result.ratio


def test_brute_force_cckp_target_pruning():
    inst = CckpInstance(machines=(Machine(Fraction(4)), Machine(Fraction(4))), job_types=(Fraction(3), Fraction(2)))
    assert not brute_force_cckp(inst, SupplyVector((1, 2)), target=Fraction(1)).reached_target
    assert brute_force_cckp(inst, SupplyVector((1, 2)), target=Fraction(1, 2)).reached_target


def test_brute_force_cckp_respects_cardinality(rng):
    for _ in range(20):
        inst, supply = random_cckp(rng, m=3, max_copies=7, n_types=3, cardinality=True)
        result = brute_force_cckp(inst, supply)
        report = evaluate_allocation(inst, supply, result.allocation)
        assert report.valid
        assert report.min_ratio == result.ratio


def test_brute_force_restricted_uses_admissibility():
    inst = CckpInstance(machines=(Machine(Fraction(1)), Machine(Fraction(1))), job_types=(Fraction(1), Fraction(1)),
                        admissible=(frozenset({0}), frozenset({0})))
    result = brute_force_restricted(inst, SupplyVector((1, 1)))
    assert result.ratio == 0
    with pytest.raises(ModelError):
        brute_force_restricted(replace(inst, admissible=None), SupplyVector((1, 1)))

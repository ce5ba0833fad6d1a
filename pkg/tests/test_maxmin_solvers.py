from fractions import Fraction

import pytest

from conftest import random_cckp
from core import Allocation, CckpInstance, Machine, SupplyVector, evaluate_allocation
from logging_config import ModelError
from lp_engine import LpStatus, solve
from maxmin_solvers import (FarkasCertificate, assignment_from_point, assignment_violations, build_assignment_lp,
                            fractional_received, greedy_qcmin, reduce_to_restricted, rounding_loss,
                            shmoys_tardos_round, verify_farkas)


def _two_machines():
    return CckpInstance(machines=(Machine(Fraction(4)), Machine(Fraction(4))), job_types=(Fraction(3),))


def test_greedy_fills_every_machine_to_half():
    inst = _two_machines()
    allocation = greedy_qcmin(inst, SupplyVector((3,)))
    assert isinstance(allocation, Allocation)
    assert allocation.assignment == ((0,), (0,))
    assert evaluate_allocation(inst, SupplyVector((3,)), allocation).min_ratio == Fraction(3, 4)


def test_greedy_returns_a_verified_certificate():
    inst = _two_machines()
    cert = greedy_qcmin(inst, SupplyVector((1,)))
    assert isinstance(cert, FarkasCertificate)
    assert cert.stuck == 1
    assert verify_farkas(inst, SupplyVector((1,)), cert)
    assert solve(build_assignment_lp(inst, (1,), cardinality=False)).status == LpStatus.INFEASIBLE


def test_malformed_certificates_do_not_verify():
    inst = _two_machines()
    assert not verify_farkas(inst, SupplyVector((1,)), FarkasCertificate(alpha=(), beta=(1, 1)))
    assert not verify_farkas(inst, SupplyVector((1,)), FarkasCertificate(alpha=(Fraction(0),), beta=(1, 1)))
    with pytest.raises(ModelError):
        greedy_qcmin(inst, SupplyVector((1, 1)))


@pytest.mark.parametrize("count", [60, pytest.param(1000, marks=pytest.mark.slow)])
def test_greedy_dichotomy_on_random_instances(rng, count):
    for _ in range(count):
        inst, supply = random_cckp(rng, m=int(rng.integers(1, 5)), max_copies=8, n_types=3)
        result = greedy_qcmin(inst, supply)
        if isinstance(result, FarkasCertificate):
            assert verify_farkas(inst, supply, result)
            lp = build_assignment_lp(inst, supply.counts, cardinality=False)
            assert solve(lp).status == LpStatus.INFEASIBLE
        else:
            report = evaluate_allocation(inst, supply, result)
            assert report.valid
            assert report.min_ratio >= Fraction(1, 2)


def test_assignment_lp_truncates_capacities():
    inst = CckpInstance(machines=(Machine(Fraction(2), 1),), job_types=(Fraction(5),))
    system = build_assignment_lp(inst, (1,))
    demand = next(c for c in system.constraints if c.name == "demand[0]")
    assert demand.coeffs == {"z[0,0]": Fraction(2)}
    assert "cardinality[0]" in {c.name for c in system.constraints}
    relaxed = build_assignment_lp(inst, (1,), demands=[Fraction(1)], cardinality=False)
    assert next(c for c in relaxed.constraints if c.name == "demand[0]").rhs == 1


def test_assignment_violations():
    inst = CckpInstance(machines=(Machine(Fraction(4), 1),), job_types=(Fraction(1), Fraction(3)),
                        admissible=(frozenset(), frozenset({0})))
    z = {(0, 0): Fraction(1), (0, 1): Fraction(2)}
    problems = assignment_violations(inst, (1, 1), z, demands=[Fraction(10)])
    assert any("inadmissible" in p for p in problems)
    assert any("above supply" in p for p in problems)
    assert any("above cardinality" in p for p in problems)
    assert any("below 10" in p for p in problems)


@pytest.mark.parametrize("count", [40, pytest.param(500, marks=pytest.mark.slow)])
def test_shmoys_tardos_loses_at_most_one_job(rng, count):
    rounded = 0
    for _ in range(count):
        inst, supply = random_cckp(rng, m=int(rng.integers(1, 4)), max_copies=9, n_types=3, cardinality=True)
        outcome = solve(build_assignment_lp(inst, supply.counts))
        if outcome.status != LpStatus.FEASIBLE:
            continue
        rounded += 1
        z = assignment_from_point(inst, outcome.point)
        allocation = shmoys_tardos_round(inst, supply, z)
        report = evaluate_allocation(inst, supply, allocation)
        assert report.valid
        for i in range(inst.m):
            assert report.received[i] >= fractional_received(inst, z, i) - rounding_loss(inst, z, i)
    assert rounded > 0


def test_shmoys_tardos_rejects_overused_supply():
    inst = _two_machines()
    with pytest.raises(ModelError):
        shmoys_tardos_round(inst, SupplyVector((1,)), {(0, 0): Fraction(1), (1, 0): Fraction(1)})


def test_rounding_exact_halves():
    inst = _two_machines()
    z = {(0, 0): Fraction(1, 2), (1, 0): Fraction(1, 2)}
    allocation = shmoys_tardos_round(inst, SupplyVector((1,)), z)
    assert sorted(len(items) for items in allocation.assignment) == [0, 1]
    assert rounding_loss(inst, z, 0) == 3
    assert rounding_loss(inst, {}, 0) == 0


def test_reduce_to_restricted():
    inst = CckpInstance(machines=(Machine(Fraction(8), 2), Machine(Fraction(4), 2), Machine(Fraction(9))),
                        job_types=(Fraction(1), Fraction(2), Fraction(3)))
    restricted = reduce_to_restricted(inst)
    assert restricted.admissible == (frozenset({1, 2}), frozenset({0, 1, 2}), frozenset({0, 1, 2}))
    assert all(m.cardinality is None for m in restricted.machines)
    assert [m.demand for m in restricted.machines] == [8, 4, 9]

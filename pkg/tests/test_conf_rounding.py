from fractions import Fraction

import pytest

from conf_rounding import (ConfigurationLpSolution, ConfigurationRounder, conf_lp_round, configuration_violations,
                           guarantee_factor, log_ratio)
from core import CckpInstance, Machine, SupplyVector, evaluate_allocation
from gap_instances import gen_conf_gap
from logging_config import ModelError


def _pair(demands=(4, 4), caps=(1, 4)):
    return CckpInstance(machines=tuple(Machine(Fraction(d)) for d in demands),
                        job_types=tuple(Fraction(c) for c in caps))


def test_log_ratio_and_guarantee():
    assert log_ratio(_pair()) == 1.0
    assert log_ratio(_pair(demands=(1, 16))) == 4.0
    assert guarantee_factor(_pair(demands=(4, 8))) == 6.0


def test_configuration_violations():
    inst = CckpInstance(machines=(Machine(Fraction(4), 1),), job_types=(Fraction(1), Fraction(4)))
    sol = ConfigurationLpSolution({(0, (0, 0)): Fraction(1, 2), (0, (1,)): Fraction(1, 4)})
    problems = configuration_violations(inst, (1, 0), sol)
    assert any("above cardinality" in p for p in problems)
    assert any("below 4" in p for p in problems)
    assert any("configuration mass 3/4" in p for p in problems)
    assert any("above supply" in p for p in problems)


def test_integral_point_is_kept():
    inst = _pair(demands=(4,))
    sol = ConfigurationLpSolution({(0, (1,)): Fraction(1)})
    assert conf_lp_round(inst, SupplyVector((2, 1)), sol).assignment == ((1,),)


def test_two_hybrids_in_one_bucket_pivot():
    inst = _pair()
    half = Fraction(1, 2)
    sol = ConfigurationLpSolution({(0, (1,)): half, (0, (0, 0, 0, 0)): half,
                                   (1, (1,)): half, (1, (0, 0, 0, 0)): half})
    rounder = ConfigurationRounder(inst, SupplyVector((4, 1)), sol)
    allocation = rounder.run()
    assert allocation.assignment == ((1,), (0, 0, 0, 0))
    assert rounder.stats["bucket_pivots"] == 1
    assert evaluate_allocation(inst, SupplyVector((4, 1)), allocation).min_ratio == 1


def test_heavy_hybrid_is_matched():
    inst = _pair(demands=(4, 8), caps=(1, 8))
    sol = ConfigurationLpSolution({(0, (1,)): Fraction(3, 4), (0, (0, 0, 0, 0)): Fraction(1, 4),
                                   (1, (0,) * 8): Fraction(1)})
    rounder = ConfigurationRounder(inst, SupplyVector((10, 1)), sol)
    allocation = rounder.run()
    assert allocation.assignment == ((1,), (0,) * 8)
    assert rounder.stats["matched_hybrids"] == 1


def test_light_hybrid_drops_its_large_job():
    inst = _pair(demands=(4, 8), caps=(1, 8))
    supply = SupplyVector((11, 1))
    sol = ConfigurationLpSolution({(0, (1,)): Fraction(1, 4), (0, (0, 0, 0, 0)): Fraction(3, 4),
                                   (1, (0,) * 8): Fraction(1)})
    rounder = ConfigurationRounder(inst, supply, sol)
    allocation = rounder.run()
    assert allocation.assignment == ((0, 0, 0), (0,) * 8)
    assert rounder.stats["dropped_hybrids"] == 1
    report = evaluate_allocation(inst, supply, allocation)
    assert report.valid
    assert report.min_ratio >= 1 / Fraction(guarantee_factor(inst))


def test_rejects_bad_input():
    inst = _pair()
    sol = ConfigurationLpSolution({(0, (1,)): Fraction(1), (1, (1,)): Fraction(1, 2)})
    with pytest.raises(ModelError):
        conf_lp_round(inst, SupplyVector((4, 2)), sol)
    with pytest.raises(ModelError):
        conf_lp_round(inst, SupplyVector((4,)), sol)
    restricted = CckpInstance(machines=inst.machines, job_types=inst.job_types,
                              admissible=(frozenset({0, 1}), frozenset({0, 1})))
    with pytest.raises(ModelError):
        conf_lp_round(restricted, SupplyVector((4, 2)), sol)


def test_gap_witness_rounds_with_a_third_lost():
    gap = gen_conf_gap(3)
    allocation = conf_lp_round(gap.instance, gap.supply, gap.witness)
    report = evaluate_allocation(gap.instance, gap.supply, allocation)
    assert report.valid
    ratios = [report.received[i] / gap.instance.demand(i) for i in range(gap.instance.m)]
    assert min(ratios) <= Fraction(1, 3)
    assert ratios[3] == Fraction(1, 3)
    # M_1 drops its big job and the residual LP hands it every remaining small copy
    assert ratios[1] == Fraction(35, 81)
    assert report.min_ratio >= 1 / Fraction(guarantee_factor(gap.instance))


def test_small_machine_keeps_residual_demand_after_matching():
    # job 1 is large for machine 0 and small for machine 1, which holds eight copies in one configuration
    inst = CckpInstance(machines=(Machine(Fraction(1)), Machine(Fraction(16))),
                        job_types=(Fraction(1, 16), Fraction(1), Fraction(9, 8)))
    supply = SupplyVector((4, 5, 12))
    sol = ConfigurationLpSolution({(0, (1,)): Fraction(3, 4), (0, (0,) * 16): Fraction(1, 4),
                                   (1, (1,) * 8 + (2,) * 8): Fraction(1, 2), (1, (2,) * 16): Fraction(1, 2)})
    rounder = ConfigurationRounder(inst, supply, sol)
    assert rounder.residual_demand(1) == Fraction(8, 3)
    allocation = rounder.run()
    assert rounder.stats["matched_hybrids"] == 1
    assert rounder.stats["residual_lp"] == "FEASIBLE"
    assert allocation.assignment == ((1,), (0,) * 4 + (1,) * 4 + (2,) * 12)
    report = evaluate_allocation(inst, supply, allocation)
    assert report.valid
    assert report.min_ratio >= 1


def _committed_instance(rng):
    """Two feasible allocations averaged into a configuration point; the supply is the larger usage per type."""
    m = int(rng.integers(1, 5))
    demands = [Fraction(int(d)) for d in rng.integers(1, 65, size=m)]
    caps = sorted({int(c) for c in rng.integers(1, 17, size=int(rng.integers(2, 5)))})
    endpoints = []
    for _ in range(2):
        lists = []
        for d in demands:
            items, total = [], 0
            while total < d:
                j = int(rng.integers(0, len(caps)))
                items.append(j)
                total += caps[j]
            lists.append(tuple(sorted(items)))
        endpoints.append(lists)
    machines = []
    for i, d in enumerate(demands):
        longest = max(len(endpoints[0][i]), len(endpoints[1][i]))
        machines.append(Machine(d, longest if rng.random() < 0.5 else None))
    inst = CckpInstance(machines=tuple(machines), job_types=tuple(Fraction(c) for c in caps))
    supply = SupplyVector(tuple(max(sum(S.count(j) for S in lists) for lists in endpoints)
                                for j in range(len(caps))))
    z = {}
    for i in range(m):
        for lists in endpoints:
            z[(i, lists[i])] = z.get((i, lists[i]), Fraction(0)) + Fraction(1, 2)
    return inst, supply, ConfigurationLpSolution(z)


@pytest.mark.slow
def test_random_committed_points_meet_the_guarantee(rng):
    for _ in range(100):
        inst, supply, sol = _committed_instance(rng)
        allocation = conf_lp_round(inst, supply, sol)
        report = evaluate_allocation(inst, supply, allocation)
        assert report.valid, report.violations
        factor = guarantee_factor(inst)
        for i in range(inst.m):
            assert report.received[i] * factor >= inst.demand(i) * (1 - 1e-9)

from dataclasses import replace
from fractions import Fraction

import pytest

from config import Backend, Mode, PipelineConfig, default_config
from conftest import line_instance, random_line_instance
from gap_instances import gen_mckc_gap
from logging_config import ContractViolation, InstanceInfeasible, ModelError
from oracles import brute_force_mckc
import pipeline
from pipeline import McKcPipeline, guess_opt, solve_at_radius
from reporting import RunTrace


def _config(mode, backend=Backend.GREEDY, **pipeline):
    return replace(default_config, pipeline=PipelineConfig(mode=mode, cckp_backend=backend, **pipeline))


def test_soft_star_finds_the_optimal_radius(star_instance):
    inst = replace(star_instance, soft=True)
    result = guess_opt(inst, _config(Mode.STRONG_SOFT))
    assert result.radius == 1
    assert result.solution.placements == {0: (1,)}
    assert set(result.solution.assignment.values()) == {0}
    assert result.report.capacity_factor == 1
    assert result.report.distance_factor == 1
    assert result.cuts == 0
    assert result.hops == 1
    assert result.hops <= result.hop_budget
    assert result.attempts[1] == "ok"


def test_hard_star_with_supply_cuts(star_instance):
    result = solve_at_radius(star_instance, 1, _config(Mode.STRONG_HARD, Backend.BRUTE))
    assert result.cuts == 0
    assert result.solution.placements == {0: (1,)}
    assert result.report.feasible_counts


def test_strong_matching_longer_than_the_hop_budget_is_rejected(star_instance, monkeypatch):
    inst = replace(star_instance, soft=True)
    monkeypatch.setattr(pipeline, "matched_hops", lambda g, assignment: 10 ** 6)
    with pytest.raises(ContractViolation, match="hops above the budget"):
        solve_at_radius(inst, 1, _config(Mode.STRONG_SOFT))


def test_weak_mode_on_the_path(path_instance):
    result = solve_at_radius(path_instance, 1, _config(Mode.WEAK, Backend.BRUTE))
    assert result.solution.placements == {0: (1,), 1: (0,), 2: (0,)}
    assert result.hop_budget == 19
    assert result.report.distance_factor <= 19
    assert result.report.capacity_factor <= result.capacity_budget


def test_soft_gap_is_solved_with_bounded_violation():
    gap = gen_mckc_gap(3, soft=True)
    result = solve_at_radius(gap.instance, 1, _config(Mode.STRONG_SOFT))
    assert result.report.capacity_factor <= Fraction(5, 2)
    assert result.report.feasible_counts


def test_mode_and_backend_must_fit_the_instance(star_instance):
    with pytest.raises(ModelError):
        McKcPipeline(star_instance, _config(Mode.STRONG_SOFT, Backend.BRUTE))
    with pytest.raises(ModelError):
        McKcPipeline(star_instance, _config(Mode.WEAK, Backend.GREEDY))
    with pytest.raises(ModelError):
        McKcPipeline(star_instance, _config(Mode.WEAK, Backend.BRUTE, delta=1.5))


def test_not_enough_capacity_anywhere():
    inst = line_instance([0], [1, 1, 1, 1], [(1, 1)], soft=True)
    trace = RunTrace()
    with pytest.raises(InstanceInfeasible):
        guess_opt(inst, _config(Mode.STRONG_SOFT), trace)
    assert trace.of_kind("failure")


def test_trace_records_radius_and_report(star_instance):
    trace = RunTrace()
    solve_at_radius(replace(star_instance, soft=True), 1, _config(Mode.STRONG_SOFT), trace)
    assert trace.of_kind("radius")[0]["mode"] == "strong-soft"
    assert trace.of_kind("report")[0]["cuts"] == 0


@pytest.mark.slow
def test_random_soft_instances_stay_below_opt(rng):
    config = _config(Mode.STRONG_SOFT)
    bound = 2 + config.pipeline.delta + Fraction(1, 100)
    for _ in range(50):
        inst = random_line_instance(rng, n_facilities=int(rng.integers(1, 5)), n_clients=int(rng.integers(1, 7)),
                                    n_types=2, soft=True)
        opt = next(r for r in inst.candidate_radii() if brute_force_mckc(inst, r, 1) is not None)
        result = guess_opt(inst, config)
        assert result.radius <= opt
        assert result.report.capacity_factor <= bound
        assert result.report.distance_factor <= result.hop_budget
        assert result.report.feasible_counts
        assert result.cuts == 0

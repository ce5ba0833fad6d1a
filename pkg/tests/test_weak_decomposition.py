from fractions import Fraction

import pytest

from conftest import line_instance, random_line_instance
from logging_config import FailureKind, InfeasibleRadius, ModelError
from threshold_graph import build
from weak_decomposition import decompose, diameter_bound, horizon_bound, to_cckp, weak_violations


def test_path_splits_into_one_ball_and_a_boundary(path_instance):
    g = build(path_instance, Fraction(1))
    w = decompose(g, Fraction(1, 2))
    assert len(w.parts) == 1
    part = w.parts[0]
    assert part.seed == 0
    assert part.horizon == 6
    assert part.clients == frozenset({0, 1, 2})
    assert part.facilities == frozenset({0, 1, 2, 3})
    assert w.deleted == frozenset({3})
    assert w.charge[3] == {0: Fraction(1, 3), 1: Fraction(1, 3), 2: Fraction(1, 3)}
    assert weak_violations(g, w) == []


def test_far_apart_groups_become_separate_parts():
    inst = line_instance([0, 20], [0, 1, 20, 21], [(2, 2)])
    w = decompose(build(inst, Fraction(1)), Fraction(1, 2))
    assert [sorted(p.clients) for p in w.parts] == [[0, 1], [2, 3]]
    assert w.deleted == frozenset()


def test_uncovered_client_is_certified(star_instance):
    with pytest.raises(InfeasibleRadius) as err:
        decompose(build(star_instance, Fraction(1, 2)), Fraction(1, 2))
    assert err.value.kind == FailureKind.UNCOVERED_CLIENT


def test_epsilon_range(path_instance):
    with pytest.raises(ModelError):
        decompose(build(path_instance, 1), 0)
    with pytest.raises(ModelError):
        decompose(build(path_instance, 1), Fraction(3, 2))


def test_violations_are_reported(path_instance):
    g = build(path_instance, Fraction(1))
    w = decompose(g, Fraction(1, 2))
    w.charge[3] = {0: Fraction(1)}
    problems = weak_violations(g, w)
    assert any("above" in p for p in problems)


def test_bounds():
    assert horizon_bound(1, Fraction(1, 2)) == 2
    assert horizon_bound(10, Fraction(1, 2)) % 2 == 0
    assert diameter_bound(10, Fraction(1, 2)) == 2 * (horizon_bound(10, Fraction(1, 2)) - 1)


def test_to_cckp_machines(path_instance):
    w = decompose(build(path_instance, Fraction(1)), Fraction(1, 2))
    cckp, supply = to_cckp(w, path_instance, gamma=2)
    assert cckp.machines[0].demand == Fraction(3, 2)
    assert cckp.machines[0].cardinality == 4
    assert supply.counts == (2, 1)
    soft, _ = to_cckp(w, path_instance, soft=True)
    assert soft.machines[0].cardinality is None


def test_random_instances_satisfy_every_invariant(rng):
    for _ in range(40):
        inst = random_line_instance(rng, n_facilities=int(rng.integers(1, 7)), n_clients=int(rng.integers(1, 12)),
                                    n_types=2, soft=False)
        radius = inst.candidate_radii()[-1]
        g = build(inst, radius)
        for epsilon in (Fraction(1, 4), Fraction(1, 2), Fraction(1)):
            w = decompose(g, epsilon)
            assert weak_violations(g, w) == []
            covered = set().union(*(p.clients for p in w.parts)) | w.deleted
            assert covered == set(range(inst.n_clients))
            for j, row in w.charge.items():
                assert sum(row.values()) == 1

from fractions import Fraction

import pytest

from conftest import line_instance
from helper import INFINITY
from logging_config import ModelError
from threshold_graph import C, F, build, hop_diameter, layered_neighborhood


def test_edges_follow_the_radius(path_instance):
    g = build(path_instance, Fraction(1))
    # facilities at 0,2,4,6 and clients at 1,3,5,7 form a path
    assert g.n_edges() == 7
    assert g.facility_neighbors(0) == [0, 1]
    assert g.client_neighbors(3) == [2, 3]
    assert build(path_instance, Fraction(1, 2)).n_edges() == 0


def test_isolated_clients(star_instance):
    assert build(star_instance, Fraction(1)).isolated_clients() == []
    assert build(star_instance, Fraction(1, 2)).isolated_clients() == [0, 1, 2, 3]


def test_hop_distances_and_diameter(path_instance):
    g = build(path_instance, Fraction(1))
    assert g.hop_distance(F(0), F(3)) == 6
    assert g.hop_distance(C(0), C(3)) == 6
    assert hop_diameter(g, [F(0), F(1), F(2)]) == 4
    far = line_instance([0, 10], [0, 10], [(2, 1)])
    split = build(far, Fraction(1))
    assert split.hop_diameter([F(0), F(1)]) is INFINITY
    assert split.multi_source_distance([F(0)], C(1)) is INFINITY
    with pytest.raises(ModelError):
        split.hop_diameter([])


def test_layered_neighborhood_levels(path_instance):
    g = build(path_instance, Fraction(1))
    inside, boundary = layered_neighborhood(g, C(0), 2)
    assert inside == {C(0), F(0), F(1)}
    assert boundary == {C(1)}


def test_fork_masks_are_private(path_instance):
    g = build(path_instance, Fraction(1))
    h = g.fork()
    h.delete([F(1)])
    assert not h.is_alive(F(1))
    assert g.is_alive(F(1))
    inside, boundary = h.layered_neighborhood(C(0), 2)
    assert boundary == set()
    assert C(1) not in inside
    # hop distances always refer to the full graph
    assert h.hop_distance(C(0), C(1)) == 2
    with pytest.raises(ModelError):
        h.layered_neighborhood(F(1), 2)

from fractions import Fraction

import pytest

from lp_engine import (EQ, GE, LE, Constraint, Cut, AggregateVariable, CutStatus, LinearSystem, LpStatus,
                       cutting_plane_solve, dump_lp, solve, verify_certificate)
from logging_config import ContractViolation, LpError


def _two_by_two(exact=None):
    system = LinearSystem(exact=exact)
    system.add_variable("x")
    system.add_variable("y")
    system.add_constraint({"x": 1, "y": 2}, LE, 4, name="first")
    system.add_constraint({"x": 3, "y": 1}, LE, 6, name="second")
    system.set_objective({"x": 1, "y": 1}, maximize=True)
    return system


def test_exact_optimum_is_rational():
    outcome = solve(_two_by_two())
    assert outcome.status == LpStatus.FEASIBLE
    assert outcome.point["x"] == Fraction(8, 5)
    assert outcome.point["y"] == Fraction(6, 5)
    assert outcome.objective == Fraction(14, 5)


def test_float_mode_matches_exact_mode():
    outcome = solve(_two_by_two(exact=False))
    assert outcome.feasible
    assert outcome.objective == pytest.approx(2.8)


def test_infeasible_system_carries_certificate():
    system = LinearSystem()
    system.add_variable("x")
    system.add_constraint({"x": 1}, GE, 2)
    system.add_constraint({"x": 1}, LE, 1)
    outcome = solve(system)
    assert outcome.status == LpStatus.INFEASIBLE
    assert outcome.certificate is not None
    assert verify_certificate(system, outcome.certificate)


def test_equality_rows_and_bounds():
    system = LinearSystem()
    system.add_variable("a", lower=1, upper=3)
    system.add_variable("b")
    system.add_constraint({"a": 1, "b": 1}, EQ, 5)
    system.set_objective({"b": 1})
    outcome = solve(system)
    assert outcome.point["a"] == 3
    assert outcome.point["b"] == 2


def test_unbounded_objective():
    system = LinearSystem()
    system.add_variable("x")
    system.set_objective({"x": 1}, maximize=True)
    assert solve(system).status == LpStatus.UNBOUNDED


def test_malformed_systems_are_rejected():
    system = LinearSystem()
    system.add_variable("x")
    with pytest.raises(LpError):
        system.add_variable("x")
    with pytest.raises(LpError):
        system.add_constraint({"z": 1}, LE, 1)
    with pytest.raises(LpError):
        system.add_constraint({"x": 1}, "<", 1)


def _box(upper=10):
    system = LinearSystem()
    system.add_variable("x", upper=upper)
    system.set_objective({"x": 1}, maximize=True)
    return system


def test_cutting_planes_accept_after_one_cut():
    def separate(point):
        if point["x"] > 3:
            return Constraint({"x": 1}, LE, 3, name="cap")
        return None

    result = cutting_plane_solve(_box(), separate, max_rounds=5)
    assert result.status == CutStatus.ACCEPTED
    assert result.outcome.point["x"] == 3
    assert len(result.cuts) == 1
    assert result.rounds == 1


def test_cut_over_aggregate_variable():
    system = _box()
    system.add_variable("w", upper=10)
    system.set_objective({"x": 1, "w": 1}, maximize=True)

    def separate(point):
        if point["x"] + point["w"] > 5:
            return Cut(Constraint({"S": 1}, LE, 5, name="sum"), [AggregateVariable("S", {"x": 1, "w": 1})])
        return None

    result = cutting_plane_solve(system, separate, max_rounds=3)
    assert result.status == CutStatus.ACCEPTED
    assert result.outcome.objective == 5


def test_satisfied_cut_is_a_contract_violation():
    with pytest.raises(ContractViolation):
        cutting_plane_solve(_box(), lambda point: Constraint({"x": 1}, LE, 100), max_rounds=3)


def test_cut_limit():
    result = cutting_plane_solve(_box(), lambda point: Constraint({"x": 1}, LE, point["x"] - 1), max_rounds=2)
    assert result.status == CutStatus.CUT_LIMIT
    assert len(result.cuts) == 2


def test_cuts_can_prove_infeasibility():
    system = LinearSystem()
    system.add_variable("x", upper=10)
    system.add_constraint({"x": 1}, GE, 4)

    def separate(point):
        return Constraint({"x": 1}, LE, 2, name="too_small")

    result = cutting_plane_solve(system, separate, max_rounds=3)
    assert result.status == CutStatus.INFEASIBLE
    assert len(result.cuts) == 1


def test_dump_lp_grammar():
    text = dump_lp(_two_by_two())
    lines = text.splitlines()
    assert lines[1] == "maximize"
    assert lines[2] == " obj: 1 x + 1 y"
    assert " first: 1 x + 2 y <= 4" in lines
    assert " 0 <= x <= inf" in lines
    assert lines[-1] == "end"

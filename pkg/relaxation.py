"""The assignment LP relaxation over a threshold graph and its fractional points."""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from config import LpConfig, default_config
from core import MckcInstance
from helper import NumericHelper
from logging_config import ModelError, get_logger, log_exceptions
from lp_engine import GE, LE, LinearSystem, LpOutcome, LpStatus, solve
from threshold_graph import ThresholdGraph

logger = get_logger(__name__)

# y entries below this are treated as closed
Y_FLOOR = 1e-12


def y_name(i: int, p: int) -> str:
    return f"y[{i},{p}]"


def x_name(i: int, j: int, p: int) -> str:
    return f"x[{i},{j},{p}]"


@dataclass
class FractionalSolution:
    y: Dict[Tuple[int, int], Any]
    x: Dict[Tuple[int, int, int], Any]
    radius: Any
    served_by: Dict[int, List[Tuple[int, int]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.served_by:
            for (i, j, p), value in self.x.items():
                if value > 0:
                    self.served_by.setdefault(j, []).append((i, p))

    def y_of(self, i: int, p: int) -> Any:
        return self.y.get((i, p), 0)

    def x_of(self, i: int, j: int, p: int) -> Any:
        return self.x.get((i, j, p), 0)

    def type_mass(self, facilities, n_types: int) -> List[Any]:
        mass = [Fraction(0)] * n_types
        for (i, p), value in self.y.items():
            if i in facilities:
                mass[p] = mass[p] + value
        return mass


def build_relaxation(inst: MckcInstance, g: ThresholdGraph, soft: Optional[bool] = None,
                     with_cardinality: Optional[bool] = None, exact: Optional[bool] = None) -> LinearSystem:
    """Coverage, weighted capacity, type counts, x <= y and (hard only) one type per location.

    x variables exist only on threshold-graph edges.
    """
    soft = inst.soft if soft is None else soft
    with_cardinality = (not soft) if with_cardinality is None else with_cardinality
    system = LinearSystem(exact=exact)
    for i in range(inst.n_facilities):
        for p in range(inst.n_types):
            system.add_variable(y_name(i, p), lower=0, upper=None)
    for j in range(inst.n_clients):
        for i in g.facility_neighbors(j):
            for p in range(inst.n_types):
                system.add_variable(x_name(i, j, p), lower=0, upper=None)

    for j in range(inst.n_clients):
        cover = {x_name(i, j, p): 1 for i in g.facility_neighbors(j) for p in range(inst.n_types)}
        system.add_constraint(cover, GE, 1, name=f"cover[{j}]")
    for i in range(inst.n_facilities):
        clients = g.client_neighbors(i)
        for p in range(inst.n_types):
            load = {x_name(i, j, p): inst.weights[j] for j in clients}
            load[y_name(i, p)] = -inst.cap(p)
            system.add_constraint(load, LE, 0, name=f"capacity[{i},{p}]")
    for p in range(inst.n_types):
        system.add_constraint({y_name(i, p): 1 for i in range(inst.n_facilities)}, LE, inst.count(p),
                              name=f"count[{p}]")
    for j in range(inst.n_clients):
        for i in g.facility_neighbors(j):
            for p in range(inst.n_types):
                system.add_constraint({x_name(i, j, p): 1, y_name(i, p): -1}, LE, 0, name=f"open[{i},{j},{p}]")
    if with_cardinality:
        for i in range(inst.n_facilities):
            system.add_constraint({y_name(i, p): 1 for p in range(inst.n_types)}, LE, 1, name=f"single[{i}]")
    return system


def point_to_fractional(inst: MckcInstance, g: ThresholdGraph, point: Dict[str, Any]) -> FractionalSolution:
    y = {}
    for i in range(inst.n_facilities):
        for p in range(inst.n_types):
            value = point[y_name(i, p)]
            if not NumericHelper.is_exact(value) and value < Y_FLOOR:
                continue
            if value > 0:
                y[(i, p)] = value
    x = {}
    for j in range(inst.n_clients):
        for i in g.facility_neighbors(j):
            for p in range(inst.n_types):
                value = point[x_name(i, j, p)]
                if (i, p) in y and value > 0 and (NumericHelper.is_exact(value) or value >= Y_FLOOR):
                    x[(i, j, p)] = min(value, y[(i, p)])
    return FractionalSolution(y=y, x=x, radius=g.radius)


@log_exceptions
def solve_relaxation(inst: MckcInstance, g: ThresholdGraph, config: Optional[LpConfig] = None,
                     soft: Optional[bool] = None) -> Tuple[Optional[FractionalSolution], LpOutcome]:
    config = config or default_config.lp
    system = build_relaxation(inst, g, soft=soft)
    outcome = solve(system, config)
    if outcome.status != LpStatus.FEASIBLE:
        logger.info(f"Relaxation infeasible at radius {g.radius}")
        return None, outcome
    return point_to_fractional(inst, g, outcome.point), outcome


def fractional_violations(inst: MckcInstance, g: ThresholdGraph, frac: FractionalSolution,
                          soft: Optional[bool] = None, tol: float = 1e-7) -> List[str]:
    soft = inst.soft if soft is None else soft
    problems: List[str] = []

    def slack(value: Any) -> Any:
        return 0 if NumericHelper.is_exact(value) else tol

    for (i, j, p), value in frac.x.items():
        if value < 0:
            problems.append(f"x[{i},{j},{p}] negative")
        if value > frac.y_of(i, p) + slack(value):
            problems.append(f"x[{i},{j},{p}] above y[{i},{p}]")
        if not NumericHelper.leq(inst.dist(i, j), g.radius):
            problems.append(f"x[{i},{j},{p}] uses a pair beyond the radius")
    for (i, p), value in frac.y.items():
        if value < 0:
            problems.append(f"y[{i},{p}] negative")
    coverage: Dict[int, Any] = {}
    load: Dict[Tuple[int, int], Any] = {}
    for (i, j, p), value in frac.x.items():
        coverage[j] = coverage.get(j, 0) + value
        load[(i, p)] = load.get((i, p), 0) + inst.weights[j] * value
    for j in range(inst.n_clients):
        total = coverage.get(j, 0)
        if total < 1 - slack(total):
            problems.append(f"client {j} covered {total} < 1")
    for (i, p), total in load.items():
        limit = inst.cap(p) * frac.y_of(i, p)
        if total > limit + slack(total) * max(1, abs(limit)):
            problems.append(f"location {i} type {p} serves {total} above {limit}")
    for p in range(inst.n_types):
        total = sum((v for (i, q), v in frac.y.items() if q == p), Fraction(0))
        if total > inst.count(p) + slack(total):
            problems.append(f"type {p} opened {total} above count {inst.count(p)}")
    if not soft:
        per_location: Dict[int, Any] = {}
        for (i, p), value in frac.y.items():
            per_location[i] = per_location.get(i, 0) + value
        for i, total in per_location.items():
            if total > 1 + slack(total):
                problems.append(f"location {i} opened {total} above 1")
    return problems


def require_feasible(inst: MckcInstance, g: ThresholdGraph, frac: FractionalSolution,
                     soft: Optional[bool] = None) -> FractionalSolution:
    problems = fractional_violations(inst, g, frac, soft=soft)
    if problems:
        raise ModelError("Fractional point infeasible: " + "; ".join(problems[:5]))
    return frac

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

from helper import INFINITY, NumericHelper
from logging_config import ModelError, get_logger, log_exceptions

logger = get_logger(__name__)


@dataclass(frozen=True)
class CapacityType:
    count: int
    capacity: Any


@dataclass(frozen=True)
class MckcInstance:
    """Metric over facilities and clients plus a heterogeneous capacity profile.

    Points are indexed facilities first, then clients: facility i is point i,
    client j is point n_facilities + j. Solutions refer to facilities and
    clients by index; the ids are kept for I/O.
    """

    facilities: Tuple[Any, ...]
    clients: Tuple[Any, ...]
    distance: Tuple[Tuple[Any, ...], ...]
    weights: Tuple[Any, ...]
    capacities: Tuple[CapacityType, ...]
    soft: bool = False

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @property
    def n_types(self) -> int:
        return len(self.capacities)

    def client_point(self, j: int) -> int:
        return self.n_facilities + j

    def dist(self, i: int, j: int) -> Any:
        """Distance between facility i and client j."""
        return self.distance[i][self.n_facilities + j]

    def cap(self, p: int) -> Any:
        return self.capacities[p].capacity

    def count(self, p: int) -> int:
        return self.capacities[p].count

    def total_weight(self) -> Any:
        return NumericHelper.exact_sum(self.weights)

    def candidate_radii(self) -> List[Any]:
        radii = set()
        for i in range(self.n_facilities):
            for j in range(self.n_clients):
                d = self.dist(i, j)
                if d is not INFINITY:
                    radii.add(d)
        return sorted(radii)


@dataclass(frozen=True)
class Machine:
    demand: Any
    cardinality: Optional[int] = None  # None is unbounded

    def allows(self, n_jobs: int) -> bool:
        return self.cardinality is None or n_jobs <= self.cardinality


@dataclass(frozen=True)
class CckpInstance:
    """Machines with demands and cardinalities, job types by capacity.

    `admissible`, when present, lists for each job type the machines it may be
    given to (restricted assignment); None means every job fits everywhere.
    """

    machines: Tuple[Machine, ...]
    job_types: Tuple[Any, ...]
    admissible: Optional[Tuple[FrozenSet[int], ...]] = None

    @property
    def m(self) -> int:
        return len(self.machines)

    @property
    def n(self) -> int:
        return len(self.job_types)

    def demand(self, i: int) -> Any:
        return self.machines[i].demand

    def is_qcmin(self) -> bool:
        return all(machine.cardinality is None for machine in self.machines)

    def is_admissible(self, i: int, j: int) -> bool:
        return self.admissible is None or i in self.admissible[j]

    def ascending_types(self) -> List[int]:
        return sorted(range(self.n), key=lambda j: (self.job_types[j], j))

    def demand_ratio(self) -> Any:
        demands = [machine.demand for machine in self.machines]
        return max(demands) / min(demands)


@dataclass(frozen=True)
class SupplyVector:
    counts: Tuple[int, ...]

    def __post_init__(self):
        for c in self.counts:
            if isinstance(c, bool) or int(c) != c or c < 0:
                raise ModelError(f"Supply counts must be nonnegative integers, got {c!r}")

    def total(self) -> int:
        return int(sum(self.counts))


@dataclass(frozen=True)
class Allocation:
    """Per machine, the sorted multiset of job-type indices it receives."""

    assignment: Tuple[Tuple[int, ...], ...]

    @staticmethod
    def from_lists(lists: Sequence[Sequence[int]]) -> "Allocation":
        return Allocation(tuple(tuple(sorted(items)) for items in lists))

    def received(self, inst: CckpInstance, i: int) -> Any:
        return sum((inst.job_types[j] for j in self.assignment[i]), Fraction(0))

    def usage(self, n_types: int) -> List[int]:
        used = [0] * n_types
        for items in self.assignment:
            for j in items:
                used[j] += 1
        return used


@dataclass(frozen=True)
class AllocationReport:
    received: Tuple[Any, ...]
    min_ratio: Any
    violations: Tuple[str, ...]

    @property
    def valid(self) -> bool:
        return not self.violations


@dataclass
class McKcSolution:
    """Placements map a facility index to the tuple of capacity types there
    (exactly one in hard mode); assignment maps client index to facility index."""

    placements: Dict[int, Tuple[int, ...]]
    assignment: Dict[int, int]
    radius_guess: Any

    def placed_counts(self, n_types: int) -> List[int]:
        counts = [0] * n_types
        for types in self.placements.values():
            for p in types:
                counts[p] += 1
        return counts


@dataclass
class QualityReport:
    max_assignment_distance: Any
    per_facility_load: Dict[int, Any]
    distance_factor: Any
    capacity_factor: Any
    feasible_counts: bool
    per_facility_capacity: Dict[int, Any] = field(default_factory=dict)


@log_exceptions
def validate_instance(inst: MckcInstance) -> List[str]:
    violations: List[str] = []
    n_points = inst.n_facilities + inst.n_clients
    if inst.n_facilities == 0:
        violations.append("facilities: at least one facility required")
    if len(inst.distance) != n_points or any(len(row) != n_points for row in inst.distance):
        violations.append(f"shape: distance matrix must be {n_points}x{n_points}")
        return violations
    if len(inst.weights) != inst.n_clients:
        violations.append("weights: one weight per client required")
    for j, w in enumerate(inst.weights):
        if w is INFINITY or not w > 0:
            violations.append(f"weights: client {inst.clients[j]!r} has nonpositive weight {w!r}")

    d = inst.distance
    for a in range(n_points):
        if d[a][a] is INFINITY or not NumericHelper.is_zero(d[a][a]):
            violations.append(f"diagonal: distance({a},{a}) = {d[a][a]!r} is not 0")
        for b in range(a + 1, n_points):
            if d[a][b] is not INFINITY and d[a][b] < -NumericHelper.tolerance(d[a][b]):
                violations.append(f"nonnegativity: distance({a},{b}) = {d[a][b]!r}")
            same = (d[a][b] is INFINITY and d[b][a] is INFINITY) or (
                d[a][b] is not INFINITY and d[b][a] is not INFINITY
                and NumericHelper.is_zero(d[a][b] - d[b][a]))
            if not same:
                violations.append(f"symmetry: distance({a},{b}) != distance({b},{a})")

    for a in range(n_points):
        for b in range(n_points):
            if d[a][b] is INFINITY:
                continue
            for c in range(n_points):
                if d[b][c] is INFINITY:
                    continue
                if not NumericHelper.leq(d[a][c], d[a][b] + d[b][c]):
                    violations.append(f"triangle: distance({a},{c}) > distance({a},{b}) + distance({b},{c})")

    if not inst.capacities:
        violations.append("capacities: empty capacity profile")
    previous = None
    for p, ctype in enumerate(inst.capacities):
        if isinstance(ctype.count, bool) or int(ctype.count) != ctype.count or ctype.count < 0:
            violations.append(f"capacities: count of type {p} must be a nonnegative integer")
        if not ctype.capacity > 0:
            violations.append(f"capacities: capacity of type {p} must be positive")
        if previous is not None and not ctype.capacity > previous:
            violations.append(f"capacities: profile not strictly increasing at type {p}")
        previous = ctype.capacity
    if sum(c.count for c in inst.capacities) < 1:
        violations.append("capacities: total count must be at least 1")

    if violations:
        logger.debug(f"Instance has {len(violations)} violations, first: {violations[0]}")
    return violations


def require_valid(inst: MckcInstance) -> MckcInstance:
    violations = validate_instance(inst)
    if violations:
        raise ModelError("; ".join(violations[:5]))
    return inst


@log_exceptions
def evaluate_solution(inst: MckcInstance, sol: McKcSolution, reference_radius: Any) -> QualityReport:
    for i, types in sol.placements.items():
        if not 0 <= i < inst.n_facilities:
            raise ModelError(f"Placement at unknown facility index {i}")
        if not types:
            raise ModelError(f"Empty placement at facility {inst.facilities[i]!r}")
        if not inst.soft and len(types) > 1:
            raise ModelError(f"Hard capacities allow one capacity per location, {inst.facilities[i]!r} has {len(types)}")
        for p in types:
            if not 0 <= p < inst.n_types:
                raise ModelError(f"Unknown capacity type {p} at {inst.facilities[i]!r}")

    loads: Dict[int, Any] = {i: Fraction(0) for i in sol.placements}
    max_distance: Any = Fraction(0)
    for j in range(inst.n_clients):
        if j not in sol.assignment:
            raise ModelError(f"Client {inst.clients[j]!r} is not assigned")
        i = sol.assignment[j]
        if i not in sol.placements:
            raise ModelError(f"Client {inst.clients[j]!r} assigned to unplaced location {i}")
        loads[i] = loads[i] + inst.weights[j]
        max_distance = max(max_distance, inst.dist(i, j))

    capacity: Dict[int, Any] = {}
    b: Any = Fraction(0)
    for i, types in sol.placements.items():
        capacity[i] = sum((inst.cap(p) for p in types), Fraction(0))
        b = max(b, loads[i] / capacity[i])

    counts = sol.placed_counts(inst.n_types)
    feasible_counts = all(counts[p] <= inst.count(p) for p in range(inst.n_types))

    if max_distance is INFINITY:
        a = INFINITY
    elif NumericHelper.is_zero(reference_radius):
        a = Fraction(0) if NumericHelper.is_zero(max_distance) else INFINITY
    else:
        a = max_distance / reference_radius

    return QualityReport(
        max_assignment_distance=max_distance,
        per_facility_load=loads,
        distance_factor=a,
        capacity_factor=b,
        feasible_counts=feasible_counts,
        per_facility_capacity=capacity,
    )


@log_exceptions
def evaluate_allocation(inst: CckpInstance, supply: SupplyVector, allocation: Allocation) -> AllocationReport:
    violations: List[str] = []
    if len(allocation.assignment) != inst.m:
        raise ModelError(f"Allocation covers {len(allocation.assignment)} machines, instance has {inst.m}")
    usage = allocation.usage(inst.n)
    for j in range(inst.n):
        if usage[j] > supply.counts[j]:
            violations.append(f"supply: job type {j} used {usage[j]} times, supply {supply.counts[j]}")
    received = []
    ratio: Any = None
    for i, machine in enumerate(inst.machines):
        items = allocation.assignment[i]
        if not machine.allows(len(items)):
            violations.append(f"cardinality: machine {i} receives {len(items)} > {machine.cardinality}")
        for j in items:
            if not inst.is_admissible(i, j):
                violations.append(f"admissibility: job type {j} not allowed on machine {i}")
        got = allocation.received(inst, i)
        received.append(got)
        r = got / machine.demand
        ratio = r if ratio is None else min(ratio, r)
    return AllocationReport(tuple(received), ratio if ratio is not None else INFINITY, tuple(violations))

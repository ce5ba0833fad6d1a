"""Region growing into complete neighborhoods plus a deletable boundary."""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from core import CckpInstance, Machine, MckcInstance, SupplyVector
from helper import INFINITY, NumericHelper
from logging_config import (DecompositionError, FailureKind, InfeasibleRadius, ModelError, get_logger,
                            log_exceptions)
from threshold_graph import C, F, ThresholdGraph, is_client, is_facility

logger = get_logger(__name__)


@dataclass(frozen=True)
class WeakPart:
    facilities: FrozenSet[int]
    clients: FrozenSet[int]
    seed: int
    horizon: int
    # clients cut off at the boundary of this ball
    boundary: FrozenSet[int] = frozenset()


@dataclass
class WeakDecomposition:
    parts: List[WeakPart]
    deleted: FrozenSet[int]
    # charge[j][j'] for deleted j and surviving j'
    charge: Dict[int, Dict[int, Any]]
    epsilon: Any

    def part_of_client(self) -> Dict[int, int]:
        owner = {}
        for idx, part in enumerate(self.parts):
            for j in part.clients:
                owner[j] = idx
        return owner

    def deleting_part(self) -> Dict[int, int]:
        owner = {}
        for idx, part in enumerate(self.parts):
            for j in part.boundary:
                owner[j] = idx
        return owner


def horizon_bound(n_clients: int, epsilon: Any) -> int:
    """Largest even t a ball can reach before the growth (1+eps)^((t-2)/2) exceeds n_clients."""
    if n_clients <= 1:
        return 2
    # ln(1+eps) >= eps/2 for eps <= 1, so this stays within 2 ceil(2 ln n / eps) + 2
    return 2 * math.ceil(math.log(n_clients) / math.log1p(float(epsilon))) + 2


def diameter_bound(n_clients: int, epsilon: Any) -> int:
    # facilities of a part sit on odd levels below the horizon
    return 2 * (horizon_bound(n_clients, epsilon) - 1)


class WeakDecomposer:
    def __init__(self, g: ThresholdGraph, epsilon: Any):
        self.logger = get_logger(self.__class__.__name__)
        if not 0 < epsilon <= 1:
            raise ModelError(f"epsilon must lie in (0, 1], got {epsilon}")
        self.g = g
        self.epsilon = epsilon
        self.H = g.fork()

    def _grow(self, seed: int) -> Tuple[int, set, set]:
        n_clients = len(self.H.alive_clients())
        t = 2
        while True:
            inside, boundary = self.H.layered_neighborhood(C(seed), t)
            inside_clients = sum(1 for v in inside if is_client(v))
            if len(boundary) < self.epsilon * inside_clients:
                return t, inside, boundary
            t += 2
            if t > 2 * n_clients + 2:
                raise DecompositionError(f"Ball around client {seed} kept expanding past t={t}")

    @log_exceptions
    def run(self) -> WeakDecomposition:
        isolated = self.g.isolated_clients()
        if isolated:
            raise InfeasibleRadius(FailureKind.UNCOVERED_CLIENT,
                                   f"clients {isolated[:5]} have no facility within radius {self.g.radius}")
        parts: List[WeakPart] = []
        charge: Dict[int, Dict[int, Any]] = {}
        deleted = set()
        while True:
            alive = self.H.alive_clients()
            if not alive:
                break
            seed = alive[0]
            t, inside, boundary = self._grow(seed)
            T = frozenset(v[1] for v in inside if is_facility(v))
            J = frozenset(v[1] for v in inside if is_client(v))
            cut = frozenset(v[1] for v in boundary if is_client(v))
            share = Fraction(1, len(J))
            for j in sorted(cut):
                charge[j] = {jp: share for jp in sorted(J)}
            deleted |= cut
            parts.append(WeakPart(facilities=T, clients=J, seed=seed, horizon=t, boundary=cut))
            self.H.delete(inside | boundary)
            self.logger.debug(f"Part {len(parts) - 1}: seed {seed}, t={t}, |T|={len(T)}, |J|={len(J)}, "
                              f"|boundary|={len(cut)}")
        w = WeakDecomposition(parts=parts, deleted=frozenset(deleted), charge=charge, epsilon=self.epsilon)
        problems = weak_violations(self.g, w)
        if problems:
            raise DecompositionError("; ".join(problems[:5]))
        self.logger.info(f"Weak decomposition: {len(parts)} parts, {len(deleted)} deleted clients")
        return w


def weak_violations(g: ThresholdGraph, w: WeakDecomposition) -> List[str]:
    problems: List[str] = []
    seen_f, seen_c = set(), set()
    bound = diameter_bound(g.inst.n_clients, w.epsilon)
    for idx, part in enumerate(w.parts):
        if seen_f & part.facilities:
            problems.append(f"part {idx}: facilities shared with an earlier part")
        if seen_c & part.clients:
            problems.append(f"part {idx}: clients shared with an earlier part")
        seen_f |= part.facilities
        seen_c |= part.clients
        for j in part.clients:
            outside = set(g.facility_neighbors(j)) - part.facilities
            if outside:
                problems.append(f"part {idx}: client {j} has neighbors {sorted(outside)} outside T")
        if part.facilities:
            diameter = g.hop_diameter(F(i) for i in part.facilities)
            if diameter is INFINITY or diameter > bound:
                problems.append(f"part {idx}: hop diameter {diameter} above {bound}")
    if seen_c & w.deleted:
        problems.append("a deleted client also belongs to a part")
    if seen_c | w.deleted != set(range(g.inst.n_clients)):
        problems.append("parts and deleted clients do not cover every client")
    owner = w.part_of_client()
    deleter = w.deleting_part()
    column: Dict[int, Any] = {}
    for j, row in w.charge.items():
        if NumericHelper.exact_sum(row.values()) != 1:
            problems.append(f"charge row of client {j} does not sum to 1")
        for jp, value in row.items():
            column[jp] = column.get(jp, 0) + value
            if owner.get(jp) != deleter.get(j):
                problems.append(f"client {j} charges {jp} outside the part that deleted it")
    for jp, total in column.items():
        if total > w.epsilon:
            problems.append(f"client {jp} carries charge {total} above {w.epsilon}")
    return problems


@log_exceptions
def decompose(g: ThresholdGraph, epsilon: Any) -> WeakDecomposition:
    return WeakDecomposer(g, epsilon).run()


@log_exceptions
def to_cckp(w: WeakDecomposition, inst: MckcInstance, gamma: Any = 1,
            soft: Optional[bool] = None) -> Tuple[CckpInstance, SupplyVector]:
    """One machine per part with demand sum of J weights / gamma and cardinality |T|.

    Soft instances drop the cardinality (Q||Cmin).
    """
    soft = inst.soft if soft is None else soft
    gamma = NumericHelper.to_number(gamma)
    machines = []
    for part in w.parts:
        demand = NumericHelper.exact_sum(inst.weights[j] for j in sorted(part.clients)) / gamma
        machines.append(Machine(demand=demand, cardinality=None if soft else len(part.facilities)))
    job_types = tuple(inst.cap(p) for p in range(inst.n_types))
    supply = SupplyVector(tuple(inst.count(p) for p in range(inst.n_types)))
    logger.debug(f"CCKP from {len(machines)} parts, gamma {gamma}")
    return CckpInstance(machines=tuple(machines), job_types=job_types), supply

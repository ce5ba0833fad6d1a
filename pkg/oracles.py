"""Exhaustive ground-truth oracles for MCKC and max-min allocation."""
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from config import OracleConfig, default_config
from core import Allocation, CckpInstance, McKcSolution, MckcInstance, SupplyVector
from helper import NumericHelper
from logging_config import GuardExceeded, ModelError, get_logger, log_exceptions

logger = get_logger(__name__)


@dataclass(frozen=True)
class CckpOracleResult:
    ratio: Any
    allocation: Optional[Allocation]
    # False when a target pruned the search: ratio is then only a lower bound
    # and the target is proven unreachable unless reached_target is True
    exact: bool
    reached_target: Optional[bool] = None


def _facility_caps(inst: MckcInstance, placement: Dict[int, Tuple[int, ...]], b: Any) -> Dict[int, int]:
    return {i: sum(NumericHelper.ceil(b * inst.cap(p)) for p in types) for i, types in placement.items()}


def _assign_by_flow(inst: MckcInstance, radius: Any, caps: Dict[int, int]) -> Optional[Dict[int, int]]:
    graph = nx.DiGraph()
    for j in range(inst.n_clients):
        graph.add_edge("s", ("c", j), capacity=1)
    for i, cap in caps.items():
        if cap <= 0:
            continue
        graph.add_edge(("f", i), "t", capacity=cap)
        for j in range(inst.n_clients):
            if NumericHelper.leq(inst.dist(i, j), radius):
                graph.add_edge(("c", j), ("f", i), capacity=1)
    if "t" not in graph:
        return None
    value, flow = nx.maximum_flow(graph, "s", "t")
    if value < inst.n_clients:
        return None
    assignment = {}
    for j in range(inst.n_clients):
        for target, amount in flow[("c", j)].items():
            if amount > 0:
                assignment[j] = target[1]
    return assignment


def _hard_placements(relevant: List[int], counts: List[int]):
    """Maximal injective placements: fill locations until counts or locations run out."""
    total = min(len(relevant), sum(counts))
    remaining = list(counts)

    def extend(position: int, placed: Dict[int, Tuple[int, ...]]):
        if len(placed) == total:
            yield dict(placed)
            return
        if len(relevant) - position < total - len(placed):
            return
        i = relevant[position]
        for p in range(len(remaining)):
            if remaining[p] > 0:
                remaining[p] -= 1
                placed[i] = (p,)
                yield from extend(position + 1, placed)
                del placed[i]
                remaining[p] += 1
        yield from extend(position + 1, placed)

    yield from extend(0, {})


def _soft_placements(relevant: List[int], counts: List[int]):
    """Every copy placed (adding capacity never hurts); multisets per location."""
    per_type = []
    for k in counts:
        splits = [c for c in itertools.product(range(k + 1), repeat=len(relevant)) if sum(c) == k]
        per_type.append(splits)
    for combo in itertools.product(*per_type):
        placement = {}
        for idx, i in enumerate(relevant):
            types = tuple(p for p, split in enumerate(combo) for _ in range(split[idx]))
            if types:
                placement[i] = types
        yield placement


@log_exceptions
def brute_force_mckc(inst: MckcInstance, radius: Any, b: Any,
                     config: Optional[OracleConfig] = None) -> Optional[McKcSolution]:
    config = config or default_config.oracle
    total_caps = sum(inst.count(p) for p in range(inst.n_types))
    if inst.n_facilities > config.max_facilities or total_caps > config.max_total_capacities:
        raise GuardExceeded(
            f"brute_force_mckc limited to {config.max_facilities} facilities and "
            f"{config.max_total_capacities} capacities, got {inst.n_facilities} and {total_caps}")
    if any(w != 1 for w in inst.weights):
        raise ModelError("brute_force_mckc requires unit client weights")

    reach = {j: [i for i in range(inst.n_facilities) if NumericHelper.leq(inst.dist(i, j), radius)]
             for j in range(inst.n_clients)}
    if any(not targets for targets in reach.values()):
        logger.debug(f"Some client has no facility within radius {radius}")
        return None
    relevant = sorted({i for targets in reach.values() for i in targets})
    counts = [inst.count(p) for p in range(inst.n_types)]

    placements = _soft_placements(relevant, counts) if inst.soft else _hard_placements(relevant, counts)
    examined = 0
    seen = set()
    for placement in placements:
        examined += 1
        if examined > config.max_placements:
            raise GuardExceeded(f"brute_force_mckc examined more than {config.max_placements} placements")
        caps = _facility_caps(inst, placement, b)
        key = tuple(sorted(caps.items()))
        if key in seen:
            continue
        seen.add(key)
        if sum(caps.values()) < inst.n_clients:
            continue
        assignment = _assign_by_flow(inst, radius, caps)
        if assignment is not None:
            logger.debug(f"brute_force_mckc found a placement after {examined} candidates")
            return McKcSolution(placements=placement, assignment=assignment, radius_guess=radius)
    logger.debug(f"brute_force_mckc: no placement among {examined} at radius {radius}, b {b}")
    return None


class AllocationSearch:
    """Branch and bound over job copies, largest first.

    Without a target it maximizes min_i received_i / D_i exactly. With a target
    it only explores branches that can still reach ratio >= target and stops
    at the first allocation that does.
    """

    def __init__(self, inst: CckpInstance, supply: SupplyVector, target: Any = None):
        self.logger = get_logger(self.__class__.__name__)
        self.inst = inst
        self.target = target
        copies = [j for j in range(inst.n) for _ in range(supply.counts[j])]
        copies.sort(key=lambda j: (-inst.job_types[j], j))
        self.copies = copies
        self.caps = [inst.job_types[j] for j in copies]
        self.demands = [m.demand for m in inst.machines]
        self.slots = [m.cardinality for m in inst.machines]
        self.best_ratio: Any = None
        self.best_assignment: Optional[List[List[int]]] = None
        self.nodes = 0

    def _ratio(self, loads: Sequence[Any]) -> Any:
        return min(loads[i] / self.demands[i] for i in range(len(loads)))

    def _bound_ok(self, k: int, loads: List[Any], counts: List[int]) -> bool:
        threshold = self.target if self.target is not None else self.best_ratio
        if threshold is None:
            return True
        remaining = self.caps[k:]
        total_left = sum(remaining, Fraction(0))
        deficit = Fraction(0)
        for i in range(len(loads)):
            need = threshold * self.demands[i] - loads[i]
            if need <= 0:
                continue
            deficit += need
            free = None if self.slots[i] is None else self.slots[i] - counts[i]
            reachable = Fraction(0)
            taken = 0
            for idx in range(k, len(self.copies)):
                if free is not None and taken >= free:
                    break
                if self.inst.is_admissible(i, self.copies[idx]):
                    reachable += self.caps[idx]
                    taken += 1
            if self.target is not None:
                if reachable < need:
                    return False
            elif reachable <= need:
                return False
        if self.target is not None:
            return deficit <= total_left
        return deficit < total_left or deficit == 0

    def _record(self, loads: List[Any], assignment: List[List[int]]):
        ratio = self._ratio(loads)
        if self.best_ratio is None or ratio > self.best_ratio:
            self.best_ratio = ratio
            self.best_assignment = [list(a) for a in assignment]

    def _done(self) -> bool:
        return self.target is not None and self.best_ratio is not None and self.best_ratio >= self.target

    def _search(self, k: int, loads: List[Any], counts: List[int], assignment: List[List[int]]):
        self.nodes += 1
        if k == len(self.copies):
            self._record(loads, assignment)
            return
        if not self._bound_ok(k, loads, counts):
            return
        j = self.copies[k]
        cap = self.caps[k]
        m = len(loads)
        candidates = [i for i in range(m)
                      if self.inst.is_admissible(i, j)
                      and (self.slots[i] is None or counts[i] < self.slots[i])]
        candidates.sort(key=lambda i: (loads[i] / self.demands[i], i))
        tried = set()
        for i in candidates:
            if self.inst.admissible is None:
                signature = (self.demands[i], self.slots[i], loads[i], counts[i])
                if signature in tried:
                    continue
                tried.add(signature)
            loads[i] += cap
            counts[i] += 1
            assignment[i].append(j)
            self._search(k + 1, loads, counts, assignment)
            assignment[i].pop()
            counts[i] -= 1
            loads[i] -= cap
            if self._done():
                return
        # Leaving a copy out only helps when it would burn a bounded slot
        unbounded = any(self.slots[i] is None for i in candidates)
        if not candidates or not unbounded:
            self._search(k + 1, loads, counts, assignment)

    def run(self) -> CckpOracleResult:
        m = self.inst.m
        if m == 0:
            return CckpOracleResult(ratio=Fraction(0), allocation=Allocation(()), exact=True)
        loads = [Fraction(0)] * m
        self._search(0, loads, [0] * m, [[] for _ in range(m)])
        self.logger.debug(f"Allocation search visited {self.nodes} nodes, best ratio {self.best_ratio}")
        allocation = Allocation.from_lists(self.best_assignment) if self.best_assignment is not None else None
        if self.target is None:
            return CckpOracleResult(ratio=self.best_ratio, allocation=allocation, exact=True)
        reached = self.best_ratio is not None and self.best_ratio >= self.target
        return CckpOracleResult(ratio=self.best_ratio if self.best_ratio is not None else Fraction(0),
                                allocation=allocation, exact=False, reached_target=reached)


@log_exceptions
def brute_force_cckp(inst: CckpInstance, supply: SupplyVector, config: Optional[OracleConfig] = None,
                     target: Any = None) -> CckpOracleResult:
    config = config or default_config.oracle
    if supply.total() > config.max_job_copies or inst.m > config.max_machines:
        raise GuardExceeded(
            f"brute_force_cckp limited to {config.max_job_copies} job copies and {config.max_machines} machines, "
            f"got {supply.total()} and {inst.m}")
    if len(supply.counts) != inst.n:
        raise ModelError("Supply length does not match job types")
    return AllocationSearch(inst, supply, target).run()


@log_exceptions
def brute_force_restricted(inst: CckpInstance, supply: SupplyVector, config: Optional[OracleConfig] = None,
                           target: Any = None) -> CckpOracleResult:
    config = config or default_config.oracle
    if inst.admissible is None:
        raise ModelError("brute_force_restricted needs admissibility lists")
    if supply.total() > config.max_restricted_jobs:
        raise GuardExceeded(f"brute_force_restricted limited to {config.max_restricted_jobs} jobs, "
                            f"got {supply.total()}")
    return AllocationSearch(inst, supply, target).run()

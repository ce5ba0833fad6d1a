"""Capacity transfer between roundable sets and neighborhoods, and integral client assignment."""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from core import MckcInstance
from helper import NumericHelper
from logging_config import DecompositionError, ModelError, get_logger, log_exceptions
from threshold_graph import C, F, ThresholdGraph

logger = get_logger(__name__)

# (location, capacity type)
Opening = Tuple[int, int]


@dataclass
class CapacityTransfer:
    s_tilde: Tuple[int, ...]
    t: Tuple[int, ...]
    # upgrades[p] lists the real types handed to the openings that need type p
    upgrades: Dict[int, List[int]] = field(default_factory=dict)

    def take(self, p: int) -> int:
        return self.upgrades[p].pop()


def _suffix(values: Sequence[Any], p: int) -> Any:
    return NumericHelper.exact_sum(values[q] for q in range(p, len(values)))


@log_exceptions
def transfer_capacities(s: Sequence[int], y_s: Sequence[Any], counts: Sequence[int]) -> CapacityTransfer:
    """s~_p = floor(sum_{q>=p} y^S_q) - floor(sum_{q>p} y^S_q) and t_p = k_p - s~_p.

    Types are indexed by ascending capacity. Each opening that needs type p
    receives a distinct real type q >= p, largest requirements served first.
    """
    n = len(counts)
    if not len(s) == len(y_s) == n:
        raise ModelError("Opening counts, masses and type counts must have equal length")
    floors = [NumericHelper.floor(_suffix(y_s, p)) for p in range(n)] + [0]
    for p in range(n):
        if _suffix(s, p) > floors[p]:
            raise DecompositionError(f"Openings of types >= {p} exceed floor of the roundable mass {floors[p]}")
    s_tilde = tuple(floors[p] - floors[p + 1] for p in range(n))
    for p in range(n):
        if s_tilde[p] > counts[p]:
            raise DecompositionError(f"Transferred count {s_tilde[p]} of type {p} exceeds k_p = {counts[p]}")
    t = tuple(int(counts[p]) - s_tilde[p] for p in range(n))

    pool = [q for q in range(n) for _ in range(s_tilde[q])]
    pool.sort(reverse=True)
    upgrades: Dict[int, List[int]] = {p: [] for p in range(n)}
    k = 0
    for p in sorted((p for p in range(n) for _ in range(int(s[p]))), reverse=True):
        q = pool[k]
        if q < p:
            raise DecompositionError(f"No transferred type covers an opening of type {p}")
        upgrades[p].append(q)
        k += 1
    logger.debug(f"Capacity transfer: s={tuple(s)}, s~={s_tilde}, t={t}")
    return CapacityTransfer(s_tilde=s_tilde, t=t, upgrades=upgrades)


def location_capacities(inst: MckcInstance, opened: Sequence[Opening]) -> Dict[int, Any]:
    total: Dict[int, Any] = {}
    for i, p in opened:
        total[i] = total.get(i, Fraction(0)) + inst.cap(p)
    return total


def weight_scale(inst: MckcInstance) -> int:
    """Least common denominator of the client weights."""
    scale = 1
    for w in inst.weights:
        if not NumericHelper.is_exact(w):
            if not NumericHelper.is_integral(w):
                raise ModelError(f"Matching needs rational client weights, got {w!r}")
            continue
        d = Fraction(w).denominator
        scale = scale * d // math.gcd(scale, d)
    return scale


@log_exceptions
def assign_clients_matching(g: ThresholdGraph, opened: Sequence[Opening], b: Any, hops: int,
                            clients: Optional[Sequence[int]] = None) -> Optional[Dict[int, int]]:
    """Max-flow b-matching of clients onto opened locations at most `hops` G-hops away.

    Location capacity is ceil(b * total capacity) in units of the scaled
    weights. With unit weights None is exact for (hops, b); a weighted client
    whose flow splits is sent to the location carrying most of it.
    """
    inst = g.inst
    clients = list(range(inst.n_clients)) if clients is None else list(clients)
    scale = weight_scale(inst)
    demand = {j: int(round(inst.weights[j] * scale)) for j in clients}
    if not clients:
        return {}
    graph = nx.DiGraph()
    locations = []
    for i, cap in location_capacities(inst, opened).items():
        limit = NumericHelper.ceil(b * cap * scale)
        if limit > 0:
            graph.add_edge(("f", i), "t", capacity=limit)
            locations.append(i)
    if not locations:
        return None
    for j in clients:
        graph.add_edge("s", ("c", j), capacity=demand[j])
        reach = g.distances_G(C(j))
        for i in locations:
            if reach.get(F(i), hops + 1) <= hops:
                graph.add_edge(("c", j), ("f", i), capacity=demand[j])
    value, flow = nx.maximum_flow(graph, "s", "t")
    if value < sum(demand.values()):
        logger.debug(f"Matching routes {value} of {sum(demand.values())} units at b={b}, hops={hops}")
        return None
    assignment = {}
    for j in clients:
        shares = [(amount, target[1]) for target, amount in flow[("c", j)].items() if amount > 0]
        assignment[j] = max(shares, key=lambda item: (item[0], -item[1]))[1]
    return assignment


def load_factor_candidates(inst: MckcInstance, opened: Sequence[Opening], upper: Any) -> List[Any]:
    """Values of b in [0, upper] where some location's ceil(b * capacity) steps up."""
    scale = weight_scale(inst)
    values = {Fraction(0)}
    for cap in location_capacities(inst, opened).values():
        step = Fraction(1) / (NumericHelper.rationalize(cap) * scale)
        k = 1
        while k * step <= upper:
            values.add(k * step)
            k += 1
    values.add(NumericHelper.rationalize(upper))
    return sorted(values)


@log_exceptions
def tightest_matching(g: ThresholdGraph, opened: Sequence[Opening], upper: Any,
                      hops: int) -> Tuple[Optional[Dict[int, int]], Any]:
    """Smallest step value b <= upper at which the matching succeeds, with its assignment."""
    best = assign_clients_matching(g, opened, upper, hops)
    if best is None:
        return None, upper
    candidates = load_factor_candidates(g.inst, opened, upper)
    lo, hi = 0, len(candidates) - 1
    best_b = candidates[hi]
    while lo < hi:
        mid = (lo + hi) // 2
        found = assign_clients_matching(g, opened, candidates[mid], hops)
        if found is None:
            lo = mid + 1
        else:
            hi = mid
            best, best_b = found, candidates[mid]
    return best, best_b

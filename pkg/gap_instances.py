"""Deterministic lower-bound constructions, each bundled with the witness it is known for.

Every generator re-validates its witness before returning and raises
ContractViolation when the construction does not check out.
"""
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import networkx as nx

from conf_rounding import ConfigurationLpSolution, configuration_violations
from core import (Allocation, CapacityType, CckpInstance, Machine, McKcSolution, MckcInstance, SupplyVector,
                  evaluate_allocation)
from helper import INFINITY
from logging_config import ContractViolation, ModelError, get_logger, log_exceptions
from relaxation import FractionalSolution, fractional_violations
from threshold_graph import build

logger = get_logger(__name__)

Edge = Tuple[int, int]


@dataclass
class McKcGap:
    instance: MckcInstance
    witness: FractionalSolution
    radius: Any


@dataclass
class PetersenFamily:
    instance: CckpInstance
    edges: List[Edge]
    matchings: List[List[Edge]]
    supplies: List[SupplyVector]
    mixture: SupplyVector


@dataclass
class ConfGap:
    instance: CckpInstance
    supply: SupplyVector
    witness: ConfigurationLpSolution
    K: int


@dataclass
class RestrictedGap:
    instance: CckpInstance
    supply: SupplyVector
    witness: ConfigurationLpSolution
    K: int


@dataclass
class MixtureCheck:
    s1: SupplyVector
    s2: SupplyVector
    p: Fraction
    allocations: Tuple[Allocation, Allocation]
    mixture: Tuple[Fraction, ...]


def _grouped_metric(sizes: List[Tuple[int, int]], inside: Any, across: Any) -> Tuple[Tuple[Any, ...], ...]:
    """Distance matrix over facilities-then-clients where groups are given as (|F_k|, |C_k|)."""
    group_of = []
    for k, (n_f, _) in enumerate(sizes):
        group_of.extend([k] * n_f)
    for k, (_, n_c) in enumerate(sizes):
        group_of.extend([k] * n_c)
    n = len(group_of)
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            if a == b:
                row.append(Fraction(0))
            else:
                row.append(inside if group_of[a] == group_of[b] else across)
        rows.append(tuple(row))
    return tuple(rows)


@log_exceptions
def gen_mckc_gap(K: int, soft: bool = False) -> McKcGap:
    """K groups of two locations and K clients at mutual distance 1, infinitely far apart,
    with K capacities of 1 and K-1 capacities of K."""
    if K < 1:
        raise ModelError(f"K must be a positive integer, got {K}")
    facilities = tuple(f"f{k}{side}" for k in range(K) for side in "ab")
    clients = tuple(f"c{k}_{j}" for k in range(K) for j in range(K))
    distance = _grouped_metric([(2, K)] * K, Fraction(1), INFINITY)
    capacities = (CapacityType(K, Fraction(1)), CapacityType(K - 1, Fraction(K)))
    inst = MckcInstance(facilities=facilities, clients=clients, distance=distance,
                        weights=tuple(Fraction(1) for _ in clients), capacities=capacities, soft=soft)
    share = 1 - Fraction(1, K)
    y: Dict[Tuple[int, int], Any] = {}
    x: Dict[Tuple[int, int, int], Any] = {}
    for k in range(K):
        a, b = 2 * k, 2 * k + 1
        y[(b, 0)] = Fraction(1)
        if share > 0:
            y[(a, 1)] = share
        for j in range(k * K, (k + 1) * K):
            x[(b, j, 0)] = Fraction(1, K)
            if share > 0:
                x[(a, j, 1)] = share
    witness = FractionalSolution(y=y, x=x, radius=Fraction(1))
    problems = fractional_violations(inst, build(inst, Fraction(1)), witness, soft=False)
    if problems:
        raise ContractViolation("Gap witness fails the relaxation: " + "; ".join(problems[:3]))
    logger.debug(f"MCKC gap instance K={K}: {inst.n_facilities} facilities, {inst.n_clients} clients")
    return McKcGap(instance=inst, witness=witness, radius=Fraction(1))


def soft_gap_solution(K: int) -> McKcSolution:
    """Capacity K on one location of each of the first K-1 groups, all K unit capacities on the last."""
    placements: Dict[int, Tuple[int, ...]] = {2 * k: (1,) for k in range(K - 1)}
    placements[2 * (K - 1)] = tuple([0] * K)
    assignment = {j: 2 * (j // K) for j in range(K * K)}
    return McKcSolution(placements=placements, assignment=assignment, radius_guess=Fraction(1))


def _perfect_matchings(graph: nx.Graph) -> List[List[Edge]]:
    found: List[List[Edge]] = []

    def extend(free: List[int], chosen: List[Edge]):
        if not free:
            found.append(sorted(chosen))
            return
        v = free[0]
        for u in sorted(graph.neighbors(v)):
            if u in free[1:]:
                chosen.append((min(u, v), max(u, v)))
                extend([w for w in free if w not in (u, v)], chosen)
                chosen.pop()

    extend(sorted(graph.nodes), [])
    return found


@log_exceptions
def gen_petersen_pcmin(k: int) -> PetersenFamily:
    """15 job types 2^i + 2^j over the Petersen edges, 3k machines of demand 1023, and the
    six perfect-matching supplies whose average is k copies of every edge."""
    if k < 1:
        raise ModelError(f"k must be a positive integer, got {k}")
    graph = nx.petersen_graph()
    edges = sorted((min(u, v), max(u, v)) for u, v in graph.edges)
    matchings = _perfect_matchings(graph)
    if len(matchings) != 6:
        raise ContractViolation(f"Expected 6 perfect matchings, found {len(matchings)}")
    cover = {e: sum(1 for m in matchings if e in m) for e in edges}
    if any(c != 2 for c in cover.values()):
        raise ContractViolation(f"Matchings do not cover every edge exactly twice: {cover}")
    for trio in itertools.combinations(matchings, 3):
        if len(set().union(*map(set, trio))) == len(edges):
            raise ContractViolation("Edges split into three perfect matchings")
    index = {e: n for n, e in enumerate(edges)}
    demand = Fraction(sum(2 ** v for v in graph.nodes))
    inst = CckpInstance(machines=tuple(Machine(demand=demand) for _ in range(3 * k)),
                        job_types=tuple(Fraction(2 ** i + 2 ** j) for i, j in edges))
    supplies = []
    for m in matchings:
        counts = [0] * len(edges)
        for e in m:
            counts[index[e]] = 3 * k
        supplies.append(SupplyVector(tuple(counts)))
    total = [sum(s.counts[n] for s in supplies) for n in range(len(edges))]
    if any(t % 6 for t in total):
        raise ContractViolation("Average of the matching supplies is not integral")
    mixture = SupplyVector(tuple(t // 6 for t in total))
    family = PetersenFamily(instance=inst, edges=edges, matchings=matchings, supplies=supplies, mixture=mixture)
    for supply, allocation in zip(supplies, petersen_matching_allocations(family)):
        report = evaluate_allocation(inst, supply, allocation)
        if not report.valid or report.min_ratio < 1:
            raise ContractViolation(f"Matching supply allocation fails: {report}")
    return family


def petersen_matching_allocations(family: PetersenFamily) -> List[Allocation]:
    """Every machine takes one job of each edge of the matching."""
    index = {e: n for n, e in enumerate(family.edges)}
    allocations = []
    for m in family.matchings:
        jobs = [index[e] for e in m]
        allocations.append(Allocation.from_lists([jobs for _ in range(family.instance.m)]))
    return allocations


def conf_gap_sizes(K: int) -> Tuple[List[int], List[Fraction], List[int]]:
    """Class sizes f_i = K^(2K+1-2i), class demands K^(i-2K-1) and job counts f_i (1 + 1/K)."""
    f = [K ** (2 * K + 1 - 2 * i) for i in range(1, K + 1)]
    c = [Fraction(K) ** (i - 2 * K - 1) for i in range(1, K + 1)]
    n = [f_i + f_i // K for f_i in f]
    return f, c, n


@log_exceptions
def gen_conf_gap(K: int) -> ConfGap:
    """Machine M_0 (D=1, f=1), machines M_i (D=K^-i, f=f_i), classes of f_i unit-cardinality
    machines with demand c_i; K big jobs of capacity 1 and n_i jobs of capacity c_i.

    Job types are indexed 0..K-1 for c_1..c_K and K for the big jobs. Machines
    are M_0, then M_1..M_K, then the classes in order.
    """
    if K < 2:
        raise ModelError(f"K must be at least 2, got {K}")
    f, c, n = conf_gap_sizes(K)
    big = K
    machines = [Machine(demand=Fraction(1), cardinality=1)]
    machines += [Machine(demand=Fraction(K) ** -i, cardinality=f[i - 1]) for i in range(1, K + 1)]
    for i in range(1, K + 1):
        machines += [Machine(demand=c[i - 1], cardinality=1)] * f[i - 1]
    inst = CckpInstance(machines=tuple(machines), job_types=tuple(c) + (Fraction(1),))
    supply = SupplyVector(tuple(n) + (K,))
    share = Fraction(1, K)
    z: Dict[Tuple[int, Tuple[int, ...]], Any] = {(0, (big,)): Fraction(1)}
    for i in range(1, K + 1):
        z[(i, (big,))] = 1 - share
        z[(i, (i - 1,) * f[i - 1])] = share
    q = K + 1
    for i in range(1, K + 1):
        for _ in range(f[i - 1]):
            z[(q, (i - 1,))] = Fraction(1)
            q += 1
    witness = ConfigurationLpSolution(z)
    problems = configuration_violations(inst, supply.counts, witness)
    if problems:
        raise ContractViolation("Configuration gap witness invalid: " + "; ".join(problems[:3]))
    logger.debug(f"Configuration gap K={K}: {inst.m} machines, supply {supply.counts}")
    return ConfGap(instance=inst, supply=supply, witness=witness, K=K)


@log_exceptions
def check_conf_gap_mixture(K: int, gap: Optional[ConfGap] = None) -> MixtureCheck:
    """s1 (K+1 big, f_i of each c_i) and s2 (1 big, 2 f_i of each c_i) are both feasible and
    (1 - 1/K) s1 + (1/K) s2 is the instance supply."""
    gap = gap or gen_conf_gap(K)
    f, _, _ = conf_gap_sizes(K)
    big = K
    s1 = SupplyVector(tuple(f) + (K + 1,))
    s2 = SupplyVector(tuple(2 * f_i for f_i in f) + (1,))
    p = Fraction(1, K)
    mixture = tuple((1 - p) * a + p * b for a, b in zip(s1.counts, s2.counts))
    if mixture != tuple(Fraction(v) for v in gap.supply.counts):
        raise ContractViolation(f"Mixture {mixture} differs from the instance supply {gap.supply.counts}")

    first = [[big] for _ in range(K + 1)]
    second = [[big]] + [[i - 1] * f[i - 1] for i in range(1, K + 1)]
    for i in range(1, K + 1):
        first += [[i - 1]] * f[i - 1]
        second += [[i - 1]] * f[i - 1]
    allocations = (Allocation.from_lists(first), Allocation.from_lists(second))
    for supply, allocation in zip((s1, s2), allocations):
        report = evaluate_allocation(gap.instance, supply, allocation)
        if not report.valid or report.min_ratio < 1:
            raise ContractViolation(f"Mixture endpoint allocation fails: {report.violations[:3]}")
    return MixtureCheck(s1=s1, s2=s2, p=p, allocations=allocations, mixture=mixture)


@log_exceptions
def gen_bansal_sviridenko(K: int) -> RestrictedGap:
    """K large machines (D=K) and K classes of K small machines (D=1); K-1 large jobs of capacity K
    for the large machines only, and per class one public and K private unit jobs.

    Type 0 is the large job. Type 1 + (i(K+1)) is the public job of class i and
    the next K types are its private jobs. Machines are the large ones, then
    the small ones class by class.
    """
    if K < 2:
        raise ModelError(f"K must be at least 2, got {K}")
    large = list(range(K))

    def small(i: int, k: int) -> int:
        return K + i * K + k

    machines = [Machine(demand=Fraction(K))] * K + [Machine(demand=Fraction(1))] * (K * K)
    job_types = [Fraction(K)]
    admissible = [frozenset(large)]
    for i in range(K):
        job_types.append(Fraction(1))
        admissible.append(frozenset(small(i, k) for k in range(K)))
        for k in range(K):
            job_types.append(Fraction(1))
            admissible.append(frozenset({small(i, k), large[i]}))
    inst = CckpInstance(machines=tuple(machines), job_types=tuple(job_types), admissible=tuple(admissible))
    supply = SupplyVector((K - 1,) + (1,) * (K * (K + 1)))

    def public(i: int) -> int:
        return 1 + i * (K + 1)

    share = Fraction(1, K)
    z: Dict[Tuple[int, Tuple[int, ...]], Any] = {}
    for i in range(K):
        z[(large[i], (0,))] = 1 - share
        z[(large[i], tuple(public(i) + 1 + k for k in range(K)))] = share
        for k in range(K):
            z[(small(i, k), (public(i) + 1 + k,))] = 1 - share
            z[(small(i, k), (public(i),))] = share
    witness = ConfigurationLpSolution(z)
    problems = configuration_violations(inst, supply.counts, witness)
    if problems:
        raise ContractViolation("Restricted gap witness invalid: " + "; ".join(problems[:3]))
    usage = witness.usage(inst.n)
    if any(u != s for u, s in zip(usage, supply.counts)):
        raise ContractViolation(f"Restricted gap witness does not use every job exactly: {usage}")
    return RestrictedGap(instance=inst, supply=supply, witness=witness, K=K)


@log_exceptions
def gen_qcmin_reduction(inst: CckpInstance, supply: SupplyVector) -> MckcInstance:
    """Group i holds f_i locations and D_i unit clients at distance 0; groups are 1 apart.

    The capacity profile is the job multiset. Machines without a cardinality
    bound (Q||Cmin) give a soft instance with one location per group.
    """
    if inst.admissible is not None:
        raise ModelError("Restricted instances have no grouped embedding")
    bounded = [m.cardinality is not None for m in inst.machines]
    if any(bounded) and not all(bounded):
        raise ModelError("Either every machine has a cardinality or none has")
    soft = not any(bounded)
    sizes = []
    for i, machine in enumerate(inst.machines):
        if Fraction(machine.demand).denominator != 1:
            raise ModelError(f"Machine {i} demand {machine.demand} is not an integer")
        sizes.append((1 if soft else int(machine.cardinality), int(machine.demand)))
    counts: Dict[Any, int] = {}
    for j, cap in enumerate(inst.job_types):
        counts[cap] = counts.get(cap, 0) + int(supply.counts[j])
    capacities = tuple(CapacityType(counts[cap], Fraction(cap)) for cap in sorted(counts))
    facilities = tuple(f"m{i}_f{k}" for i, (n_f, _) in enumerate(sizes) for k in range(n_f))
    clients = tuple(f"m{i}_c{k}" for i, (_, n_c) in enumerate(sizes) for k in range(n_c))
    return MckcInstance(facilities=facilities, clients=clients, distance=_grouped_metric(sizes, Fraction(0),
                                                                                         Fraction(1)),
                        weights=tuple(Fraction(1) for _ in clients), capacities=capacities, soft=soft)

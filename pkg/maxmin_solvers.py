"""Max-min allocation: greedy with Farkas certificates, Shmoys-Tardos rounding, restricted reduction."""
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx

from core import Allocation, CckpInstance, Machine, SupplyVector
from helper import NumericHelper
from logging_config import ContractViolation, ModelError, get_logger, log_exceptions
from lp_engine import GE, LE, LinearSystem

logger = get_logger(__name__)

Assignment = Dict[Tuple[int, int], Any]


@dataclass(frozen=True)
class FarkasCertificate:
    alpha: Tuple[Any, ...]
    beta: Tuple[Any, ...]
    # machine index (original numbering) where the greedy got stuck
    stuck: Optional[int] = None


def z_name(i: int, j: int) -> str:
    return f"z[{i},{j}]"


def build_assignment_lp(inst: CckpInstance, supply: Sequence[Any], demands: Optional[Sequence[Any]] = None,
                        cardinality: bool = True, exact: Optional[bool] = None) -> LinearSystem:
    """Supply rows, demand rows with min(c_j, D_i) and, when asked, cardinality rows.

    `demands` overrides the right-hand sides of the demand rows; capacities are
    still truncated at the machine's own demand.
    """
    demands = [m.demand for m in inst.machines] if demands is None else list(demands)
    system = LinearSystem(exact=exact)
    for i in range(inst.m):
        for j in range(inst.n):
            if inst.is_admissible(i, j):
                system.add_variable(z_name(i, j))
    for j in range(inst.n):
        row = {z_name(i, j): 1 for i in range(inst.m) if inst.is_admissible(i, j)}
        system.add_constraint(row, LE, supply[j], name=f"supply[{j}]")
    for i, machine in enumerate(inst.machines):
        row = {z_name(i, j): min(inst.job_types[j], machine.demand) for j in range(inst.n)
               if inst.is_admissible(i, j)}
        system.add_constraint(row, GE, demands[i], name=f"demand[{i}]")
        if cardinality and machine.cardinality is not None:
            row = {z_name(i, j): 1 for j in range(inst.n) if inst.is_admissible(i, j)}
            system.add_constraint(row, LE, machine.cardinality, name=f"cardinality[{i}]")
    return system


def assignment_from_point(inst: CckpInstance, point: Dict[str, Any]) -> Assignment:
    z = {}
    for i in range(inst.m):
        for j in range(inst.n):
            name = z_name(i, j)
            if name in point and point[name] > 0:
                z[(i, j)] = point[name]
    return z


def fractional_received(inst: CckpInstance, z: Assignment, i: int) -> Any:
    return NumericHelper.exact_sum(v * min(inst.job_types[j], inst.demand(i)) for (ii, j), v in z.items() if ii == i)


@log_exceptions
def verify_farkas(inst: CckpInstance, supply: SupplyVector, cert: FarkasCertificate, tol: float = 1e-9) -> bool:
    if len(cert.alpha) != inst.n or len(cert.beta) != inst.m:
        return False
    exact = all(NumericHelper.is_exact(v) for v in list(cert.alpha) + list(cert.beta))
    slack = 0 if exact else tol
    if any(b < -slack for b in cert.beta) or any(a < -slack for a in cert.alpha):
        return False
    for i, machine in enumerate(inst.machines):
        for j in range(inst.n):
            if cert.beta[i] * min(inst.job_types[j], machine.demand) > cert.alpha[j] + slack:
                return False
    lhs = NumericHelper.exact_sum(cert.beta[i] * m.demand for i, m in enumerate(inst.machines))
    rhs = NumericHelper.exact_sum(cert.alpha[j] * supply.counts[j] for j in range(inst.n))
    return lhs - rhs > slack


class GreedyAllocator:
    """Largest jobs first, machines by decreasing demand, fill each to half its demand."""

    def __init__(self, inst: CckpInstance, supply: SupplyVector):
        self.logger = get_logger(self.__class__.__name__)
        if inst.n != len(supply.counts):
            raise ModelError("Supply length does not match job types")
        self.inst = inst
        self.supply = supply

    def _certificate(self, order: List[int], bins: List[List[int]], stuck: int) -> FarkasCertificate:
        inst = self.inst
        D = [inst.demand(i) for i in order]
        caps = inst.job_types

        def overloaded(k: int) -> bool:
            return len(bins[k]) == 1 and caps[bins[k][0]] >= D[k]

        beta_sorted: List[Any] = [Fraction(0)] * len(order)
        beta_sorted[0] = Fraction(1)
        for k in range(stuck):
            if not overloaded(k + 1):
                beta_sorted[k + 1] = beta_sorted[k]
            elif overloaded(k):
                beta_sorted[k + 1] = beta_sorted[k] * D[k] / D[k + 1]
            else:
                beta_sorted[k + 1] = beta_sorted[k] * caps[bins[k + 1][0]] / D[k + 1]
        beta: List[Any] = [Fraction(0)] * inst.m
        for k, i in enumerate(order):
            beta[i] = beta_sorted[k]
        alpha = tuple(max(beta[i] * min(caps[j], inst.demand(i)) for i in range(inst.m))
                      for j in range(inst.n))
        return FarkasCertificate(alpha=alpha, beta=tuple(beta), stuck=order[stuck])

    @log_exceptions
    def run(self) -> Union[Allocation, FarkasCertificate]:
        inst = self.inst
        if inst.m == 0:
            return Allocation(())
        order = sorted(range(inst.m), key=lambda i: (-inst.demand(i), i))
        copies = [j for j in range(inst.n) for _ in range(self.supply.counts[j])]
        copies.sort(key=lambda j: (-inst.job_types[j], j))
        bins: List[List[int]] = [[] for _ in order]
        filled = [Fraction(0)] * len(order)
        k = 0
        for j in copies:
            while k < len(order) and filled[k] * 2 >= inst.demand(order[k]):
                k += 1
            if k == len(order):
                break
            bins[k].append(j)
            filled[k] += inst.job_types[j]
        while k < len(order) and filled[k] * 2 >= inst.demand(order[k]):
            k += 1
        if k == len(order):
            lists: List[List[int]] = [[] for _ in range(inst.m)]
            for pos, i in enumerate(order):
                lists[i] = bins[pos]
            self.logger.debug(f"Greedy satisfied all {inst.m} machines to half demand")
            return Allocation.from_lists(lists)
        cert = self._certificate(order, bins, k)
        if not verify_farkas(inst, self.supply, cert):
            raise ContractViolation(f"Greedy certificate failed verification at machine {order[k]}")
        self.logger.debug(f"Greedy stuck at machine {order[k]}, certificate beta={cert.beta}")
        return cert


@log_exceptions
def greedy_qcmin(inst: CckpInstance, supply: SupplyVector) -> Union[Allocation, FarkasCertificate]:
    return GreedyAllocator(inst, supply).run()


def assignment_violations(inst: CckpInstance, supply: Sequence[Any], z: Assignment,
                          cardinality: bool = True, demands: Optional[Sequence[Any]] = None,
                          tol: float = 1e-7) -> List[str]:
    """Supply, cardinality and (when `demands` is given) demand rows of the assignment LP."""
    problems = []
    used: Dict[int, Any] = {}
    count: Dict[int, Any] = {}
    for (i, j), value in z.items():
        slack = 0 if NumericHelper.is_exact(value) else tol
        if value < -slack:
            problems.append(f"z[{i},{j}] negative")
        if not inst.is_admissible(i, j):
            problems.append(f"z[{i},{j}] uses an inadmissible pair")
        used[j] = used.get(j, 0) + value
        count[i] = count.get(i, 0) + value
    for j, total in used.items():
        slack = 0 if NumericHelper.is_exact(total) else tol
        if total > supply[j] + slack:
            problems.append(f"job type {j} used {total} above supply {supply[j]}")
    if cardinality:
        for i, total in count.items():
            f = inst.machines[i].cardinality
            slack = 0 if NumericHelper.is_exact(total) else tol
            if f is not None and total > f + slack:
                problems.append(f"machine {i} takes {total} jobs above cardinality {f}")
    if demands is not None:
        for i in range(inst.m):
            got = fractional_received(inst, z, i)
            slack = 0 if NumericHelper.is_exact(got) else tol * max(1, abs(demands[i]))
            if got < demands[i] - slack:
                problems.append(f"machine {i} receives {got} below {demands[i]}")
    return problems


class ShmoysTardosRounder:
    """Machine copies filled in decreasing capacity order, realized by a min-cost max flow.

    Full copies get cost -1 so every maximum flow that is also cheapest
    matches all of them.
    """

    def __init__(self, inst: CckpInstance, supply: SupplyVector, z: Assignment):
        self.logger = get_logger(self.__class__.__name__)
        problems = assignment_violations(inst, supply.counts, z, cardinality=True)
        if problems:
            raise ModelError("Fractional assignment rejected: " + "; ".join(problems[:5]))
        self.inst = inst
        self.supply = supply
        self.z = z

    def _copies(self, i: int) -> List[Tuple[Dict[int, Any], bool]]:
        caps = self.inst.job_types
        items = sorted(((j, v) for (ii, j), v in self.z.items() if ii == i and v > 0),
                       key=lambda item: (-caps[item[0]], item[0]))
        copies: List[Tuple[Dict[int, Any], bool]] = []
        current: Dict[int, Any] = {}
        room: Any = 1
        for j, value in items:
            left = value
            while left > 0 and not NumericHelper.is_zero(left):
                take = min(left, room)
                current[j] = current.get(j, 0) + take
                left -= take
                room -= take
                if NumericHelper.is_zero(room) or room <= 0:
                    copies.append((current, True))
                    current, room = {}, 1
        if current:
            copies.append((current, False))
        return copies

    @log_exceptions
    def run(self) -> Allocation:
        graph = nx.DiGraph()
        slots: Dict[Tuple[int, int], int] = {}
        for i in range(self.inst.m):
            for k, (mass, full) in enumerate(self._copies(i)):
                node = ("copy", i, k)
                slots[(i, k)] = i
                graph.add_edge("s", node, capacity=1, weight=-1 if full else 0)
                for j in mass:
                    graph.add_edge(node, ("job", j), capacity=1, weight=0)
        for j in range(self.inst.n):
            if self.supply.counts[j] > 0:
                graph.add_edge(("job", j), "t", capacity=self.supply.counts[j], weight=0)
        lists: List[List[int]] = [[] for _ in range(self.inst.m)]
        if "s" in graph and "t" in graph:
            flow = nx.max_flow_min_cost(graph, "s", "t")
            for (i, k) in slots:
                for target, amount in flow[("copy", i, k)].items():
                    if amount > 0:
                        lists[i].append(target[1])
        allocation = Allocation.from_lists(lists)
        self.logger.debug(f"Rounded fractional assignment over {len(slots)} machine copies")
        return allocation


@log_exceptions
def shmoys_tardos_round(inst: CckpInstance, supply: SupplyVector, z: Assignment) -> Allocation:
    return ShmoysTardosRounder(inst, supply, z).run()


def rounding_loss(inst: CckpInstance, z: Assignment, i: int) -> Any:
    """Largest capacity used fractionally by machine i (the additive loss of the rounding)."""
    used = [inst.job_types[j] for (ii, j), v in z.items() if ii == i and v > 0]
    return max(used) if used else 0


@log_exceptions
def reduce_to_restricted(inst: CckpInstance) -> CckpInstance:
    """Job j may go to machine i iff c_j >= D_i / (2 f_i); cardinalities are dropped."""
    admissible = []
    for j, c in enumerate(inst.job_types):
        allowed = set()
        for i, machine in enumerate(inst.machines):
            if machine.cardinality is None or c * 2 * machine.cardinality >= machine.demand:
                allowed.add(i)
        admissible.append(frozenset(allowed))
    machines = tuple(Machine(demand=m.demand) for m in inst.machines)
    return CckpInstance(machines=machines, job_types=inst.job_types, admissible=tuple(admissible))

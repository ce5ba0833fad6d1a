"""Enumeration-and-rounding scheme for CCKP: (1 - 3 eps)-approximate loads or a certified failure."""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from config import LpConfig, QptasConfig, default_config
from core import Allocation, CckpInstance, Machine, SupplyVector
from helper import NumericHelper
from logging_config import GuardExceeded, ModelError, get_logger, log_exceptions
from lp_engine import solve
from maxmin_solvers import ShmoysTardosRounder, assignment_from_point, build_assignment_lp

logger = get_logger(__name__)

BigConfiguration = Tuple[int, ...]


@dataclass(frozen=True)
class MachineGroup:
    """Machines whose demand rounds down to base^r and cardinality rounds up to floor(base^s)."""

    r: int
    demand: Any
    cardinality: Optional[int]
    members: Tuple[int, ...]


def round_down_power(value: Any, base: Fraction) -> int:
    r = math.floor(math.log(float(value)) / math.log(float(base)))
    while base ** (r + 1) <= value:
        r += 1
    while base ** r > value:
        r -= 1
    return r


def round_up_power(value: Any, base: Fraction) -> int:
    s = math.ceil(math.log(float(value)) / math.log(float(base))) if value > 1 else 0
    while s > 0 and base ** (s - 1) >= value:
        s -= 1
    while base ** s < value:
        s += 1
    return s


def round_up_exponent(value: Any, base: Fraction) -> int:
    """Smallest t with base^t >= value; negative for values below 1."""
    t = round_down_power(value, base)
    return t if base ** t == value else t + 1


def trim_to_cardinality(inst: CckpInstance, allocation: Allocation) -> Allocation:
    """Drop the least-capacity jobs of every machine holding more than f_i."""
    lists = []
    for i, items in enumerate(allocation.assignment):
        f = inst.machines[i].cardinality
        ordered = sorted(items, key=lambda j: (inst.job_types[j], j))
        if f is not None and len(ordered) > f:
            ordered = ordered[len(ordered) - f:]
        lists.append(ordered)
    return Allocation.from_lists(lists)


class QptasSolver:
    """Demands rounded down and cardinalities up to powers of (1 + eps), capacities up to
    eps (1 + eps)^t with equal values merged into one class; big-job configurations are
    guessed per machine group, the small jobs go through the residual assignment LP
    and Shmoys-Tardos rounding, and overfull machines are trimmed.

    A job is big for a group when its capacity is at least eps times the rounded
    demand. Configurations are minimal: dropping their smallest job leaves at
    most the rounded demand.
    """

    def __init__(self, inst: CckpInstance, supply: SupplyVector, epsilon: Any = None,
                 config: Optional[QptasConfig] = None, lp_config: Optional[LpConfig] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.config = config or default_config.qptas
        self.lp_config = lp_config or default_config.lp
        self.epsilon = NumericHelper.rationalize(self.config.epsilon if epsilon is None else epsilon)
        if not 0 < self.epsilon < Fraction(1, 3):
            raise ModelError(f"epsilon must lie in (0, 1/3), got {self.epsilon}")
        if inst.admissible is not None:
            raise ModelError("The approximation scheme needs an unrestricted instance")
        if len(supply.counts) != inst.n:
            raise ModelError("Supply length does not match job types")
        self.original = inst
        self.original_supply = supply
        self.base = 1 + self.epsilon
        self.classes = self._capacity_classes()
        self.inst = CckpInstance(machines=inst.machines,
                                 job_types=tuple(self.epsilon * self.base ** t for t, _ in self.classes))
        self.supply = SupplyVector(tuple(sum(supply.counts[j] for j in members) for _, members in self.classes))
        self.groups = self._group()
        self.visited = 0
        self.lp_calls = 0

    def _capacity_classes(self) -> List[Tuple[int, Tuple[int, ...]]]:
        keyed: Dict[int, List[int]] = {}
        for j, c in enumerate(self.original.job_types):
            keyed.setdefault(round_up_exponent(c / self.epsilon, self.base), []).append(j)
        return [(t, tuple(members)) for t, members in sorted(keyed.items())]

    def _expand(self, allocation: Allocation) -> Allocation:
        """Hand out real job types for class copies, largest capacity first."""
        caps = self.original.job_types
        left = list(self.original_supply.counts)
        order = [sorted(members, key=lambda j: (-caps[j], j)) for _, members in self.classes]
        lists = []
        for items in allocation.assignment:
            real = []
            for k in items:
                j = next(j for j in order[k] if left[j] > 0)
                left[j] -= 1
                real.append(j)
            lists.append(real)
        return Allocation.from_lists(lists)

    def _group(self) -> List[MachineGroup]:
        keyed: Dict[Tuple[int, Optional[int]], List[int]] = {}
        for i, machine in enumerate(self.inst.machines):
            r = round_down_power(machine.demand, self.base)
            f = machine.cardinality
            if f is not None and f > 0:
                f = math.floor(self.base ** round_up_power(f, self.base))
            keyed.setdefault((r, f), []).append(i)
        return [MachineGroup(r, self.base ** r, f, tuple(members))
                for (r, f), members in sorted(keyed.items(), key=lambda item: item[1][0])]

    def _is_big(self, group: MachineGroup, j: int) -> bool:
        return self.inst.job_types[j] >= self.epsilon * group.demand

    def _configurations(self, group: MachineGroup) -> List[BigConfiguration]:
        caps = self.inst.job_types
        big = sorted((j for j in range(self.inst.n) if self._is_big(group, j) and self.supply.counts[j] > 0),
                     key=lambda j: (-caps[j], j))
        limit = group.cardinality
        found: List[BigConfiguration] = []

        def extend(start: int, chosen: List[int], load: Any):
            found.append(tuple(sorted(chosen)))
            if load > group.demand or (limit is not None and len(chosen) >= limit):
                return
            for pos in range(start, len(big)):
                j = big[pos]
                if chosen.count(j) >= self.supply.counts[j]:
                    continue
                chosen.append(j)
                extend(pos, chosen, load + caps[j])
                chosen.pop()

        extend(0, [], Fraction(0))
        return found

    def _residual(self, guess: Dict[int, BigConfiguration]) -> Optional[Allocation]:
        inst = self.inst
        left = list(self.supply.counts)
        for phi in guess.values():
            for j in phi:
                left[j] -= 1
        group_of = {i: g for g in self.groups for i in g.members}
        machines = []
        demands = []
        admissible: List[set] = [set() for _ in range(inst.n)]
        for i in range(inst.m):
            group = group_of[i]
            phi = guess[i]
            load = NumericHelper.exact_sum(inst.job_types[j] for j in phi)
            cardinality = None if group.cardinality is None else group.cardinality - len(phi)
            machines.append(Machine(demand=group.demand, cardinality=cardinality))
            demands.append(max(group.demand - load, Fraction(0)))
            for j in range(inst.n):
                if not self._is_big(group, j):
                    admissible[j].add(i)
        residual = CckpInstance(machines=tuple(machines), job_types=inst.job_types,
                                admissible=tuple(frozenset(a) for a in admissible))
        self.lp_calls += 1
        outcome = solve(build_assignment_lp(residual, left, demands=demands, cardinality=True), self.lp_config)
        if not outcome.feasible:
            return None
        z = assignment_from_point(residual, outcome.point)
        small = ShmoysTardosRounder(residual, SupplyVector(tuple(left)), z).run()
        lists = [list(guess[i]) + list(small.assignment[i]) for i in range(inst.m)]
        return trim_to_cardinality(inst, Allocation.from_lists(lists))

    def _search(self, k: int, guess: Dict[int, BigConfiguration], used: List[int],
                options: List[List[BigConfiguration]]) -> Optional[Allocation]:
        if k == len(self.groups):
            return self._residual(guess)
        return self._fill(k, 0, 0, guess, used, options)

    def _fill(self, k: int, pos: int, start: int, guess: Dict[int, BigConfiguration], used: List[int],
              options: List[List[BigConfiguration]]) -> Optional[Allocation]:
        self.visited += 1
        if self.visited > self.config.max_states:
            raise GuardExceeded(f"Configuration guesses exceed {self.config.max_states} states")
        group = self.groups[k]
        if pos == len(group.members):
            return self._search(k + 1, guess, used, options)
        machine = group.members[pos]
        # machines of a group are interchangeable: configurations are chosen in nondecreasing order
        for t in range(start, len(options[k])):
            phi = options[k][t]
            if any(used[j] + phi.count(j) > self.supply.counts[j] for j in set(phi)):
                continue
            for j in phi:
                used[j] += 1
            guess[machine] = phi
            result = self._fill(k, pos + 1, t, guess, used, options)
            for j in phi:
                used[j] -= 1
            del guess[machine]
            if result is not None:
                return result
        return None

    @log_exceptions
    def run(self) -> Optional[Allocation]:
        if self.original.m == 0:
            return Allocation(())
        options = [self._configurations(g) for g in self.groups]
        self.logger.debug(f"{len(self.groups)} machine groups, configurations per group "
                          f"{[len(o) for o in options]}")
        allocation = self._search(0, {}, [0] * self.inst.n, options)
        if allocation is None:
            self.logger.info(f"No guess admits a residual assignment ({self.lp_calls} LPs, {self.visited} states)")
            return None
        self.logger.debug(f"Allocation found after {self.lp_calls} LPs, {self.visited} states, "
                          f"{len(self.classes)} capacity classes")
        return self._expand(allocation)


@log_exceptions
def qptas_cckp(inst: CckpInstance, supply: SupplyVector, epsilon: Any = None,
               config: Optional[QptasConfig] = None, lp_config: Optional[LpConfig] = None) -> Optional[Allocation]:
    """Allocation with every machine at least (1 - 3 eps) D_i, or None when no guess is feasible."""
    return QptasSolver(inst, supply, epsilon, config, lp_config).run()

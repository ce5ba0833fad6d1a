"""Rounding of configuration-LP points for CCKP to an O(log D) allocation."""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from config import LpConfig, default_config
from core import Allocation, CckpInstance, Machine, SupplyVector
from helper import NumericHelper
from logging_config import ContractViolation, ModelError, get_logger, log_exceptions
from lp_engine import GE, LE, LinearSystem, LpStatus, solve
from maxmin_solvers import ShmoysTardosRounder, assignment_from_point, z_name

logger = get_logger(__name__)

Configuration = Tuple[int, ...]

# float LP values are snapped to rationals with this denominator bound
SNAP_DENOMINATOR = 10 ** 9


@dataclass
class ConfigurationLpSolution:
    """Sparse z(i, S); a configuration S is the sorted tuple of job-type indices it holds."""

    z: Dict[Tuple[int, Configuration], Any] = field(default_factory=dict)

    def configurations(self, i: int) -> Dict[Configuration, Any]:
        return {S: v for (ii, S), v in self.z.items() if ii == i and v > 0}

    def mass(self, i: int) -> Any:
        return NumericHelper.exact_sum(self.configurations(i).values())

    def usage(self, n_types: int) -> List[Any]:
        used: List[Any] = [Fraction(0)] * n_types
        for (_, S), value in self.z.items():
            for j in S:
                used[j] = used[j] + value
        return used


def configuration_value(inst: CckpInstance, S: Configuration) -> Any:
    return NumericHelper.exact_sum(inst.job_types[j] for j in S)


def configuration_violations(inst: CckpInstance, supply: Sequence[Any], sol: ConfigurationLpSolution,
                             demand_scale: Any = 1, tol: float = 1e-7) -> List[str]:
    """Unit mass per machine, supply per job type, support of size <= f_i reaching D_i * demand_scale."""
    problems: List[str] = []
    for (i, S), value in sol.z.items():
        if not 0 <= i < inst.m:
            problems.append(f"z uses unknown machine {i}")
            continue
        if value < 0:
            problems.append(f"z({i},{S}) negative")
        if value <= 0:
            continue
        if any(not 0 <= j < inst.n for j in S):
            problems.append(f"z({i},{S}) uses an unknown job type")
            continue
        if not inst.machines[i].allows(len(S)):
            problems.append(f"z({i},{S}) holds {len(S)} jobs above cardinality {inst.machines[i].cardinality}")
        if any(not inst.is_admissible(i, j) for j in S):
            problems.append(f"z({i},{S}) holds an inadmissible job")
        need = inst.demand(i) * demand_scale
        if not NumericHelper.geq(configuration_value(inst, S), need):
            problems.append(f"z({i},{S}) reaches {configuration_value(inst, S)} below {need}")
    for i in range(inst.m):
        total = sol.mass(i)
        slack = 0 if NumericHelper.is_exact(total) else tol
        if abs(total - 1) > slack:
            problems.append(f"machine {i} has configuration mass {total}")
    for j, used in enumerate(sol.usage(inst.n)):
        slack = 0 if NumericHelper.is_exact(used) else tol
        if used > supply[j] + slack:
            problems.append(f"job type {j} used {used} above supply {supply[j]}")
    return problems


def log_ratio(inst: CckpInstance) -> float:
    """max(1, log2(D_max / D_min)), the scale of the large-job threshold."""
    if inst.m == 0:
        return 1.0
    return max(1.0, math.log2(float(inst.demand_ratio())))


def guarantee_factor(inst: CckpInstance) -> float:
    return 6 * log_ratio(inst)


def _snap(value: Any) -> Fraction:
    if NumericHelper.is_exact(value):
        return Fraction(value)
    return Fraction(float(value)).limit_denominator(SNAP_DENOMINATOR)


def _remove(S: Configuration, taken: Dict[int, int]) -> Configuration:
    left = dict(taken)
    kept = []
    for j in S:
        if left.get(j, 0) > 0:
            left[j] -= 1
        else:
            kept.append(j)
    return tuple(kept)


class ConfigurationRounder:
    """Split large jobs into singletons, pivot until each demand bucket holds at most one
    hybrid machine, match the hybrids, and round the small machines through the
    assignment LP.

    Demands are bucketed by powers of two over D_min. A job is large for machine
    i when 3 * log_ratio * c_j >= the bucketed demand of i.
    """

    def __init__(self, inst: CckpInstance, supply: SupplyVector, sol: ConfigurationLpSolution,
                 lp_config: Optional[LpConfig] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.lp_config = lp_config or default_config.lp
        if inst.admissible is not None:
            raise ModelError("Configuration rounding needs an unrestricted instance")
        if len(supply.counts) != inst.n:
            raise ModelError("Supply length does not match job types")
        problems = configuration_violations(inst, supply.counts, sol)
        if problems:
            raise ModelError("Configuration point rejected: " + "; ".join(problems[:5]))
        self.inst = inst
        self.supply = supply
        self.scale = log_ratio(inst)
        d_min = min(inst.demand(i) for i in range(inst.m)) if inst.m else 1
        self.bucket: List[int] = []
        self.rounded_demand: List[Any] = []
        for i in range(inst.m):
            ratio = inst.demand(i) / d_min
            k = 0
            while 2 ** (k + 1) <= ratio:
                k += 1
            self.bucket.append(k)
            self.rounded_demand.append(d_min * 2 ** k)
        self.n_buckets = max(1, len(set(self.bucket)))
        self.z: List[Dict[Configuration, Fraction]] = []
        for i in range(inst.m):
            row = {S: _snap(v) for S, v in sol.configurations(i).items()}
            total = sum(row.values(), Fraction(0))
            self.z.append({S: v / total for S, v in row.items() if v > 0})
        self.rounded: Dict[int, Configuration] = {}
        self.stats = {"large_fixes": 0, "bucket_pivots": 0, "matched_hybrids": 0, "dropped_hybrids": 0,
                      "residual_lp": None}

    def is_large(self, i: int, j: int) -> bool:
        return 3 * self.scale * self.inst.job_types[j] >= self.rounded_demand[i]

    def _large_mass(self, i: int) -> Fraction:
        return sum((v for S, v in self.z[i].items() if len(S) == 1 and self.is_large(i, S[0])), Fraction(0))

    def _shift(self, i: int, source: Configuration, target: Configuration, amount: Fraction):
        self.z[i][source] -= amount
        if self.z[i][source] == 0:
            del self.z[i][source]
        self.z[i][target] = self.z[i].get(target, Fraction(0)) + amount
        if self.z[i][target] == 1:
            self.z[i] = {target: Fraction(1)}
            self.rounded[i] = target

    def _split_large(self):
        for i in range(self.inst.m):
            row: Dict[Configuration, Fraction] = {}
            for S, v in self.z[i].items():
                large = [j for j in S if self.is_large(i, j)]
                if large:
                    j = max(large, key=lambda q: (self.inst.job_types[q], q))
                    S = (j,)
                row[S] = row.get(S, Fraction(0)) + v
            self.z[i] = row
            if len(row) == 1:
                self.rounded[i] = next(iter(row))

    def _kind(self, i: int) -> str:
        if i in self.rounded:
            return "rounded"
        mass = self._large_mass(i)
        if mass == 1:
            return "large"
        return "hybrid" if mass > 0 else "small"

    def _fix_large_machine(self, i: int):
        caps = self.inst.job_types
        guard = 0
        while i not in self.rounded:
            guard += 1
            if guard > 100000:
                raise ContractViolation(f"Large machine {i} did not round")
            fractional = sorted((S[0] for S, v in self.z[i].items() if 0 < v < 1),
                                key=lambda j: (caps[j], j))
            j1, j2 = fractional[0], fractional[1]
            claim = None
            for k in range(self.inst.m):
                if k == i or k in self.rounded:
                    continue
                for S, v in sorted(self.z[k].items()):
                    if 0 < v < 1 and j1 in S:
                        claim = (k, S)
                        break
                if claim:
                    break
            if claim is None:
                # the supply of j1 is an integer, so a whole copy is free
                self.z[i] = {(j1,): Fraction(1)}
                self.rounded[i] = (j1,)
                break
            k, S = claim
            if self.is_large(k, j2):
                T: Configuration = (j2,)
            else:
                T = tuple(sorted(_remove(S, {j1: 1}) + (j2,)))
            amount = min(self.z[i][(j2,)], self.z[k][S], 1 - self.z[i][(j1,)], 1 - self.z[k].get(T, Fraction(0)))
            self._shift(i, (j2,), (j1,), amount)
            self._shift(k, S, T, amount)
            self.stats["large_fixes"] += 1

    def _fix_bucket(self, bucket: int):
        def cardinality(q: int) -> float:
            f = self.inst.machines[q].cardinality
            return math.inf if f is None else f

        while True:
            hybrids = [q for q in range(self.inst.m) if self.bucket[q] == bucket and self._kind(q) == "hybrid"]
            if len(hybrids) <= 1:
                return
            i = min(hybrids, key=lambda q: (cardinality(q), q))
            other = next(q for q in hybrids if q != i)
            large = next(S for S, v in sorted(self.z[other].items())
                         if len(S) == 1 and self.is_large(other, S[0]) and v > 0)
            small = next(S for S, v in sorted(self.z[i].items())
                         if v > 0 and not (len(S) == 1 and self.is_large(i, S[0])))
            amount = min(self.z[other][large], self.z[i][small],
                         1 - self.z[i].get(large, Fraction(0)), 1 - self.z[other].get(small, Fraction(0)))
            self._shift(other, large, small, amount)
            self._shift(i, small, large, amount)
            self.stats["bucket_pivots"] += 1

    def _pivot(self):
        while True:
            for bucket in sorted(set(self.bucket)):
                self._fix_bucket(bucket)
            large = [q for q in range(self.inst.m) if self._kind(q) == "large"]
            if not large:
                return
            self._fix_large_machine(large[0])

    def _remaining_supply(self) -> List[int]:
        left = list(self.supply.counts)
        for S in self.rounded.values():
            for j in S:
                left[j] -= 1
        if any(x < 0 for x in left):
            raise ContractViolation("Rounded machines overuse the supply")
        return left

    def _match_hybrids(self) -> Dict[int, int]:
        hybrids = [q for q in range(self.inst.m) if self._kind(q) == "hybrid"]
        keep = []
        for q in hybrids:
            if self._large_mass(q) <= 1 - Fraction(1, self.n_buckets):
                self.z[q] = {S: v for S, v in self.z[q].items() if not (len(S) == 1 and self.is_large(q, S[0]))}
                self.stats["dropped_hybrids"] += 1
            else:
                keep.append(q)
        taken: Dict[int, int] = {}
        if not keep:
            return taken
        left = self._remaining_supply()
        graph = nx.DiGraph()
        for q in keep:
            graph.add_edge("s", ("m", q), capacity=1)
            for S, v in self.z[q].items():
                if len(S) == 1 and self.is_large(q, S[0]) and v > 0 and left[S[0]] > 0:
                    graph.add_edge(("m", q), ("j", S[0]), capacity=1)
                    graph.add_edge(("j", S[0]), "t", capacity=left[S[0]])
        value, flow = nx.maximum_flow(graph, "s", "t") if "t" in graph else (0, {})
        if value < len(keep):
            raise ContractViolation(f"Only {value} of {len(keep)} hybrid machines could be matched")
        for q in keep:
            for target, amount in flow[("m", q)].items():
                if amount > 0:
                    j = target[1]
                    self.z[q] = {(j,): Fraction(1)}
                    self.rounded[q] = (j,)
                    taken[j] = taken.get(j, 0) + 1
        self.stats["matched_hybrids"] = len(keep)
        return taken

    def _round_small(self, taken: Dict[int, int]) -> Dict[int, List[int]]:
        small = [q for q in range(self.inst.m) if q not in self.rounded]
        if not small:
            return {}
        for q in small:
            row: Dict[Configuration, Fraction] = {}
            for S, v in self.z[q].items():
                T = _remove(S, taken)
                row[T] = row.get(T, Fraction(0)) + v
            self.z[q] = row
        left = self._remaining_supply()
        sub = CckpInstance(machines=tuple(Machine(self.inst.demand(q), self.inst.machines[q].cardinality)
                                          for q in small),
                           job_types=self.inst.job_types,
                           admissible=tuple(frozenset(pos for pos, q in enumerate(small) if not self.is_large(q, j))
                                            for j in range(self.inst.n)))
        z = self._residual_lp(sub, small, left)
        if z is None:
            self.logger.warning("Residual assignment LP cannot give every small machine its residual demand; "
                                "rounding the leftover configuration mass")
            z = self._leftover_point(small, left)
        allocation = ShmoysTardosRounder(sub, SupplyVector(tuple(left)), z).run()
        return {q: list(allocation.assignment[pos]) for pos, q in enumerate(small)}

    def residual_demand(self, q: int) -> Fraction:
        """2 * D_bar / (3 * log_ratio), the load a small machine keeps once the hybrids are matched."""
        return Fraction(2) * Fraction(self.rounded_demand[q]) / (3 * _snap(self.scale))

    def _residual_lp(self, sub: CckpInstance, small: List[int],
                     left: List[int]) -> Optional[Dict[Tuple[int, int], Any]]:
        """Assignment LP over small jobs and the remaining copies, with residual demand rows;
        maximizes the delivered capacity. None when the rows cannot all be met."""
        system = LinearSystem()
        for pos in range(sub.m):
            for j in range(sub.n):
                if sub.is_admissible(pos, j):
                    system.add_variable(z_name(pos, j))
        for j in range(sub.n):
            row = {z_name(pos, j): 1 for pos in range(sub.m) if sub.is_admissible(pos, j)}
            if row:
                system.add_constraint(row, LE, left[j], name=f"supply[{j}]")
        objective: Dict[str, Any] = {}
        for pos, q in enumerate(small):
            row = {z_name(pos, j): sub.job_types[j] for j in range(sub.n) if sub.is_admissible(pos, j)}
            if not row:
                self.stats["residual_lp"] = LpStatus.INFEASIBLE.value
                return None
            system.add_constraint(row, GE, self.residual_demand(q), name=f"demand[{pos}]")
            f = sub.machines[pos].cardinality
            if f is not None:
                system.add_constraint({name: 1 for name in row}, LE, f, name=f"cardinality[{pos}]")
            objective.update(row)
        system.set_objective(objective, maximize=True)
        outcome = solve(system, self.lp_config)
        self.stats["residual_lp"] = outcome.status.value
        if outcome.status == LpStatus.UNBOUNDED:
            raise ContractViolation("Residual assignment LP is unbounded")
        if not outcome.feasible:
            return None
        return assignment_from_point(sub, outcome.point)

    def _leftover_point(self, small: List[int], left: List[int]) -> Dict[Tuple[int, int], Fraction]:
        z: Dict[Tuple[int, int], Fraction] = {}
        for pos, q in enumerate(small):
            for S, v in self.z[q].items():
                for j in S:
                    z[(pos, j)] = z.get((pos, j), Fraction(0)) + v
        used: Dict[int, Fraction] = {}
        for (_, j), v in z.items():
            used[j] = used.get(j, Fraction(0)) + v
        for key in list(z):
            j = key[1]
            if used[j] > left[j]:
                # snapped float input can overshoot the supply by a rounding error
                z[key] = z[key] * left[j] / used[j]
        return z

    @log_exceptions
    def run(self) -> Allocation:
        if self.inst.m == 0:
            return Allocation(())
        self._split_large()
        self._pivot()
        taken = self._match_hybrids()
        lists = self._round_small(taken)
        for q, S in self.rounded.items():
            lists[q] = list(S)
        allocation = Allocation.from_lists([lists[q] for q in range(self.inst.m)])
        self.logger.debug(f"Configuration rounding: {len(self.rounded)} rounded machines, stats {self.stats}")
        return allocation


@log_exceptions
def conf_lp_round(inst: CckpInstance, supply: SupplyVector, sol: ConfigurationLpSolution,
                  lp_config: Optional[LpConfig] = None) -> Allocation:
    return ConfigurationRounder(inst, supply, sol, lp_config).run()

"""Membership and separation for the assignment and configuration supply polyhedra."""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from config import LpConfig, SeparationConfig, default_config
from conf_rounding import Configuration, ConfigurationLpSolution, configuration_violations
from core import CckpInstance
from helper import NumericHelper
from knapsack import max_knapsack_cardinality
from logging_config import ContractViolation, CutLimitReached, ModelError, get_logger, log_exceptions
from lp_engine import GE, LE, LinearSystem, solve
from maxmin_solvers import Assignment, assignment_from_point, assignment_violations, build_assignment_lp

logger = get_logger(__name__)

ASSIGNMENT = "assignment"
CONFIGURATION = "configuration"


@dataclass(frozen=True)
class SeparatingHyperplane:
    """Every member t of the polyhedron has sum_j alpha_j t_j >= constant; the query does not.

    For the assignment polyhedron the constant is sum_i beta_i D_i, for the
    configuration polyhedron it is sum_i beta_i.
    """

    alpha: Tuple[Any, ...]
    beta: Tuple[Any, ...]
    constant: Any
    polyhedron: str = ASSIGNMENT

    def value(self, point: Sequence[Any]) -> Any:
        return NumericHelper.exact_sum(a * s for a, s in zip(self.alpha, point))

    def separates(self, point: Sequence[Any], tol: float = 1e-9) -> bool:
        gap = self.constant - self.value(point)
        return gap > (0 if NumericHelper.is_exact(gap) else tol)

    def admits(self, point: Sequence[Any], tol: float = 1e-9) -> bool:
        gap = self.constant - self.value(point)
        return gap <= (0 if NumericHelper.is_exact(gap) else tol)


def _supply_point(supply: Any, n: int) -> List[Any]:
    counts = list(getattr(supply, "counts", supply))
    if len(counts) != n:
        raise ModelError(f"Supply has {len(counts)} entries, instance has {n} job types")
    point = [NumericHelper.to_number(s) for s in counts]
    if any(s < 0 for s in point):
        raise ModelError("Supply entries must be nonnegative")
    return point


def _snap_certificate(values: Sequence[Any]) -> List[Any]:
    return [Fraction(float(v)).limit_denominator(10 ** 9) if not NumericHelper.is_exact(v) else Fraction(v)
            for v in values]


def assignment_hyperplane(inst: CckpInstance, beta: Sequence[Any]) -> SeparatingHyperplane:
    """Scale beta to max 1 and take the smallest alpha with beta_i min(c_j, D_i) <= alpha_j."""
    top = max(beta)
    beta = [b / top for b in beta]
    alpha = []
    for j, c in enumerate(inst.job_types):
        values = [beta[i] * min(c, inst.demand(i)) for i in range(inst.m) if inst.is_admissible(i, j)]
        alpha.append(max(values) if values else Fraction(0))
    constant = NumericHelper.exact_sum(beta[i] * inst.demand(i) for i in range(inst.m))
    return SeparatingHyperplane(alpha=tuple(alpha), beta=tuple(beta), constant=constant, polyhedron=ASSIGNMENT)


@log_exceptions
def p_ass_membership(inst: CckpInstance, supply: Any,
                     config: Optional[LpConfig] = None) -> Union[Assignment, SeparatingHyperplane]:
    """Witness z for (supply, demand, nonnegativity) rows, or the hyperplane read off the LP's Farkas multipliers."""
    point = _supply_point(supply, inst.n)
    system = build_assignment_lp(inst, point, cardinality=False)
    outcome = solve(system, config or default_config.lp)
    if outcome.feasible:
        return assignment_from_point(inst, outcome.point)
    if outcome.certificate is None:
        raise ContractViolation("Infeasible assignment LP returned no certificate")
    multipliers = {con.name: lam for con, lam in zip(system.constraints, outcome.certificate)}
    beta = [max(multipliers.get(f"demand[{i}]", 0), 0) for i in range(inst.m)]
    if not max(beta, default=0) > 0:
        raise ContractViolation("Farkas multipliers vanish on every demand row")
    plane = assignment_hyperplane(inst, beta)
    if not plane.separates(point):
        plane = assignment_hyperplane(inst, _snap_certificate(beta))
        if not plane.separates(point):
            raise ContractViolation("Assignment hyperplane does not separate the supply point")
    logger.debug(f"Supply {point} outside the assignment polyhedron: alpha={plane.alpha}, beta={plane.beta}")
    return plane


def _column_name(c: int, k: int) -> str:
    return f"z[{c},{k}]"


class ConfigurationSeparator:
    """Column generation on the configuration LP with capacities inflated by (1 + epsilon).

    Machines sharing demand and cardinality form one class and share columns.
    Each round either the master is feasible (the point is accepted for demands
    D_i / (1 + epsilon)) or its Farkas multipliers give (alpha, beta); a
    cardinality knapsack then looks for a configuration with inflated value
    >= D_i and alpha-cost < beta_i. When none exists for any class, (alpha,
    beta) separates the point from the configuration polyhedron.
    """

    def __init__(self, inst: CckpInstance, supply: Any, epsilon: Any = None,
                 config: Optional[SeparationConfig] = None, lp_config: Optional[LpConfig] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.config = config or default_config.separation
        self.lp_config = lp_config or default_config.lp
        if inst.admissible is not None:
            raise ModelError("Configuration separation needs an unrestricted instance")
        self.epsilon = NumericHelper.rationalize(self.config.epsilon if epsilon is None else epsilon)
        if not self.epsilon > 0:
            raise ModelError(f"epsilon must be positive, got {self.epsilon}")
        self.inst = inst
        self.point = _supply_point(supply, inst.n)
        self.inflated = [(1 + self.epsilon) * c for c in inst.job_types]
        groups: Dict[Tuple[Any, Optional[int]], List[int]] = {}
        for i, machine in enumerate(inst.machines):
            groups.setdefault((machine.demand, machine.cardinality), []).append(i)
        self.classes = sorted(groups.values(), key=lambda members: members[0])
        self.columns: List[Tuple[int, Configuration]] = []
        self._seen = set()

    def _copies(self, c: int) -> List[int]:
        machine = self.inst.machines[self.classes[c][0]]
        copies = []
        for ct in self.inflated:
            need = math.ceil(machine.demand / ct)
            copies.append(need if machine.cardinality is None else min(need, machine.cardinality))
        return copies

    def _price(self, c: int, alpha: Sequence[Any], budget: Any) -> Optional[Configuration]:
        machine = self.inst.machines[self.classes[c][0]]
        result = max_knapsack_cardinality(alpha, self.inflated, self._copies(c), machine.cardinality, budget,
                                          self.config)
        if result.value < machine.demand:
            return None
        return tuple(j for j in range(self.inst.n) for _ in range(result.counts[j]))

    def _add_column(self, c: int, S: Configuration) -> bool:
        if (c, S) in self._seen:
            return False
        self._seen.add((c, S))
        self.columns.append((c, S))
        return True

    def _seed(self) -> Optional[SeparatingHyperplane]:
        zeros = [Fraction(0)] * self.inst.n
        for c, members in enumerate(self.classes):
            S = self._price(c, zeros, 1)
            if S is None:
                # no configuration of this class reaches its demand at all
                beta = [Fraction(1) if i in members else Fraction(0) for i in range(self.inst.m)]
                return SeparatingHyperplane(alpha=tuple(zeros), beta=tuple(beta), constant=Fraction(len(members)),
                                            polyhedron=CONFIGURATION)
            self._add_column(c, S)
            machine = self.inst.machines[members[0]]
            for j, ct in enumerate(self.inflated):
                k = math.ceil(machine.demand / ct)
                if machine.allows(k):
                    self._add_column(c, (j,) * k)
        return None

    def _master(self) -> LinearSystem:
        system = LinearSystem()
        cover: Dict[int, Dict[str, Any]] = {c: {} for c in range(len(self.classes))}
        usage: Dict[int, Dict[str, Any]] = {}
        for k, (c, S) in enumerate(self.columns):
            name = system.add_variable(_column_name(c, k))
            cover[c][name] = 1
            for j in S:
                usage.setdefault(j, {})
                usage[j][name] = usage[j].get(name, 0) + 1
        for c, members in enumerate(self.classes):
            system.add_constraint(cover[c], GE, len(members), name=f"cover[{c}]")
        for j in sorted(usage):
            system.add_constraint(usage[j], LE, self.point[j], name=f"supply[{j}]")
        return system

    def _accept(self, point: Dict[str, Any]) -> ConfigurationLpSolution:
        z: Dict[Tuple[int, Configuration], Any] = {}
        for c, members in enumerate(self.classes):
            entries = [(S, point[_column_name(cc, k)]) for k, (cc, S) in enumerate(self.columns)
                       if cc == c and point[_column_name(cc, k)] > 0]
            total = NumericHelper.exact_sum(v for _, v in entries)
            for i in members:
                for S, v in entries:
                    z[(i, S)] = z.get((i, S), 0) + v / total
        sol = ConfigurationLpSolution(z)
        problems = configuration_violations(self.inst, self.point, sol, demand_scale=1 / (1 + self.epsilon))
        if problems:
            raise ContractViolation("Accepted configuration point fails validation: " + "; ".join(problems[:3]))
        return sol

    def _hyperplane(self, alpha: Sequence[Any], beta_class: Sequence[Any]) -> SeparatingHyperplane:
        beta = [Fraction(0)] * self.inst.m
        for c, members in enumerate(self.classes):
            for i in members:
                beta[i] = beta_class[c]
        constant = NumericHelper.exact_sum(beta)
        return SeparatingHyperplane(alpha=tuple(alpha), beta=tuple(beta), constant=constant,
                                    polyhedron=CONFIGURATION)

    @log_exceptions
    def run(self) -> Union[ConfigurationLpSolution, SeparatingHyperplane]:
        if self.inst.m == 0:
            return ConfigurationLpSolution({})
        early = self._seed()
        if early is not None:
            self.logger.debug("A machine class has no configuration reaching its demand")
            return early
        for rounds in range(self.config.max_rounds):
            system = self._master()
            outcome = solve(system, self.lp_config)
            if outcome.feasible:
                self.logger.debug(f"Configuration master feasible after {rounds} rounds, {len(self.columns)} columns")
                return self._accept(outcome.point)
            if outcome.certificate is None:
                raise ContractViolation("Infeasible configuration master returned no certificate")
            multipliers = {con.name: lam for con, lam in zip(system.constraints, outcome.certificate)}
            beta = [max(multipliers.get(f"cover[{c}]", 0), 0) for c in range(len(self.classes))]
            alpha = [max(multipliers.get(f"supply[{j}]", 0), 0) for j in range(self.inst.n)]
            top = max(beta)
            if not top > 0:
                raise ContractViolation("Farkas multipliers vanish on every cover row")
            beta = [b / top for b in beta]
            alpha = [a / top for a in alpha]
            added = 0
            for c in range(len(self.classes)):
                S = self._price(c, alpha, beta[c])
                if S is not None and self._add_column(c, S):
                    added += 1
            if not added:
                plane = self._hyperplane(alpha, beta)
                if not plane.separates(self.point):
                    raise ContractViolation("Configuration hyperplane does not separate the supply point")
                self.logger.debug(f"Supply {self.point} separated after {rounds} rounds")
                return plane
            self.logger.debug(f"Round {rounds}: priced {added} new configurations")
        raise CutLimitReached(f"Configuration separation exceeded {self.config.max_rounds} rounds")


@log_exceptions
def p_conf_separation(inst: CckpInstance, supply: Any, epsilon: Any = None,
                      config: Optional[SeparationConfig] = None,
                      lp_config: Optional[LpConfig] = None) -> Union[ConfigurationLpSolution, SeparatingHyperplane]:
    return ConfigurationSeparator(inst, supply, epsilon, config, lp_config).run()


def validate_assignment_witness(inst: CckpInstance, supply: Any, z: Assignment, demand_scale: Any = 1,
                                cardinality: bool = False) -> List[str]:
    point = _supply_point(supply, inst.n)
    demands = [inst.demand(i) * demand_scale for i in range(inst.m)]
    return assignment_violations(inst, point, z, cardinality=cardinality, demands=demands)


def validate_configuration_witness(inst: CckpInstance, supply: Any, sol: ConfigurationLpSolution,
                                   demand_scale: Any = 1) -> List[str]:
    return configuration_violations(inst, _supply_point(supply, inst.n), sol, demand_scale=demand_scale)


def suffix_dominates(t: Sequence[Any], s: Sequence[Any], capacities: Sequence[Any]) -> bool:
    """Every suffix of types by ascending capacity holds at least as much in t as in s."""
    if not len(t) == len(s) == len(capacities):
        raise ModelError("Supply vectors and capacities must have equal length")
    order = sorted(range(len(capacities)), key=lambda j: (capacities[j], j))
    total_t: Any = Fraction(0)
    total_s: Any = Fraction(0)
    for j in reversed(order):
        total_t += t[j]
        total_s += s[j]
        if not NumericHelper.geq(total_t, total_s):
            return False
    return True


def _excess(value: Any) -> bool:
    return value > (0 if NumericHelper.is_exact(value) else 1e-12)


def _shift_assignment(inst: CckpInstance, t: Sequence[Any], z: Assignment, order: List[int]) -> Assignment:
    shifted: Dict[Tuple[int, int], Any] = {key: v for key, v in z.items() if v > 0}
    for pos, j in enumerate(order[:-1]):
        up = order[pos + 1]
        excess = NumericHelper.exact_sum(v for (i, jj), v in shifted.items() if jj == j) - t[j]
        for i in range(inst.m):
            if not _excess(excess):
                break
            value = shifted.get((i, j), 0)
            if value <= 0:
                continue
            take = min(value, excess)
            shifted[(i, j)] = value - take
            shifted[(i, up)] = shifted.get((i, up), 0) + take
            excess -= take
    return {key: v for key, v in shifted.items() if v > 0}


def _shift_configurations(t: Sequence[Any], sol: ConfigurationLpSolution,
                          order: List[int]) -> ConfigurationLpSolution:
    shifted: Dict[Tuple[int, Configuration], Any] = {key: v for key, v in sol.z.items() if v > 0}
    for pos, j in enumerate(order[:-1]):
        up = order[pos + 1]
        excess = NumericHelper.exact_sum(v * S.count(j) for (_, S), v in shifted.items()) - t[j]
        while _excess(excess):
            key = next((key for key in sorted(shifted) if j in key[1] and shifted[key] > 0), None)
            if key is None:
                raise ContractViolation(f"No configuration holds job type {j} while its supply is exceeded")
            i, S = key
            value = shifted[key]
            take = min(value, excess)
            rest = list(S)
            rest.remove(j)
            T = tuple(sorted(rest + [up]))
            shifted[key] = value - take
            if shifted[key] <= 0:
                del shifted[key]
            shifted[(i, T)] = shifted.get((i, T), 0) + take
            excess -= take
    return ConfigurationLpSolution(shifted)


@log_exceptions
def shift_witness(inst: CckpInstance, s: Sequence[Any], t: Sequence[Any],
                  witness: Union[Assignment, ConfigurationLpSolution],
                  demand_scale: Any = 1) -> Union[Assignment, ConfigurationLpSolution]:
    """Witness for supply t built from one for s by moving excess use of each job type to the next larger type."""
    if inst.admissible is not None:
        raise ModelError("Witness shifting needs an unrestricted instance")
    s = _supply_point(s, inst.n)
    t = _supply_point(t, inst.n)
    if not suffix_dominates(t, s, inst.job_types):
        raise ModelError("Target supply does not suffix-dominate the source supply")
    order = inst.ascending_types()
    if isinstance(witness, ConfigurationLpSolution):
        problems = configuration_violations(inst, s, witness, demand_scale=demand_scale)
        if problems:
            raise ModelError("Configuration witness rejected: " + "; ".join(problems[:3]))
        result: Union[Assignment, ConfigurationLpSolution] = _shift_configurations(t, witness, order)
        problems = configuration_violations(inst, t, result, demand_scale=demand_scale)
    else:
        problems = validate_assignment_witness(inst, s, witness, demand_scale=demand_scale)
        if problems:
            raise ModelError("Assignment witness rejected: " + "; ".join(problems[:3]))
        result = _shift_assignment(inst, t, witness, order)
        problems = validate_assignment_witness(inst, t, result, demand_scale=demand_scale)
    if problems:
        raise ContractViolation("Shifted witness fails validation: " + "; ".join(problems[:3]))
    return result

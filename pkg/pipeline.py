"""End-to-end MCKC solver: radius search, relaxation, decomposition, capacity transfer,
CCKP hand-off, integral client assignment."""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from assignment import CapacityTransfer, Opening, tightest_matching, transfer_capacities
from conf_rounding import ConfigurationLpSolution, conf_lp_round, guarantee_factor
from config import Backend, Config, Mode, default_config
from core import (Allocation, CckpInstance, Machine, McKcSolution, MckcInstance, QualityReport, SupplyVector,
                  evaluate_solution, require_valid)
from helper import NumericHelper
from logging_config import (ContractViolation, CutLimitReached, DecompositionError, FailureKind, InfeasibleRadius,
                            InstanceInfeasible, ModelError, get_logger, log_exceptions)
from lp_engine import GE, AggregateVariable, Constraint, Cut, CutStatus, LpStatus, cutting_plane_solve, solve
from maxmin_solvers import FarkasCertificate, greedy_qcmin
from oracles import brute_force_cckp
from qptas import qptas_cckp
from relaxation import FractionalSolution, build_relaxation, point_to_fractional, y_name
from reporting import RunTrace
from strong_decomposition import StrongDecomposition, extend_deleted
from strong_decomposition import decompose as strong_decompose
from supply_polyhedra import SeparatingHyperplane, p_conf_separation, shift_witness, suffix_dominates
from supply_polyhedra import validate_assignment_witness
from threshold_graph import C, F, ThresholdGraph, build
from weak_decomposition import WeakDecomposition, horizon_bound, to_cckp
from weak_decomposition import decompose as weak_decompose

logger = get_logger(__name__)


@dataclass
class PipelineResult:
    solution: McKcSolution
    report: QualityReport
    radius: Any
    mode: Mode
    # longest client-to-location hop path in the matching and the bound it is checked against
    hops: int
    hop_budget: int
    load_factor: Any
    capacity_budget: Any
    cuts: int = 0
    retried: bool = False
    transfer: Optional[CapacityTransfer] = None
    attempts: Dict[Any, str] = field(default_factory=dict)


@dataclass
class _Stage:
    """What a mode hands to installation and matching."""
    placements: Dict[int, List[int]]
    hops: int
    hop_budget: int
    capacity_budget: Any
    cuts: int = 0
    transfer: Optional[CapacityTransfer] = None


def matched_hops(g: ThresholdGraph, assignment: Dict[int, int]) -> Any:
    """Longest G-hop path from a client to the location it was matched to."""
    return max((g.hop_distance(C(j), F(i)) for j, i in assignment.items()), default=0)


def scale_demands(inst: CckpInstance, gamma: Any) -> CckpInstance:
    machines = tuple(Machine(demand=m.demand / gamma, cardinality=m.cardinality) for m in inst.machines)
    return CckpInstance(machines=machines, job_types=inst.job_types, admissible=inst.admissible)


def neighborhood_instance(inst: MckcInstance, d: StrongDecomposition, frac: FractionalSolution,
                          soft: bool) -> Tuple[CckpInstance, List[Any]]:
    """One machine per neighborhood, demand = weight of its clients, cardinality |T| (hard only),
    and the fractional supply y^T over all neighborhood locations."""
    machines = []
    for part in d.neighborhoods:
        demand = NumericHelper.exact_sum(inst.weights[j] for j in sorted(part.clients))
        machines.append(Machine(demand=demand, cardinality=None if soft else len(part.facilities)))
    job_types = tuple(inst.cap(p) for p in range(inst.n_types))
    y_t = frac.type_mass(d.neighborhood_facilities(), inst.n_types)
    return CckpInstance(machines=tuple(machines), job_types=job_types), y_t


def implied_witness(d: StrongDecomposition, frac: FractionalSolution, n_types: int) -> Dict[Tuple[int, int], Any]:
    """z[l, p] = sum of y[i, p] over the locations of neighborhood l."""
    z = {}
    for ell, part in enumerate(d.neighborhoods):
        for p in range(n_types):
            value = NumericHelper.exact_sum(frac.y_of(i, p) for i in part.facilities)
            if value > 0:
                z[(ell, p)] = value
    return z


class McKcPipeline:
    def __init__(self, inst: MckcInstance, config: Optional[Config] = None, trace: Optional[RunTrace] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.inst = require_valid(inst)
        self.config = config or default_config
        self.settings = self.config.pipeline
        self.mode = Mode(self.settings.mode)
        self.backend = Backend(self.settings.cckp_backend)
        self.delta = NumericHelper.rationalize(self.settings.delta)
        self.trace = trace or RunTrace()
        if not 0 < self.delta < 1:
            raise ModelError(f"delta must lie in (0, 1), got {self.delta}")
        if self.mode == Mode.STRONG_SOFT and not inst.soft:
            raise ModelError("strong-soft mode needs an instance with soft capacities")
        if self.backend == Backend.GREEDY and not inst.soft:
            raise ModelError("The greedy backend ignores cardinalities; use conf, qptas or brute for hard capacities")

    # -- CCKP hand-off -------------------------------------------------------------------------

    def _backend_factor(self, cckp: CckpInstance) -> Any:
        if self.backend == Backend.GREEDY:
            return Fraction(2)
        if self.backend == Backend.CONF_ROUND:
            gamma = 1 + NumericHelper.rationalize(self.config.separation.epsilon)
            if cckp.m == 0:
                return gamma
            return gamma * NumericHelper.rationalize(guarantee_factor(scale_demands(cckp, gamma)))
        if self.backend == Backend.QPTAS:
            return 1 / (1 - 3 * NumericHelper.rationalize(self.config.qptas.epsilon))
        return Fraction(1)

    def _solve_cckp(self, cckp: CckpInstance, supply: SupplyVector,
                    witness: Optional[ConfigurationLpSolution] = None) -> Allocation:
        if cckp.m == 0:
            return Allocation(())
        if self.backend == Backend.GREEDY:
            result = greedy_qcmin(cckp, supply)
            if isinstance(result, FarkasCertificate):
                raise InfeasibleRadius(FailureKind.BACKEND_INFEASIBLE,
                                       f"greedy stuck at machine {result.stuck}, Farkas certificate verified")
            return result
        if self.backend == Backend.CONF_ROUND:
            gamma = 1 + NumericHelper.rationalize(self.config.separation.epsilon)
            if witness is None:
                answer = p_conf_separation(cckp, supply.counts, gamma - 1, self.config.separation, self.config.lp)
                if isinstance(answer, SeparatingHyperplane):
                    raise InfeasibleRadius(FailureKind.BACKEND_INFEASIBLE,
                                           "supply separated from the configuration polyhedron")
                witness = answer
            return conf_lp_round(scale_demands(cckp, gamma), supply, witness, self.config.lp)
        if self.backend == Backend.QPTAS:
            allocation = qptas_cckp(cckp, supply, self.config.qptas.epsilon, self.config.qptas, self.config.lp)
            if allocation is None:
                raise InfeasibleRadius(FailureKind.BACKEND_INFEASIBLE, "no big-job guess admits the small jobs")
            return allocation
        result = brute_force_cckp(cckp, supply, self.config.oracle)
        if result.allocation is None or result.ratio < 1:
            raise InfeasibleRadius(FailureKind.BACKEND_INFEASIBLE, f"best allocation ratio {result.ratio} < 1")
        return result.allocation

    def _install(self, placements: Dict[int, List[int]], facilities: Sequence[int], jobs: Sequence[int]):
        """Largest jobs on the lowest-id locations, one per location; soft capacities stack on the first."""
        locations = sorted(facilities)
        ordered = sorted(jobs, key=lambda p: (-self.inst.cap(p), p))
        if not ordered:
            return
        if self.inst.soft:
            placements.setdefault(locations[0], []).extend(ordered)
            return
        if len(ordered) > len(locations):
            self.logger.warning(f"{len(ordered)} capacities for {len(locations)} locations, dropping the smallest")
        for i, p in zip(locations, ordered):
            placements.setdefault(i, []).append(p)

    # -- modes ---------------------------------------------------------------------------------

    def _weak(self, g: ThresholdGraph) -> _Stage:
        epsilon = NumericHelper.rationalize(self.config.decomposition.weak_epsilon)
        w: WeakDecomposition = weak_decompose(g, epsilon)
        for idx, part in enumerate(w.parts):
            self.trace.emit("part", index=idx, seed=part.seed, horizon=part.horizon,
                            facilities=part.facilities, clients=part.clients, deleted=part.boundary)
        cckp, supply = to_cckp(w, self.inst)
        allocation = self._solve_cckp(cckp, supply)
        placements: Dict[int, List[int]] = {}
        for part, jobs in zip(w.parts, allocation.assignment):
            self._install(placements, part.facilities, jobs)
        bound = horizon_bound(self.inst.n_clients, epsilon)
        reached = max((part.horizon for part in w.parts), default=2)
        if reached > bound:
            raise DecompositionError(f"Weak part reached horizon {reached} above the bound {bound}")
        return _Stage(placements=placements, hops=2 * reached - 1, hop_budget=2 * bound - 1,
                      capacity_budget=self._backend_factor(cckp) * (1 + epsilon))

    def _strong_hops(self, d: StrongDecomposition) -> int:
        c = d.constants
        base = max(c.roundable_diameter, c.neighborhood_diameter) + 1
        return base + 2 * c.horizon if d.deleted else base

    def _assert_implied(self, d: StrongDecomposition, frac: FractionalSolution, cckp: CckpInstance, y_t: List[Any]):
        problems = validate_assignment_witness(cckp, y_t, implied_witness(d, frac, self.inst.n_types))
        if problems:
            raise ContractViolation("Neighborhood supply outside the assignment polyhedron: "
                                    + "; ".join(problems[:3]))

    def _cut(self, plane: SeparatingHyperplane, d: StrongDecomposition, index: int) -> Cut:
        facilities = sorted(d.neighborhood_facilities())
        aggregates = []
        coeffs = {}
        for p in range(self.inst.n_types):
            name = f"Y{index}[{p}]"
            aggregates.append(AggregateVariable(name, {y_name(i, p): 1 for i in facilities}))
            if plane.alpha[p] != 0:
                coeffs[name] = plane.alpha[p]
        constraint = Constraint(coeffs, GE, plane.constant, name=f"supply_cut[{index}]")
        return Cut(constraint, aggregates, note=f"neighborhood supply cut over {len(facilities)} locations")

    def _strong(self, g: ThresholdGraph, hard: bool) -> _Stage:
        inst = self.inst
        system = build_relaxation(inst, g, soft=inst.soft)
        cuts = 0
        witness: Optional[ConfigurationLpSolution] = None
        if not hard:
            outcome = solve(system, self.config.lp)
            if outcome.status != LpStatus.FEASIBLE:
                raise InfeasibleRadius(FailureKind.LP_INFEASIBLE, f"relaxation infeasible at radius {g.radius}")
            frac = point_to_fractional(inst, g, outcome.point)
            d = strong_decompose(g, frac, self.delta, self.config.decomposition, soft=inst.soft)
            cckp, y_t = neighborhood_instance(inst, d, frac, inst.soft)
            self._assert_implied(d, frac, cckp, y_t)
        else:
            state: Dict[str, Any] = {}

            def separate(point: Dict[str, Any]) -> Optional[Cut]:
                frac = point_to_fractional(inst, g, point)
                d = strong_decompose(g, frac, self.delta, self.config.decomposition, soft=inst.soft)
                cckp, y_t = neighborhood_instance(inst, d, frac, inst.soft)
                answer = p_conf_separation(cckp, y_t, self.config.separation.epsilon, self.config.separation,
                                           self.config.lp)
                if isinstance(answer, ConfigurationLpSolution):
                    state.update(frac=frac, d=d, cckp=cckp, y_t=y_t, witness=answer)
                    return None
                cut = self._cut(answer, d, state.get("cuts", 0))
                state["cuts"] = state.get("cuts", 0) + 1
                self.trace.emit("cut", index=state["cuts"] - 1, alpha=answer.alpha, constant=answer.constant,
                                neighborhoods=len(d.neighborhoods))
                return cut

            try:
                result = cutting_plane_solve(system, separate, self.settings.max_cut_rounds, self.config.lp)
            except CutLimitReached as e:
                self.trace.emit("failure", kind=FailureKind.CUT_LIMIT, radius=g.radius, message=str(e))
                raise
            cuts = len(result.cuts)
            if result.status == CutStatus.INFEASIBLE:
                kind = FailureKind.CUT_PROVED_INFEASIBLE if cuts else FailureKind.LP_INFEASIBLE
                raise InfeasibleRadius(kind, f"relaxation with {cuts} supply cuts infeasible at radius {g.radius}")
            if result.status == CutStatus.CUT_LIMIT:
                self.trace.emit("failure", kind=FailureKind.CUT_LIMIT, radius=g.radius, cuts=cuts)
                raise CutLimitReached(f"{FailureKind.CUT_LIMIT}: {cuts} cuts at radius {g.radius}")
            if result.status != CutStatus.ACCEPTED:
                raise ContractViolation(f"Cutting planes ended with status {result.status}")
            frac, d, cckp, y_t, witness = (state[k] for k in ("frac", "d", "cckp", "y_t", "witness"))

        for event in d.events:
            self.trace.emit("iteration", **event)
        x_full = extend_deleted(d.x_hat, d.charge)
        floor = 1 - d.epsilon
        for j in d.deleted:
            mass = NumericHelper.exact_sum(v for (i, jj, p), v in x_full.items() if jj == j)
            if not NumericHelper.geq(mass, floor - 1e-7):
                raise DecompositionError(f"Deleted client {j} inherits only {mass} through its charge")

        n = inst.n_types
        s = [0] * n
        for part in d.roundable:
            for p, k in enumerate(part.rounding.type_counts(n)):
                s[p] += k
        y_s = frac.type_mass(d.roundable_facilities(), n)
        transfer = transfer_capacities(s, y_s, [inst.count(p) for p in range(n)])
        placements: Dict[int, List[int]] = {}
        for part in d.roundable:
            for (i, _), p in zip(part.rounding.openings, part.rounding.types):
                placements.setdefault(i, []).append(transfer.take(p))
        if not suffix_dominates(transfer.t, y_t, cckp.job_types):
            raise DecompositionError(f"Remaining supply {transfer.t} does not suffix-dominate {y_t}")
        supply = SupplyVector(transfer.t)
        if witness is not None and self.backend == Backend.CONF_ROUND and cckp.m:
            gamma = 1 + NumericHelper.rationalize(self.config.separation.epsilon)
            witness = shift_witness(cckp, y_t, transfer.t, witness, demand_scale=1 / gamma)
        else:
            witness = None
        allocation = self._solve_cckp(cckp, supply, witness)
        for part, jobs in zip(d.neighborhoods, allocation.assignment):
            self._install(placements, part.facilities, jobs)

        gamma = 1 + NumericHelper.rationalize(self.config.separation.epsilon) if hard else 1
        budget = self._strong_hops(d)
        return _Stage(placements=placements, hops=budget, hop_budget=budget,
                      capacity_budget=self._backend_factor(cckp) * gamma * (1 + 5 * self.delta),
                      cuts=cuts, transfer=transfer)

    # -- entry points --------------------------------------------------------------------------

    @log_exceptions
    def solve_at_radius(self, radius: Any) -> PipelineResult:
        radius = NumericHelper.to_number(radius)
        self.trace.emit("radius", radius=radius, mode=self.mode.value, backend=self.backend.value)
        try:
            return self._solve_at_radius(radius)
        except InfeasibleRadius as e:
            self.trace.emit("failure", kind=e.kind, radius=radius, message=str(e))
            raise

    def _solve_at_radius(self, radius: Any) -> PipelineResult:
        g = build(self.inst, radius)
        isolated = g.isolated_clients()
        if isolated:
            raise InfeasibleRadius(FailureKind.UNCOVERED_CLIENT,
                                   f"clients {isolated[:5]} have no facility within radius {radius}")
        if self.mode == Mode.WEAK:
            stage = self._weak(g)
        else:
            stage = self._strong(g, hard=self.mode == Mode.STRONG_HARD)
        opened: List[Opening] = [(i, p) for i, types in stage.placements.items() for p in types]
        upper = stage.capacity_budget
        retried = False
        assignment, load_factor = tightest_matching(g, opened, upper, stage.hops)
        if assignment is None and self.settings.retry_matching:
            upper = upper * (1 + self.delta)
            retried = True
            self.logger.info(f"Matching failed at radius {radius}, retrying with b={upper}")
            self.trace.emit("matching_retry", radius=radius, b=upper)
            assignment, load_factor = tightest_matching(g, opened, upper, stage.hops)
        if assignment is None:
            raise InfeasibleRadius(FailureKind.MATCHING_FAILED,
                                   f"no assignment within {stage.hops} hops at b={upper}")

        solution = McKcSolution(placements={i: tuple(sorted(types)) for i, types in stage.placements.items() if types},
                                assignment=assignment, radius_guess=radius)
        used = matched_hops(g, assignment)
        if used > stage.hop_budget:
            raise ContractViolation(f"Matching used {used} hops above the budget {stage.hop_budget}")
        report = evaluate_solution(self.inst, solution, radius)
        if not report.feasible_counts:
            raise ContractViolation(f"Placed counts {solution.placed_counts(self.inst.n_types)} exceed the profile")
        if not NumericHelper.leq(report.distance_factor, stage.hop_budget):
            raise ContractViolation(f"Distance factor {report.distance_factor} above hop budget {stage.hop_budget}")
        self.trace.emit("report", radius=radius, a=report.distance_factor, b=report.capacity_factor,
                        hops=used, hop_budget=stage.hop_budget, capacity_budget=upper, cuts=stage.cuts)
        self.logger.info(f"Radius {radius}: a={NumericHelper.format_number(report.distance_factor)}, "
                         f"b={NumericHelper.format_number(report.capacity_factor)}, {stage.cuts} cuts")
        return PipelineResult(solution=solution, report=report, radius=radius, mode=self.mode, hops=used,
                              hop_budget=stage.hop_budget, load_factor=load_factor, capacity_budget=upper,
                              cuts=stage.cuts, retried=retried, transfer=stage.transfer)

    @log_exceptions
    def guess_opt(self) -> PipelineResult:
        """Binary search over the sorted distinct facility-client distances."""
        radii = self.inst.candidate_radii()
        attempts: Dict[Any, str] = {}

        def attempt(k: int) -> Optional[PipelineResult]:
            try:
                result = self.solve_at_radius(radii[k])
                attempts[radii[k]] = "ok"
                return result
            except InfeasibleRadius as e:
                attempts[radii[k]] = e.kind
                self.logger.debug(f"Radius {radii[k]} failed: {e}")
                return None

        best = attempt(len(radii) - 1) if radii else None
        if best is None:
            raise InstanceInfeasible(f"No radius admits a solution (attempts: {attempts})")
        lo, hi = 0, len(radii) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            result = attempt(mid)
            if result is None:
                lo = mid + 1
            else:
                hi, best = mid, result
        best.attempts = attempts
        self.logger.info(f"Smallest successful radius {best.radius} after {len(attempts)} guesses")
        return best


@log_exceptions
def solve_at_radius(inst: MckcInstance, radius: Any, config: Optional[Config] = None,
                    trace: Optional[RunTrace] = None) -> PipelineResult:
    return McKcPipeline(inst, config, trace).solve_at_radius(radius)


@log_exceptions
def guess_opt(inst: MckcInstance, config: Optional[Config] = None, trace: Optional[RunTrace] = None) -> PipelineResult:
    return McKcPipeline(inst, config, trace).guess_opt()

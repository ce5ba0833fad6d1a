"""LP-guided partition of facilities into roundable sets and complete neighborhoods.

Each iteration picks the alive (location, type) with the largest effective
capacity and grows a ball around it. A ball that keeps expanding up to the
horizon becomes a roundable set; a ball that stops expanding earlier either
augments a nearby roundable set or becomes a complete neighborhood, and its
boundary clients are deleted and charged to the interior.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from config import DecompositionConfig, default_config
from core import MckcInstance
from helper import INFINITY, NumericHelper
from logging_config import DecompositionError, ModelError, get_logger, log_exceptions
from relaxation import Y_FLOOR, FractionalSolution, require_feasible
from threshold_graph import C, F, ThresholdGraph, is_client, is_facility

logger = get_logger(__name__)

BRANCH_ROUNDABLE = "roundable"
BRANCH_AUGMENT = "augment"
BRANCH_NEIGHBORHOOD = "neighborhood"


@dataclass(frozen=True)
class DecompositionConstants:
    delta: Any
    epsilon: Any
    horizon: int
    root_radius: int
    roundable_diameter: int
    neighborhood_diameter: int
    literal: bool


def decomposition_constants(delta: Any, config: Optional[DecompositionConfig] = None) -> DecompositionConstants:
    config = config or default_config.decomposition
    delta = NumericHelper.rationalize(delta)
    if not 0 < delta < 1:
        raise ModelError(f"delta must lie in (0, 1), got {delta}")
    if config.epsilon is not None:
        epsilon = NumericHelper.rationalize(config.epsilon)
    else:
        epsilon = min(Fraction(1, 12), delta / 100)
    if not 0 < epsilon < 1:
        raise ModelError(f"epsilon must lie in (0, 1), got {epsilon}")
    scale = math.log(1 / float(epsilon)) / float(epsilon)
    if config.horizon is not None:
        horizon = int(config.horizon)
        if horizon < 2 or horizon % 2:
            raise ModelError(f"horizon must be an even integer >= 2, got {config.horizon}")
    else:
        base = math.ceil(8 * scale)
        horizon = base + 1 if (base + 1) % 2 == 0 else base + 2
    root_radius = int(config.root_radius) if config.root_radius is not None else math.ceil(16 * scale)
    roundable = max(math.ceil(50 * scale), 2 * (root_radius + horizon - 1))
    literal = config.epsilon is None and config.horizon is None and config.root_radius is None
    return DecompositionConstants(delta=delta, epsilon=epsilon, horizon=horizon, root_radius=root_radius,
                                  roundable_diameter=roundable, neighborhood_diameter=2 * horizon,
                                  literal=literal)


@dataclass
class Rounding:
    """Integral openings of a roundable set.

    `openings` lists (location, class exponent); `class_values[u]` is the
    class capacity (1+eps)^u and `types[k]` the smallest real type covering
    opening k.
    """
    openings: List[Tuple[int, int]]
    class_values: Dict[int, Any]
    types: List[int]
    masses: Dict[int, Any] = field(default_factory=dict)

    def opened_capacity(self) -> Any:
        return NumericHelper.exact_sum(self.class_values[u] for _, u in self.openings)

    def type_counts(self, n_types: int) -> List[int]:
        counts = [0] * n_types
        for q in self.types:
            counts[q] += 1
        return counts


@dataclass
class RoundableSet:
    facilities: Set[int]
    root: int
    augmented: Set[int] = field(default_factory=set)
    rounding: Optional[Rounding] = None


@dataclass(frozen=True)
class Neighborhood:
    facilities: FrozenSet[int]
    clients: FrozenSet[int]
    root: int


@dataclass
class RoundableReport:
    diameter: Any
    diameter_ok: bool
    suffix_ok: bool
    served: Any
    opened: Any
    demand_ok: bool
    # served demand against max frozen effc / eps^3, filled in by the decomposer
    mass_bound: Any = None
    mass_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.diameter_ok and self.suffix_ok and self.demand_ok


@dataclass
class StrongDecomposition:
    roundable: List[RoundableSet]
    neighborhoods: List[Neighborhood]
    covered: FrozenSet[int]
    bounded: FrozenSet[int]
    deleted: FrozenSet[int]
    charge: Dict[int, Dict[int, Any]]
    x_hat: Dict[Tuple[int, int, int], Any]
    effc: Dict[Tuple[int, int], Any]
    constants: DecompositionConstants
    events: List[Dict[str, Any]] = field(default_factory=list)
    reports: List[RoundableReport] = field(default_factory=list)

    @property
    def epsilon(self) -> Any:
        return self.constants.epsilon

    @property
    def delta(self) -> Any:
        return self.constants.delta

    def roundable_facilities(self) -> Set[int]:
        return set().union(*(s.facilities for s in self.roundable)) if self.roundable else set()

    def neighborhood_facilities(self) -> Set[int]:
        return set().union(*(n.facilities for n in self.neighborhoods)) if self.neighborhoods else set()


def effective_capacity(H: ThresholdGraph, x_hat: Dict[Tuple[int, int, int], Any],
                       y: Dict[Tuple[int, int], Any], i: int, p: int) -> Any:
    """Weighted demand of alive clients served by (i, p) per unit of opening."""
    opening = y.get((i, p), 0)
    if not opening > Y_FLOOR:
        raise ModelError(f"Effective capacity undefined for closed pair ({i},{p})")
    if not H.is_alive(F(i)):
        raise ModelError(f"Location {i} is already assigned")
    weights = H.inst.weights
    served = NumericHelper.exact_sum(weights[j] * x_hat.get((i, j, p), 0)
                                     for j in H.client_neighbors(i) if H.is_alive(C(j)))
    return served / opening


def _bucket(value: Any, base: Any) -> int:
    u = math.floor(math.log(float(value)) / math.log(float(base)))
    while base ** (u + 1) <= value:
        u += 1
    while base ** u > value:
        u -= 1
    return u


def round_roundable_set(S: Iterable[int], effc: Dict[Tuple[int, int], Any], y: Dict[Tuple[int, int], Any],
                        epsilon: Any, inst: MckcInstance, soft: Optional[bool] = None) -> Rounding:
    """Bucket (i,p) by effective capacity in powers of 1+eps and open floor(mass) per bucket.

    Hard capacities take distinct locations, lowest id first, largest class
    first; soft capacities wrap around and stack.
    """
    soft = inst.soft if soft is None else soft
    base = 1 + epsilon
    locations = sorted(S)
    masses: Dict[int, Any] = {}
    for i in locations:
        for p in range(inst.n_types):
            opening = y.get((i, p), 0)
            value = effc.get((i, p), 0)
            if opening > Y_FLOOR and value > 0:
                u = _bucket(value, base)
                masses[u] = masses.get(u, 0) + opening
    counts = {u: NumericHelper.floor(mass) for u, mass in masses.items()}
    needed = sum(counts.values())
    if not soft and needed > len(locations):
        raise DecompositionError(f"Roundable set with {len(locations)} locations needs {needed} openings")
    openings: List[Tuple[int, int]] = []
    types: List[int] = []
    class_values: Dict[int, Any] = {}
    cursor = 0
    for u in sorted(counts, reverse=True):
        class_values[u] = base ** u
        tol = NumericHelper.tolerance(class_values[u])
        q = next((q for q in range(inst.n_types) if inst.cap(q) >= class_values[u] - tol), inst.n_types - 1)
        for _ in range(counts[u]):
            openings.append((locations[cursor % len(locations)], u))
            types.append(q)
            cursor += 1
    return Rounding(openings=openings, class_values=class_values, types=types, masses=masses)


def roundable_mass_bound(S: Iterable[int], effc: Dict[Tuple[int, int], Any], epsilon: Any) -> Any:
    """Largest frozen effective capacity in S over eps^3; a roundable set serves at least this much."""
    members = set(S)
    values = [value for (i, _), value in effc.items() if i in members]
    return max(values) / epsilon ** 3 if values else 0


def served_demand(inst: MckcInstance, S: Iterable[int], x_hat: Dict[Tuple[int, int, int], Any]) -> Any:
    members = set(S)
    return NumericHelper.exact_sum(inst.weights[j] * value for (i, j, p), value in x_hat.items() if i in members)


def verify_roundable(g: ThresholdGraph, S: Iterable[int], rounding: Rounding,
                     x_hat: Dict[Tuple[int, int, int], Any], y: Dict[Tuple[int, int], Any],
                     a: Any, b: Any, real_capacities: bool = False) -> RoundableReport:
    inst = g.inst
    members = sorted(set(S))
    diameter = g.hop_diameter(F(i) for i in members) if members else 0
    diameter_ok = diameter is not INFINITY and diameter <= a
    suffix_ok = True
    for p in range(inst.n_types):
        opened = sum(1 for q in rounding.types if q >= p)
        mass = NumericHelper.exact_sum(y.get((i, q), 0) for i in members for q in range(p, inst.n_types))
        if opened > NumericHelper.floor(mass):
            suffix_ok = False
    served = served_demand(inst, members, x_hat)
    if real_capacities:
        opened_capacity = NumericHelper.exact_sum(inst.cap(q) for q in rounding.types)
    else:
        opened_capacity = rounding.opened_capacity()
    demand_ok = NumericHelper.leq(served, b * opened_capacity)
    return RoundableReport(diameter=diameter, diameter_ok=diameter_ok, suffix_ok=suffix_ok,
                           served=served, opened=opened_capacity, demand_ok=demand_ok)


def verify_complete_neighborhood(g: ThresholdGraph, T: Iterable[int], J: Iterable[int]) -> bool:
    members = set(T)
    return all(set(g.facility_neighbors(j)) <= members for j in J)


def extend_deleted(x_prime: Dict[Tuple[int, int, int], Any],
                   phi: Dict[int, Dict[int, Any]]) -> Dict[Tuple[int, int, int], Any]:
    """Give each deleted client the phi-mixture of its targets' connections."""
    by_client: Dict[int, List[Tuple[int, int, Any]]] = {}
    for (i, j, p), value in x_prime.items():
        by_client.setdefault(j, []).append((i, p, value))
    x = dict(x_prime)
    for j, row in phi.items():
        if not NumericHelper.is_zero(NumericHelper.exact_sum(row.values()) - 1):
            raise ModelError(f"Charge row of client {j} does not sum to 1")
        for target, share in row.items():
            for i, p, value in by_client.get(target, []):
                x[(i, j, p)] = x.get((i, j, p), 0) + share * value
    return x


class StrongDecomposer:
    def __init__(self, g: ThresholdGraph, frac: FractionalSolution, delta: Any,
                 config: Optional[DecompositionConfig] = None, soft: Optional[bool] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.g = g
        self.inst = g.inst
        self.soft = self.inst.soft if soft is None else soft
        self.frac = require_feasible(self.inst, g, frac, soft=self.soft)
        self.constants = decomposition_constants(delta, config)
        self.H = g.fork()
        self.x_hat = dict(frac.x)
        self.frozen: Dict[Tuple[int, int], Any] = {}
        self.roundable: List[RoundableSet] = []
        self.neighborhoods: List[Neighborhood] = []
        self.covered: Set[int] = set()
        self.bounded: Set[int] = set()
        self.deleted: Set[int] = set()
        self.charge: Dict[int, Dict[int, Any]] = {}
        self.events: List[Dict[str, Any]] = []
        self.by_client: Dict[int, List[Tuple[int, int]]] = {}
        for (i, j, p) in frac.x:
            self.by_client.setdefault(j, []).append((i, p))

    def _in_roundable(self) -> Set[int]:
        return set().union(*(s.facilities for s in self.roundable)) if self.roundable else set()

    def _check_invariants(self):
        for part in self.neighborhoods:
            for i in part.facilities:
                alive = [j for j in self.g.client_neighbors(i) if self.H.is_alive(C(j))]
                if alive:
                    raise DecompositionError(f"Neighborhood location {i} still has unassigned clients {alive[:3]}")
        for s in self.roundable:
            for i in s.augmented:
                alive = [j for j in self.g.client_neighbors(i) if self.H.is_alive(C(j))]
                if alive:
                    raise DecompositionError(f"Augmented location {i} still has unassigned clients {alive[:3]}")

    def _current_effc(self) -> Dict[Tuple[int, int], Any]:
        values = {}
        for i in self.H.alive_facilities():
            for p in range(self.inst.n_types):
                if self.frac.y_of(i, p) > Y_FLOOR:
                    values[(i, p)] = effective_capacity(self.H, self.x_hat, self.frac.y, i, p)
        return values

    def _freeze(self, facilities: Iterable[int], effc: Dict[Tuple[int, int], Any]):
        for i in facilities:
            for p in range(self.inst.n_types):
                if (i, p) in effc:
                    self.frozen[(i, p)] = effc[(i, p)]

    def _scan(self, star: int) -> Tuple[int, set, set]:
        eps = self.constants.epsilon
        t_bar = 1
        while t_bar < self.constants.horizon:
            inside, boundary = self.H.layered_neighborhood(F(star), t_bar)
            n_inside = sum(1 for v in inside if is_client(v))
            if len(boundary) < eps * n_inside:
                return t_bar, inside, boundary
            t_bar += 2
        return t_bar, set(), set()

    def _absorb(self, forced: Iterable[int]) -> List[int]:
        """Move forced clients and every alive client mostly served by roundable sets into C_b."""
        in_s = self._in_roundable()
        threshold = 1 - self.constants.epsilon
        chosen = set(forced)
        for j in self.H.alive_clients():
            mass = NumericHelper.exact_sum(self.frac.x[(i, j, p)] for i, p in self.by_client.get(j, [])
                                           if i in in_s)
            if mass > threshold:
                chosen.add(j)
        for j in chosen:
            for i, p in self.by_client.get(j, []):
                if i not in in_s:
                    self.x_hat.pop((i, j, p), None)
        self.covered |= chosen
        self.H.delete(C(j) for j in chosen)
        return sorted(chosen)

    def _charge(self, boundary: Iterable[int], interior: Iterable[int]):
        interior = sorted(interior)
        share = Fraction(1, len(interior))
        for j in sorted(boundary):
            self.charge[j] = {jp: share for jp in interior}
            self.deleted.add(j)
        self.H.delete(C(j) for j in boundary)

    def _nearest_root(self, star: int) -> Optional[int]:
        best = None
        for k, s in enumerate(self.roundable):
            d = self.g.hop_distance(F(star), F(s.root))
            if d is INFINITY or d > self.constants.root_radius:
                continue
            key = (d, s.root)
            if best is None or key < best[0]:
                best = (key, k)
        return None if best is None else best[1]

    def _iteration(self, iteration: int):
        self._check_invariants()
        effc = self._current_effc()
        if not effc:
            raise DecompositionError(f"Clients {self.H.alive_clients()[:3]} remain but no open location is alive")
        star, p_star = min(effc, key=lambda key: (-effc[key], key))
        t_bar, inside, boundary = self._scan(star)
        event: Dict[str, Any] = {"iteration": iteration, "location": star, "type": p_star,
                                 "effc": NumericHelper.format_number(effc[(star, p_star)]), "t_bar": t_bar}
        horizon = self.constants.horizon
        if t_bar == horizon + 1:
            levels = self.H.layered_neighborhood(F(star), horizon)[0]
            S = {v[1] for v in levels if is_facility(v)}
            interior = sorted(v[1] for v in self.H.layered_neighborhood(F(star), horizon - 1)[0] if is_client(v))
            if self.constants.literal:
                near = sum(1 for j in self.H.client_neighbors(star) if self.H.is_alive(C(j)))
                if len(interior) < (1 + self.constants.epsilon) ** (horizon // 2) * near - 1e-9:
                    raise DecompositionError(f"Expanding ball around {star} lacks the growth bound")
            self._freeze(S, effc)
            self.roundable.append(RoundableSet(facilities=set(S), root=star))
            self.H.delete(F(i) for i in S)
            absorbed = self._absorb(interior)
            event.update(branch=BRANCH_ROUNDABLE, facilities=sorted(S), covered=absorbed)
        else:
            F_tent = {v[1] for v in inside if is_facility(v)}
            J_int = {v[1] for v in inside if is_client(v)}
            J_ext = {v[1] for v in boundary if is_client(v)}
            self._charge(J_ext, J_int)
            self._freeze(F_tent, effc)
            self.H.delete(F(i) for i in F_tent)
            k = self._nearest_root(star)
            if k is not None:
                target = self.roundable[k]
                target.facilities |= F_tent
                target.augmented |= F_tent
                absorbed = self._absorb(J_int)
                event.update(branch=BRANCH_AUGMENT, root=target.root, facilities=sorted(F_tent),
                             covered=absorbed, deleted=sorted(J_ext))
            else:
                self.neighborhoods.append(Neighborhood(frozenset(F_tent), frozenset(J_int), star))
                self.bounded |= J_int
                self.H.delete(C(j) for j in J_int)
                event.update(branch=BRANCH_NEIGHBORHOOD, facilities=sorted(F_tent), clients=sorted(J_int),
                             deleted=sorted(J_ext))
        self.logger.debug(f"Iteration {iteration}: {event['branch']} around ({star},{p_star}), t_bar={t_bar}")
        self.events.append(event)

    def _finish(self) -> StrongDecomposition:
        c = self.constants
        reports = []
        for s in self.roundable:
            s.rounding = round_roundable_set(s.facilities, self.frozen, self.frac.y, c.epsilon, self.inst,
                                             soft=self.soft)
            report = verify_roundable(self.g, s.facilities, s.rounding, self.x_hat, self.frac.y,
                                      c.roundable_diameter, 1 + c.delta)
            report.mass_bound = roundable_mass_bound(s.facilities, self.frozen, c.epsilon)
            report.mass_ok = NumericHelper.geq(report.served, report.mass_bound)
            reports.append(report)
            if not report.diameter_ok or not report.suffix_ok:
                raise DecompositionError(f"Roundable set rooted at {s.root} fails roundability: {report}")
            if not report.mass_ok:
                if c.literal:
                    raise DecompositionError(f"Roundable set rooted at {s.root} serves {report.served} "
                                             f"below {report.mass_bound}")
                self.logger.debug(f"Roundable set rooted at {s.root} serves {report.served} below "
                                  f"{report.mass_bound} under overridden constants")
            if not report.demand_ok:
                if c.literal:
                    raise DecompositionError(f"Roundable set rooted at {s.root} overloads its openings: {report}")
                self.logger.warning(f"Roundable set rooted at {s.root} serves {report.served} "
                                    f"above (1+delta) x {report.opened} under overridden constants")
        for part in self.neighborhoods:
            if not verify_complete_neighborhood(self.g, part.facilities, part.clients):
                raise DecompositionError(f"Neighborhood rooted at {part.root} is not complete")
            if part.facilities:
                diameter = self.g.hop_diameter(F(i) for i in part.facilities)
                if diameter is INFINITY or diameter > c.neighborhood_diameter:
                    raise DecompositionError(f"Neighborhood rooted at {part.root} has diameter {diameter}")
        column: Dict[int, Any] = {}
        for j, row in self.charge.items():
            for jp, share in row.items():
                column[jp] = column.get(jp, 0) + share
        for jp, total in column.items():
            if total > c.epsilon:
                raise DecompositionError(f"Client {jp} carries charge {total} above {c.epsilon}")
        in_s = self._in_roundable()
        floor = 1 - c.epsilon
        for j in self.covered:
            mass = NumericHelper.exact_sum(value for (i, jj, p), value in self.x_hat.items()
                                           if jj == j and i in in_s)
            if not NumericHelper.geq(mass, floor):
                raise DecompositionError(f"Covered client {j} keeps only {mass} on roundable sets")
        return StrongDecomposition(
            roundable=self.roundable,
            neighborhoods=self.neighborhoods,
            covered=frozenset(self.covered),
            bounded=frozenset(self.bounded),
            deleted=frozenset(self.deleted),
            charge=self.charge,
            x_hat=self.x_hat,
            effc=dict(self.frozen),
            constants=c,
            events=self.events,
            reports=reports,
        )

    @log_exceptions
    def run(self) -> StrongDecomposition:
        iteration = 0
        limit = self.inst.n_clients + self.inst.n_facilities
        while self.H.alive_clients():
            iteration += 1
            if iteration > limit:
                raise DecompositionError(f"No progress after {limit} iterations")
            self._iteration(iteration)
        self._check_invariants()
        result = self._finish()
        self.logger.info(f"Strong decomposition: {len(result.roundable)} roundable sets, "
                         f"{len(result.neighborhoods)} neighborhoods, |C_b|={len(result.covered)}, "
                         f"|C_bb|={len(result.bounded)}, |C_d|={len(result.deleted)}")
        return result


@log_exceptions
def decompose(g: ThresholdGraph, frac: FractionalSolution, delta: Any,
              config: Optional[DecompositionConfig] = None, soft: Optional[bool] = None) -> StrongDecomposition:
    return StrongDecomposer(g, frac, delta, config, soft).run()

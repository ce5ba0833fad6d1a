"""JSON codec shared by every command.

Numbers are written as integers, "p/q" strings or decimals, distances may be
"inf". Parse errors name the offending element with a slash path such as
/distance/2/1.
"""
import json
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from conf_rounding import ConfigurationLpSolution
from core import (Allocation, CapacityType, CckpInstance, Machine, McKcSolution, MckcInstance, QualityReport,
                  SupplyVector)
from helper import NumericHelper
from logging_config import ModelError, get_logger
from maxmin_solvers import FarkasCertificate
from relaxation import FractionalSolution
from strong_decomposition import (DecompositionConstants, Neighborhood, RoundableReport, RoundableSet, Rounding,
                                  StrongDecomposition)
from supply_polyhedra import SeparatingHyperplane
from weak_decomposition import WeakDecomposition, WeakPart

logger = get_logger(__name__)

num = NumericHelper.format_number


class Node:
    """A parsed JSON value together with its path, for error messages."""

    def __init__(self, value: Any, path: str = ""):
        self.value = value
        self.path = path

    def fail(self, message: str):
        raise ModelError(f"{self.path or '/'}: {message}")

    def get(self, key: str, default: Any = ...) -> "Node":
        if not isinstance(self.value, dict):
            self.fail("expected an object")
        if key not in self.value:
            if default is ...:
                self.fail(f"missing key {key!r}")
            return Node(default, f"{self.path}/{key}")
        return Node(self.value[key], f"{self.path}/{key}")

    def has(self, key: str) -> bool:
        return isinstance(self.value, dict) and self.value.get(key) is not None

    def items(self) -> List["Node"]:
        if not isinstance(self.value, list):
            self.fail("expected an array")
        return [Node(v, f"{self.path}/{k}") for k, v in enumerate(self.value)]

    def entries(self) -> List[tuple]:
        if not isinstance(self.value, dict):
            self.fail("expected an object")
        return [(k, Node(v, f"{self.path}/{k}")) for k, v in self.value.items()]

    def number(self) -> Any:
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float, str)):
            self.fail(f"expected a number, got {self.value!r}")
        try:
            return NumericHelper.to_number(self.value)
        except (ValueError, ZeroDivisionError):
            self.fail(f"not a number: {self.value!r}")

    def integer(self) -> int:
        value = self.number()
        if not NumericHelper.is_exact(value) or value != int(value):
            self.fail(f"expected an integer, got {self.value!r}")
        return int(value)

    def index(self, key: str) -> int:
        try:
            return int(key)
        except ValueError:
            self.fail(f"expected an integer key, got {key!r}")

    def boolean(self) -> bool:
        if not isinstance(self.value, bool):
            self.fail(f"expected true or false, got {self.value!r}")
        return self.value

    def numbers(self) -> List[Any]:
        return [n.number() for n in self.items()]

    def integers(self) -> List[int]:
        return [n.integer() for n in self.items()]

    def kind(self, *expected: str) -> str:
        kind = self.get("kind", expected[0]).value
        if kind not in expected:
            self.fail(f"kind {kind!r} is not one of {expected}")
        return kind


# -- instances ---------------------------------------------------------------------------------

def emit_mckc(inst: MckcInstance) -> Dict[str, Any]:
    return {
        "kind": "mckc",
        "facilities": list(inst.facilities),
        "clients": list(inst.clients),
        "distance": [[num(d) for d in row] for row in inst.distance],
        "weights": [num(w) for w in inst.weights],
        "capacities": [{"count": c.count, "capacity": num(c.capacity)} for c in inst.capacities],
        "soft": inst.soft,
    }


def parse_mckc(node: Node) -> MckcInstance:
    node.kind("mckc")
    facilities = tuple(n.value for n in node.get("facilities").items())
    clients = tuple(n.value for n in node.get("clients").items())
    distance = tuple(tuple(row.numbers()) for row in node.get("distance").items())
    if node.has("weights"):
        weights = tuple(node.get("weights").numbers())
    else:
        weights = tuple(NumericHelper.to_number(1) for _ in clients)
    capacities = tuple(CapacityType(c.get("count").integer(), c.get("capacity").number())
                       for c in node.get("capacities").items())
    soft = node.get("soft", False).boolean()
    return MckcInstance(facilities=facilities, clients=clients, distance=distance, weights=weights,
                        capacities=capacities, soft=soft)


def emit_cckp(inst: CckpInstance) -> Dict[str, Any]:
    return {
        "kind": "cckp",
        "machines": [{"demand": num(m.demand), "cardinality": m.cardinality} for m in inst.machines],
        "job_types": [num(c) for c in inst.job_types],
        "admissible": None if inst.admissible is None else [sorted(a) for a in inst.admissible],
    }


def parse_cckp(node: Node) -> CckpInstance:
    node.kind("cckp")
    machines = []
    for m in node.get("machines").items():
        card = m.get("cardinality", None)
        machines.append(Machine(demand=m.get("demand").number(),
                                cardinality=None if card.value is None else card.integer()))
    job_types = tuple(node.get("job_types").numbers())
    admissible = None
    if node.has("admissible"):
        admissible = tuple(frozenset(a.integers()) for a in node.get("admissible").items())
        if len(admissible) != len(job_types):
            node.get("admissible").fail("one machine list per job type required")
    for i, m in enumerate(machines):
        if not m.demand > 0:
            node.get("machines").fail(f"machine {i} needs a positive demand")
    return CckpInstance(machines=tuple(machines), job_types=job_types, admissible=admissible)


def emit_supply(supply: SupplyVector) -> Dict[str, Any]:
    return {"kind": "supply", "counts": list(supply.counts)}


def parse_supply(node: Node) -> SupplyVector:
    node.kind("supply")
    counts = node.get("counts")
    try:
        return SupplyVector(tuple(counts.integers()))
    except ModelError as e:
        counts.fail(str(e))


def parse_supply_point(node: Node) -> List[Any]:
    """Fractional supply point; accepts the supply kind as well as a bare array."""
    if isinstance(node.value, list):
        return node.numbers()
    node.kind("supply", "supply-point")
    return node.get("counts").numbers()


# -- solutions and reports ---------------------------------------------------------------------

def emit_solution(sol: McKcSolution) -> Dict[str, Any]:
    return {
        "kind": "mckc-solution",
        "radius_guess": num(sol.radius_guess),
        "placements": {str(i): list(types) for i, types in sorted(sol.placements.items())},
        "assignment": {str(j): i for j, i in sorted(sol.assignment.items())},
    }


def parse_solution(node: Node) -> McKcSolution:
    node.kind("mckc-solution")
    placements = {node.index(k): tuple(v.integers()) for k, v in node.get("placements").entries()}
    assignment = {node.index(k): v.integer() for k, v in node.get("assignment").entries()}
    return McKcSolution(placements=placements, assignment=assignment,
                        radius_guess=node.get("radius_guess").number())


def emit_report(report: QualityReport) -> Dict[str, Any]:
    return {
        "kind": "quality-report",
        "max_assignment_distance": num(report.max_assignment_distance),
        "distance_factor": num(report.distance_factor),
        "capacity_factor": num(report.capacity_factor),
        "feasible_counts": report.feasible_counts,
        "per_facility_load": {str(i): num(v) for i, v in sorted(report.per_facility_load.items())},
        "per_facility_capacity": {str(i): num(v) for i, v in sorted(report.per_facility_capacity.items())},
    }


def parse_report(node: Node) -> QualityReport:
    node.kind("quality-report")
    return QualityReport(
        max_assignment_distance=node.get("max_assignment_distance").number(),
        per_facility_load={node.index(k): v.number() for k, v in node.get("per_facility_load").entries()},
        distance_factor=node.get("distance_factor").number(),
        capacity_factor=node.get("capacity_factor").number(),
        feasible_counts=node.get("feasible_counts").boolean(),
        per_facility_capacity={node.index(k): v.number()
                               for k, v in node.get("per_facility_capacity", {}).entries()},
    )


def emit_allocation(allocation: Allocation) -> Dict[str, Any]:
    return {"kind": "allocation", "assignment": [list(items) for items in allocation.assignment]}


def parse_allocation(node: Node) -> Allocation:
    node.kind("allocation")
    return Allocation.from_lists([items.integers() for items in node.get("assignment").items()])


# -- decompositions ----------------------------------------------------------------------------

def _charge(charge: Dict[int, Dict[int, Any]]) -> Dict[str, Any]:
    return {str(j): {str(t): num(v) for t, v in sorted(row.items())} for j, row in sorted(charge.items())}


def _parse_charge(node: Node) -> Dict[int, Dict[int, Any]]:
    return {node.index(j): {row.index(t): v.number() for t, v in row.entries()} for j, row in node.entries()}


def emit_weak(w: WeakDecomposition) -> Dict[str, Any]:
    return {
        "kind": "weak-decomposition",
        "epsilon": num(w.epsilon),
        "parts": [{"facilities": sorted(p.facilities), "clients": sorted(p.clients), "seed": p.seed,
                   "horizon": p.horizon, "boundary": sorted(p.boundary)} for p in w.parts],
        "deleted": sorted(w.deleted),
        "charge": _charge(w.charge),
    }


def parse_weak(node: Node) -> WeakDecomposition:
    node.kind("weak-decomposition")
    parts = [WeakPart(facilities=frozenset(p.get("facilities").integers()),
                      clients=frozenset(p.get("clients").integers()),
                      seed=p.get("seed").integer(), horizon=p.get("horizon").integer(),
                      boundary=frozenset(p.get("boundary", []).integers()))
             for p in node.get("parts").items()]
    return WeakDecomposition(parts=parts, deleted=frozenset(node.get("deleted").integers()),
                             charge=_parse_charge(node.get("charge")), epsilon=node.get("epsilon").number())


def _emit_rounding(r: Optional[Rounding]) -> Optional[Dict[str, Any]]:
    if r is None:
        return None
    return {
        "openings": [list(o) for o in r.openings],
        "class_values": {str(u): num(v) for u, v in sorted(r.class_values.items())},
        "types": list(r.types),
        "masses": {str(u): num(v) for u, v in sorted(r.masses.items())},
    }


def _parse_rounding(node: Node) -> Optional[Rounding]:
    if node.value is None:
        return None
    return Rounding(openings=[tuple(o.integers()) for o in node.get("openings").items()],
                    class_values={node.index(u): v.number() for u, v in node.get("class_values").entries()},
                    types=node.get("types").integers(),
                    masses={node.index(u): v.number() for u, v in node.get("masses", {}).entries()})


def _triples(values: Dict[tuple, Any]) -> List[List[Any]]:
    return [list(key) + [num(v)] for key, v in sorted(values.items())]


def _parse_triples(node: Node, width: int) -> Dict[tuple, Any]:
    out = {}
    for row in node.items():
        cells = row.items()
        if len(cells) != width + 1:
            row.fail(f"expected {width} indices and a value")
        out[tuple(c.integer() for c in cells[:width])] = cells[width].number()
    return out


def emit_strong(d: StrongDecomposition) -> Dict[str, Any]:
    """Decomposition data; the iteration events go to the run trace instead."""
    c = d.constants
    return {
        "kind": "strong-decomposition",
        "constants": {"delta": num(c.delta), "epsilon": num(c.epsilon), "horizon": c.horizon,
                      "root_radius": c.root_radius, "roundable_diameter": c.roundable_diameter,
                      "neighborhood_diameter": c.neighborhood_diameter, "literal": c.literal},
        "roundable": [{"facilities": sorted(s.facilities), "root": s.root, "augmented": sorted(s.augmented),
                       "rounding": _emit_rounding(s.rounding)} for s in d.roundable],
        "neighborhoods": [{"facilities": sorted(n.facilities), "clients": sorted(n.clients), "root": n.root}
                          for n in d.neighborhoods],
        "covered": sorted(d.covered),
        "bounded": sorted(d.bounded),
        "deleted": sorted(d.deleted),
        "charge": _charge(d.charge),
        "x_hat": _triples(d.x_hat),
        "effc": _triples(d.effc),
        "reports": [{"diameter": num(r.diameter), "diameter_ok": r.diameter_ok, "suffix_ok": r.suffix_ok,
                     "served": num(r.served), "opened": num(r.opened), "demand_ok": r.demand_ok,
                     "mass_bound": None if r.mass_bound is None else num(r.mass_bound), "mass_ok": r.mass_ok}
                    for r in d.reports],
    }


def parse_strong(node: Node) -> StrongDecomposition:
    node.kind("strong-decomposition")
    c = node.get("constants")
    constants = DecompositionConstants(
        delta=c.get("delta").number(), epsilon=c.get("epsilon").number(), horizon=c.get("horizon").integer(),
        root_radius=c.get("root_radius").integer(), roundable_diameter=c.get("roundable_diameter").integer(),
        neighborhood_diameter=c.get("neighborhood_diameter").integer(), literal=c.get("literal").boolean())
    roundable = [RoundableSet(facilities=set(s.get("facilities").integers()), root=s.get("root").integer(),
                              augmented=set(s.get("augmented", []).integers()),
                              rounding=_parse_rounding(s.get("rounding", None)))
                 for s in node.get("roundable").items()]
    neighborhoods = [Neighborhood(facilities=frozenset(n.get("facilities").integers()),
                                  clients=frozenset(n.get("clients").integers()), root=n.get("root").integer())
                     for n in node.get("neighborhoods").items()]
    reports = [RoundableReport(diameter=r.get("diameter").number(), diameter_ok=r.get("diameter_ok").boolean(),
                               suffix_ok=r.get("suffix_ok").boolean(), served=r.get("served").number(),
                               opened=r.get("opened").number(), demand_ok=r.get("demand_ok").boolean(),
                               mass_bound=r.get("mass_bound").number() if r.has("mass_bound") else None,
                               mass_ok=r.get("mass_ok", True).boolean())
               for r in node.get("reports", []).items()]
    return StrongDecomposition(
        roundable=roundable, neighborhoods=neighborhoods,
        covered=frozenset(node.get("covered").integers()), bounded=frozenset(node.get("bounded").integers()),
        deleted=frozenset(node.get("deleted").integers()), charge=_parse_charge(node.get("charge")),
        x_hat=_parse_triples(node.get("x_hat"), 3), effc=_parse_triples(node.get("effc"), 2),
        constants=constants, reports=reports)


# -- certificates and witnesses ----------------------------------------------------------------

def emit_fractional(frac: FractionalSolution) -> Dict[str, Any]:
    return {"kind": "fractional", "radius": num(frac.radius), "y": _triples(frac.y), "x": _triples(frac.x)}


def parse_fractional(node: Node) -> FractionalSolution:
    node.kind("fractional")
    return FractionalSolution(y=_parse_triples(node.get("y"), 2), x=_parse_triples(node.get("x"), 3),
                              radius=node.get("radius").number())


def emit_farkas(cert: FarkasCertificate) -> Dict[str, Any]:
    return {"kind": "farkas", "alpha": [num(a) for a in cert.alpha], "beta": [num(b) for b in cert.beta],
            "stuck": cert.stuck}


def parse_farkas(node: Node) -> FarkasCertificate:
    node.kind("farkas")
    stuck = node.get("stuck", None)
    return FarkasCertificate(alpha=tuple(node.get("alpha").numbers()), beta=tuple(node.get("beta").numbers()),
                             stuck=None if stuck.value is None else stuck.integer())


def emit_hyperplane(plane: SeparatingHyperplane) -> Dict[str, Any]:
    return {"kind": "hyperplane", "polyhedron": plane.polyhedron, "alpha": [num(a) for a in plane.alpha],
            "beta": [num(b) for b in plane.beta], "constant": num(plane.constant)}


def parse_hyperplane(node: Node) -> SeparatingHyperplane:
    node.kind("hyperplane")
    return SeparatingHyperplane(alpha=tuple(node.get("alpha").numbers()), beta=tuple(node.get("beta").numbers()),
                                constant=node.get("constant").number(),
                                polyhedron=node.get("polyhedron").value)


def emit_configurations(sol: ConfigurationLpSolution) -> Dict[str, Any]:
    return {"kind": "configuration-solution",
            "z": [{"machine": i, "jobs": list(S), "value": num(v)} for (i, S), v in sorted(sol.z.items())]}


def parse_configurations(node: Node) -> ConfigurationLpSolution:
    node.kind("configuration-solution")
    z = {}
    for entry in node.get("z").items():
        key = (entry.get("machine").integer(), tuple(sorted(entry.get("jobs").integers())))
        z[key] = entry.get("value").number()
    return ConfigurationLpSolution(z)


def emit_assignment(z: Dict[tuple, Any]) -> Dict[str, Any]:
    return {"kind": "assignment-solution", "z": _triples(z)}


def parse_assignment(node: Node) -> Dict[tuple, Any]:
    node.kind("assignment-solution")
    return _parse_triples(node.get("z"), 2)


EMITTERS: Dict[type, Callable[[Any], Dict[str, Any]]] = {
    MckcInstance: emit_mckc,
    CckpInstance: emit_cckp,
    SupplyVector: emit_supply,
    McKcSolution: emit_solution,
    QualityReport: emit_report,
    Allocation: emit_allocation,
    WeakDecomposition: emit_weak,
    StrongDecomposition: emit_strong,
    FarkasCertificate: emit_farkas,
    SeparatingHyperplane: emit_hyperplane,
    ConfigurationLpSolution: emit_configurations,
    FractionalSolution: emit_fractional,
}

PARSERS: Dict[str, Callable[[Node], Any]] = {
    "mckc": parse_mckc,
    "cckp": parse_cckp,
    "supply": parse_supply,
    "mckc-solution": parse_solution,
    "quality-report": parse_report,
    "allocation": parse_allocation,
    "weak-decomposition": parse_weak,
    "strong-decomposition": parse_strong,
    "farkas": parse_farkas,
    "hyperplane": parse_hyperplane,
    "configuration-solution": parse_configurations,
    "assignment-solution": parse_assignment,
    "fractional": parse_fractional,
}


def emit(obj: Any) -> Dict[str, Any]:
    emitter = EMITTERS.get(type(obj))
    if emitter is None:
        raise ModelError(f"No JSON form for {type(obj).__name__}")
    return emitter(obj)


def parse(data: Any, path: str = "") -> Any:
    """Dispatch on the document's kind."""
    node = Node(data, path)
    kind = node.get("kind").value
    if kind not in PARSERS:
        node.get("kind").fail(f"unknown kind {kind!r}")
    return PARSERS[kind](node)


def read_document(path: Optional[str]) -> Any:
    """Raw JSON from a file, or from stdin for None or '-'."""
    try:
        if path in (None, "-"):
            return json.load(sys.stdin)
        with open(path) as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise ModelError(f"{path or '<stdin>'}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")
    except OSError as e:
        raise ModelError(f"Cannot read {path}: {e}")


def write_document(document: Dict[str, Any], path: Optional[str] = None):
    text = json.dumps(document, indent=2)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
        return
    with open(path, "w") as handle:
        handle.write(text + "\n")
    logger.info(f"Wrote {document.get('kind', 'document')} to {path}")


def bundle(main: Any, **extra: Any) -> Dict[str, Any]:
    """A document for `main` with sidecar blocks such as "witness" or "supply"."""
    document = emit(main)
    for key, value in extra.items():
        if value is None:
            continue
        document[key] = emit(value) if type(value) in EMITTERS else value
    return document


def sidecar(data: Any, key: str, path: str = "") -> Optional[Any]:
    """Parse the sidecar block `key` of a document when present."""
    node = Node(data, path)
    if not node.has(key):
        return None
    return parse(data[key], f"{path}/{key}")


def require_type(obj: Any, expected: Sequence[type], what: str) -> Any:
    if not isinstance(obj, tuple(expected)):
        raise ModelError(f"{what}: expected {' or '.join(t.__name__ for t in expected)}, got {type(obj).__name__}")
    return obj

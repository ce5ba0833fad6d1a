"""Dense two-phase simplex with Bland's rule and a cutting-plane driver."""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import LpConfig, default_config
from logging_config import ContractViolation, DegeneracyError, LpError, get_logger, log_exceptions

logger = get_logger(__name__)

LE = "<="
GE = ">="
EQ = "="
SENSES = (LE, GE, EQ)

# Exact tableaux above this many cells switch to floating point
EXACT_CELL_LIMIT = 40000


@dataclass
class Variable:
    name: str
    lower: Optional[Any] = 0
    upper: Optional[Any] = None


@dataclass
class Constraint:
    coeffs: Dict[str, Any]
    sense: str
    rhs: Any
    name: Optional[str] = None

    def activity(self, point: Dict[str, Any]) -> Any:
        return sum((c * point[v] for v, c in self.coeffs.items()), Fraction(0))

    def violation(self, point: Dict[str, Any]) -> Any:
        """Amount by which `point` misses the constraint (<= 0 when satisfied)."""
        lhs = self.activity(point)
        if self.sense == LE:
            return lhs - self.rhs
        if self.sense == GE:
            return self.rhs - lhs
        return abs(lhs - self.rhs)


class LinearSystem:
    def __init__(self, exact: Optional[bool] = None):
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.objective: Optional[Dict[str, Any]] = None
        self.maximize = False
        self.exact = exact
        self._index: Dict[str, int] = {}

    def add_variable(self, name: str, lower: Optional[Any] = 0, upper: Optional[Any] = None) -> str:
        if name in self._index:
            raise LpError(f"Variable {name!r} declared twice")
        if lower is not None and upper is not None and lower > upper:
            raise LpError(f"Variable {name!r} has lower bound above upper bound")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, lower, upper))
        return name

    def add_constraint(self, coeffs: Dict[str, Any], sense: str, rhs: Any, name: Optional[str] = None) -> int:
        if sense not in SENSES:
            raise LpError(f"Unknown relation {sense!r}")
        for v in coeffs:
            if v not in self._index:
                raise LpError(f"Constraint {name or len(self.constraints)} references undeclared variable {v!r}")
        self.constraints.append(Constraint(dict(coeffs), sense, rhs, name))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: Dict[str, Any], maximize: bool = False):
        for v in coeffs:
            if v not in self._index:
                raise LpError(f"Objective references undeclared variable {v!r}")
        self.objective = dict(coeffs)
        self.maximize = maximize

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def copy(self) -> "LinearSystem":
        other = LinearSystem(self.exact)
        other.variables = [Variable(v.name, v.lower, v.upper) for v in self.variables]
        other.constraints = [Constraint(dict(c.coeffs), c.sense, c.rhs, c.name) for c in self.constraints]
        other.objective = dict(self.objective) if self.objective is not None else None
        other.maximize = self.maximize
        other._index = dict(self._index)
        return other

    def numbers(self):
        for v in self.variables:
            for bound in (v.lower, v.upper):
                if bound is not None:
                    yield bound
        for c in self.constraints:
            yield c.rhs
            yield from c.coeffs.values()
        if self.objective:
            yield from self.objective.values()

    def is_rational(self) -> bool:
        return all(isinstance(x, Rational) and not isinstance(x, bool) for x in self.numbers())


class LpStatus(str, Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"


@dataclass
class LpOutcome:
    status: LpStatus
    point: Optional[Dict[str, Any]] = None
    objective: Optional[Any] = None
    # Multipliers per constraint in "<=" orientation (>= rows negated, = rows free)
    certificate: Optional[List[Any]] = None
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == LpStatus.FEASIBLE


def combine_certificate(system: LinearSystem, multipliers: Sequence[Any]) -> Tuple[Dict[str, Any], Any]:
    combined: Dict[str, Any] = {}
    rhs: Any = 0
    for lam, con in zip(multipliers, system.constraints):
        if lam == 0:
            continue
        sign = -1 if con.sense == GE else 1
        for v, a in con.coeffs.items():
            combined[v] = combined.get(v, 0) + sign * lam * a
        rhs = rhs + sign * lam * con.rhs
    return combined, rhs


def verify_certificate(system: LinearSystem, multipliers: Sequence[Any], tol: float = 1e-9) -> bool:
    """True when the multipliers combine the rows into 0 >= positive over the variable box."""
    if len(multipliers) != len(system.constraints):
        return False
    for lam, con in zip(multipliers, system.constraints):
        if con.sense != EQ and lam < -tol:
            return False
    combined, rhs = combine_certificate(system, multipliers)
    scale = max([1] + [abs(x) for x in multipliers])
    box_min: Any = 0
    for v in system.variables:
        g = combined.get(v.name, 0)
        if abs(g) <= tol * scale:
            continue
        bound = v.lower if g > 0 else v.upper
        if bound is None:
            return False
        box_min = box_min + g * bound
    return box_min - rhs > tol * scale


class SimplexSolver:
    """Single-use two-phase tableau simplex.

    Variables with bounds [l, u] are shifted to x' >= 0 with an extra row for a
    finite u; free variables are split. Exact systems run on Fraction tableaux.
    """

    def __init__(self, system: LinearSystem, config: Optional[LpConfig] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.system = system
        self.config = config or default_config.lp
        self.pivots = 0

    def _decide_exact(self, n_rows: int, n_cols: int) -> bool:
        if self.system.exact is not None:
            return self.system.exact
        return self.system.is_rational() and n_rows * n_cols <= EXACT_CELL_LIMIT

    def _build(self):
        sys = self.system
        columns: List[Tuple[int, int, Any]] = []  # (variable index, sign, offset)
        bound_rows: List[Tuple[int, Any]] = []
        for vi, v in enumerate(sys.variables):
            if v.lower is not None:
                columns.append((vi, 1, v.lower))
                if v.upper is not None:
                    bound_rows.append((len(columns) - 1, v.upper - v.lower))
            elif v.upper is not None:
                columns.append((vi, -1, v.upper))
            else:
                columns.append((vi, 1, 0))
                columns.append((vi, -1, 0))
        cols_of: Dict[int, List[int]] = {}
        for c, (vi, _, _) in enumerate(columns):
            cols_of.setdefault(vi, []).append(c)

        rows = []
        for con in sys.constraints:
            coeffs: Dict[int, Any] = {}
            rhs = con.rhs
            for name, a in con.coeffs.items():
                vi = sys.index(name)
                for c in cols_of[vi]:
                    _, sign, offset = columns[c]
                    coeffs[c] = coeffs.get(c, 0) + sign * a
                rhs = rhs - a * columns[cols_of[vi][0]][2]
            rows.append((coeffs, con.sense, rhs))
        for c, width in bound_rows:
            rows.append(({c: 1}, LE, width))
        return columns, rows

    def _pivot(self, T: np.ndarray, r: int, c: int):
        T[r] = T[r] / T[r, c]
        col = T[:, c].copy()
        col[r] = 0
        T -= np.outer(col, T[r])
        self.pivots += 1
        if self.pivots > self.config.max_pivots:
            raise DegeneracyError(f"Simplex exceeded {self.config.max_pivots} pivots")

    def _iterate(self, T: np.ndarray, basis: List[int], allowed: int, tol: Any) -> bool:
        """Bland's rule until optimal (True) or unbounded (False)."""
        m = T.shape[0] - 1
        while True:
            rc = T[-1, :allowed]
            entering = -1
            for c in range(allowed):
                if rc[c] < -tol:
                    entering = c
                    break
            if entering < 0:
                return True
            best_row = -1
            best_ratio = None
            for r in range(m):
                a = T[r, entering]
                if a > (self.config.pivot_tol if tol else 0):
                    ratio = T[r, -1] / a
                    if best_ratio is None or ratio < best_ratio - tol or (
                            abs(ratio - best_ratio) <= tol and basis[r] < basis[best_row]):
                        best_ratio = ratio
                        best_row = r
            if best_row < 0:
                return False
            self._pivot(T, best_row, entering)
            basis[best_row] = entering

    @log_exceptions
    def solve(self) -> LpOutcome:
        sys = self.system
        columns, rows = self._build()
        n = len(columns)
        m = len(rows)
        n_slack = sum(1 for _, sense, _ in rows if sense != EQ)
        n_art = sum(1 for coeffs, sense, rhs in rows if sense == EQ or (sense == GE) == (rhs >= 0))
        width = n + n_slack + n_art + 1
        exact = self._decide_exact(m + 1, width)
        tol = 0 if exact else self.config.pivot_tol
        dtype = object if exact else float
        conv = (lambda x: Fraction(x)) if exact else float

        T = np.zeros((m + 1, width), dtype=dtype)
        if exact:
            T[:, :] = Fraction(0)
        basis: List[int] = []
        flips: List[int] = []
        identity: List[Tuple[int, bool]] = []  # (column, is_artificial) forming the start basis
        slack_at = n
        art_at = n + n_slack
        for r, (coeffs, sense, rhs) in enumerate(rows):
            sigma = -1 if rhs < 0 else 1
            flips.append(sigma)
            for c, a in coeffs.items():
                T[r, c] = conv(sigma * a)
            T[r, -1] = conv(sigma * rhs)
            post = sense
            if sigma < 0 and sense != EQ:
                post = GE if sense == LE else LE
            if sense != EQ:
                T[r, slack_at] = conv(1 if post == LE else -1)
                if post == LE:
                    basis.append(slack_at)
                    identity.append((slack_at, False))
                slack_at += 1
            if post != LE:
                T[r, art_at] = conv(1)
                basis.append(art_at)
                identity.append((art_at, True))
                art_at += 1
        for r in range(m):
            if basis[r] >= n + n_slack:
                T[-1] = T[-1] - T[r]
                T[-1, basis[r]] = conv(0)

        self._iterate(T, basis, width - 1, tol)
        infeasibility = -T[-1, -1]
        threshold = 0 if exact else self.config.feasibility_tol
        if infeasibility > threshold:
            certificate = self._certificate(T, identity, flips, exact)
            self.logger.debug(f"Phase 1 ended at {infeasibility}, system infeasible after {self.pivots} pivots")
            return LpOutcome(LpStatus.INFEASIBLE, certificate=certificate, pivots=self.pivots)

        T, basis = self._drop_artificials(T, basis, n + n_slack, tol)
        objective = sys.objective or {}
        cost = np.zeros(T.shape[1], dtype=dtype)
        if exact:
            cost[:] = Fraction(0)
        for name, coef in objective.items():
            vi = sys.index(name)
            for c, (cvi, sign, _) in enumerate(columns):
                if cvi == vi:
                    cost[c] = conv((-coef if sys.maximize else coef) * sign)
        T[-1] = cost
        for r, b in enumerate(basis):
            if cost[b] != 0:
                T[-1] = T[-1] - cost[b] * T[r]
        if not self._iterate(T, basis, T.shape[1] - 1, tol):
            self.logger.debug("Phase 2 found an unbounded direction")
            return LpOutcome(LpStatus.UNBOUNDED, pivots=self.pivots)

        values = [conv(0)] * n
        for r, b in enumerate(basis):
            if b < n:
                values[b] = T[r, -1]
        point: Dict[str, Any] = {}
        for c, (vi, sign, offset) in enumerate(columns):
            name = sys.variables[vi].name
            base = point.get(name, offset if exact else float(offset))
            point[name] = base + sign * values[c]
        if not exact:
            point = {k: float(v) for k, v in point.items()}
        self._self_check(point)
        value = None
        if sys.objective is not None:
            value = sum((coef * point[name] for name, coef in sys.objective.items()), Fraction(0))
        return LpOutcome(LpStatus.FEASIBLE, point=point, objective=value, pivots=self.pivots)

    def _drop_artificials(self, T: np.ndarray, basis: List[int], first_art: int, tol: Any):
        keep_rows = []
        for r in range(len(basis)):
            if basis[r] >= first_art:
                pivot_col = -1
                for c in range(first_art):
                    if abs(T[r, c]) > (self.config.pivot_tol if tol else 0):
                        pivot_col = c
                        break
                if pivot_col < 0:
                    continue  # redundant row
                self._pivot(T, r, pivot_col)
                basis[r] = pivot_col
            keep_rows.append(r)
        rows = keep_rows + [T.shape[0] - 1]
        cols = list(range(first_art)) + [T.shape[1] - 1]
        return T[np.ix_(rows, cols)].copy(), [basis[r] for r in keep_rows]

    def _certificate(self, T: np.ndarray, identity: List[Tuple[int, bool]], flips: List[int], exact: bool) -> List[Any]:
        sys = self.system
        multipliers = []
        for r, con in enumerate(sys.constraints):
            col, is_art = identity[r]
            pi = (1 - T[-1, col]) if is_art else -T[-1, col]
            nu = -pi * flips[r]
            lam = -nu if con.sense == GE else nu
            if not exact:
                lam = float(lam)
                if abs(lam) < self.config.pivot_tol:
                    lam = 0.0
            multipliers.append(lam)
        if not verify_certificate(sys, multipliers, 0 if exact else 1e-9):
            raise DegeneracyError("Phase-1 infeasibility certificate failed verification")
        return multipliers

    def _self_check(self, point: Dict[str, Any]):
        tol = self.config.feasibility_tol
        for v in self.system.variables:
            x = point[v.name]
            if (v.lower is not None and x < v.lower - tol) or (v.upper is not None and x > v.upper + tol):
                raise DegeneracyError(f"Variable {v.name} = {x} escaped its bounds")
        for k, con in enumerate(self.system.constraints):
            if con.violation(point) > tol:
                raise DegeneracyError(f"Constraint {con.name or k} violated by {con.violation(point)} after solve")


@log_exceptions
def solve(system: LinearSystem, config: Optional[LpConfig] = None) -> LpOutcome:
    outcome = SimplexSolver(system, config).solve()
    logger.debug(f"LP with {len(system.variables)} variables, {len(system.constraints)} rows: "
                 f"{outcome.status.value} after {outcome.pivots} pivots")
    return outcome


@dataclass
class AggregateVariable:
    """Fresh variable defined as a linear expression of existing ones."""
    name: str
    expression: Dict[str, Any]


@dataclass
class Cut:
    constraint: Constraint
    aggregates: List[AggregateVariable] = field(default_factory=list)
    note: str = ""


class CutStatus(str, Enum):
    ACCEPTED = "ACCEPTED"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"
    CUT_LIMIT = "CUT_LIMIT"


@dataclass
class CuttingPlaneResult:
    status: CutStatus
    outcome: Optional[LpOutcome]
    rounds: int
    cuts: List[Cut]
    system: LinearSystem


def _extended_point(point: Dict[str, Any], cut: Cut) -> Dict[str, Any]:
    extended = dict(point)
    for agg in cut.aggregates:
        extended[agg.name] = sum((c * extended[v] for v, c in agg.expression.items()), Fraction(0))
    return extended


@log_exceptions
def cutting_plane_solve(base: LinearSystem,
                        separate: Callable[[Dict[str, Any]], Optional[Union[Cut, Constraint]]],
                        max_rounds: int, config: Optional[LpConfig] = None) -> CuttingPlaneResult:
    config = config or default_config.lp
    system = base.copy()
    cuts: List[Cut] = []
    for rounds in range(max_rounds + 1):
        outcome = solve(system, config)
        if outcome.status == LpStatus.INFEASIBLE:
            logger.info(f"Cutting planes: system infeasible at round {rounds} with {len(cuts)} cuts")
            return CuttingPlaneResult(CutStatus.INFEASIBLE, outcome, rounds, cuts, system)
        if outcome.status == LpStatus.UNBOUNDED:
            return CuttingPlaneResult(CutStatus.UNBOUNDED, outcome, rounds, cuts, system)
        answer = separate(outcome.point)
        if answer is None:
            logger.info(f"Cutting planes: point accepted at round {rounds}")
            return CuttingPlaneResult(CutStatus.ACCEPTED, outcome, rounds, cuts, system)
        cut = answer if isinstance(answer, Cut) else Cut(answer)
        missing = [agg.name for agg in cut.aggregates if system.has_variable(agg.name)]
        if missing:
            raise ContractViolation(f"Cut redeclares variables {missing}")
        violation = cut.constraint.violation(_extended_point(outcome.point, cut))
        if not violation > config.pivot_tol:
            raise ContractViolation(f"Separation returned a cut satisfied by the query point (violation {violation})")
        if rounds == max_rounds:
            break
        for agg in cut.aggregates:
            system.add_variable(agg.name, lower=None, upper=None)
            definition = {v: -c for v, c in agg.expression.items()}
            definition[agg.name] = definition.get(agg.name, 0) + 1
            system.add_constraint(definition, EQ, 0, name=f"def_{agg.name}")
        system.add_constraint(cut.constraint.coeffs, cut.constraint.sense, cut.constraint.rhs,
                              name=cut.constraint.name or f"cut_{len(cuts)}")
        cuts.append(cut)
        logger.debug(f"Round {rounds}: added cut {cut.note or cut.constraint.name} violated by {violation}")
    logger.warning(f"Cutting planes hit the round limit {max_rounds}")
    return CuttingPlaneResult(CutStatus.CUT_LIMIT, None, max_rounds, cuts, system)


def _fmt(x: Any) -> str:
    if isinstance(x, Fraction) and x.denominator != 1:
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, Fraction):
        return str(x.numerator)
    return repr(x)


def _expr(coeffs: Dict[str, Any]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for v, c in coeffs.items():
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} {v}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def dump_lp(system: LinearSystem) -> str:
    """Plain-text rendering.

    Grammar: an objective section ("maximize"/"minimize"/"feasibility") with one
    ` obj: expr` line, `subject to` with ` name: expr REL rhs` lines, `bounds`
    with ` lo <= var <= hi` lines (`-inf`/`inf` for missing bounds), then `end`.
    """
    lines = ["\\ kcenter linear system"]
    if system.objective is None:
        lines.append("feasibility")
    else:
        lines.append("maximize" if system.maximize else "minimize")
        lines.append(f" obj: {_expr(system.objective)}")
    lines.append("subject to")
    for k, con in enumerate(system.constraints):
        lines.append(f" {con.name or 'c' + str(k)}: {_expr(con.coeffs)} {con.sense} {_fmt(con.rhs)}")
    lines.append("bounds")
    for v in system.variables:
        lo = "-inf" if v.lower is None else _fmt(v.lower)
        hi = "inf" if v.upper is None else _fmt(v.upper)
        lines.append(f" {lo} <= {v.name} <= {hi}")
    lines.append("end")
    return "\n".join(lines) + "\n"

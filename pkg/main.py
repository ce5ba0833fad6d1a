# Standard library imports
import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from fractions import Fraction

# Set Numba environment variable
os.environ['NUMBA_DEBUG'] = '0'

# Local imports
import instance_io as codec
from conf_rounding import ConfigurationLpSolution, conf_lp_round
from config import Backend, Mode, load_config, with_delta
from core import (Allocation, CckpInstance, McKcSolution, MckcInstance, SupplyVector, evaluate_allocation,
                  evaluate_solution)
from gap_instances import (check_conf_gap_mixture, gen_bansal_sviridenko, gen_conf_gap, gen_mckc_gap,
                           gen_petersen_pcmin, gen_qcmin_reduction)
from helper import INFINITY, NumericHelper
from maxmin_solvers import FarkasCertificate, greedy_qcmin, verify_farkas
from oracles import brute_force_cckp, brute_force_mckc, brute_force_restricted
from pipeline import McKcPipeline, scale_demands
from qptas import qptas_cckp
from relaxation import solve_relaxation
from reporting import RunTrace, allocation_table, print_report
from strong_decomposition import StrongDecomposition, verify_complete_neighborhood, verify_roundable
from strong_decomposition import decompose as strong_decompose
from supply_polyhedra import (SeparatingHyperplane, p_ass_membership, p_conf_separation,
                              validate_assignment_witness, validate_configuration_witness)
from threshold_graph import F, build
from weak_decomposition import WeakDecomposition, weak_violations
from weak_decomposition import decompose as weak_decompose

# Set up logging
from logging_config import (CutLimitReached, GuardExceeded, InfeasibleRadius, InstanceInfeasible, KCenterError,
                            ModelError, get_logger, log_exceptions, setup_logging)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3

logger = get_logger(__name__)


def _number(text: str):
    try:
        return NumericHelper.to_number(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _load(path, expected=None, what="input"):
    data = codec.read_document(path)
    obj = codec.parse(data, "")
    if expected is not None:
        codec.require_type(obj, expected, what)
    return data, obj


def _supply_for(data, args) -> SupplyVector:
    if getattr(args, "supply", None):
        _, supply = _load(args.supply, [SupplyVector], "--supply")
        return supply
    supply = codec.sidecar(data, "supply")
    if supply is None:
        raise ModelError("No supply vector: pass --supply or embed a \"supply\" block")
    return supply


def _supply_sidecar(data) -> SupplyVector:
    supply = codec.sidecar(data, "supply")
    if supply is None:
        raise ModelError("Document carries no \"supply\" block")
    return codec.require_type(supply, [SupplyVector], "/supply")


def _instance_sidecar(data, expected):
    inst = codec.sidecar(data, "instance")
    if inst is None:
        raise ModelError("Document carries no \"instance\" block")
    return codec.require_type(inst, [expected], "/instance")


# -- solve -------------------------------------------------------------------------------------

def solve_mckc(args, config) -> int:
    _, inst = _load(args.input, [MckcInstance], "instance")
    mode = Mode(args.mode)
    if mode == Mode.STRONG_SOFT and not inst.soft:
        logger.warning("strong-soft mode on a hard instance: solving its soft-capacity relaxation")
        inst = replace(inst, soft=True)
    if args.delta is not None:
        config = with_delta(config, float(args.delta))
    backend = Backend(args.backend) if args.backend else config.pipeline.cckp_backend
    config = replace(config, pipeline=replace(config.pipeline, mode=mode, cckp_backend=backend))
    trace = RunTrace(path=args.trace or config.trace_file)
    try:
        pipeline = McKcPipeline(inst, config, trace)
        result = pipeline.solve_at_radius(args.radius) if args.radius is not None else pipeline.guess_opt()
    finally:
        trace.write()
    print_report(result.report, result.radius, out=sys.stderr)
    document = codec.bundle(result.solution, report=result.report, instance=inst)
    document["run"] = {"mode": mode.value, "backend": backend.value, "radius": codec.num(result.radius),
                       "hops": result.hops, "hop_budget": result.hop_budget,
                       "capacity_budget": codec.num(result.capacity_budget), "cuts": result.cuts,
                       "retried": result.retried}
    codec.write_document(document, args.out)
    return EXIT_OK


def solve_cckp(args, config) -> int:
    data, inst = _load(args.input, [CckpInstance], "instance")
    supply = _supply_for(data, args)
    backend = Backend(args.backend)
    epsilon = args.epsilon
    if backend == Backend.GREEDY:
        result = greedy_qcmin(inst, supply)
        if isinstance(result, FarkasCertificate):
            codec.write_document(codec.bundle(result, instance=inst, supply=supply), args.out)
            return EXIT_INFEASIBLE
        allocation = result
    elif backend == Backend.CONF_ROUND:
        epsilon = config.separation.epsilon if epsilon is None else epsilon
        answer = p_conf_separation(inst, supply.counts, epsilon, config.separation, config.lp)
        if isinstance(answer, SeparatingHyperplane):
            codec.write_document(codec.bundle(answer, instance=inst, supply=supply), args.out)
            return EXIT_INFEASIBLE
        allocation = conf_lp_round(scale_demands(inst, 1 + NumericHelper.rationalize(epsilon)), supply, answer,
                                   config.lp)
    elif backend == Backend.QPTAS:
        allocation = qptas_cckp(inst, supply, epsilon, config.qptas, config.lp)
        if allocation is None:
            logger.info("No configuration guess is feasible")
            return EXIT_INFEASIBLE
    else:
        oracle = brute_force_restricted if inst.admissible is not None else brute_force_cckp
        outcome = oracle(inst, supply, config.oracle)
        allocation = outcome.allocation
        if allocation is None:
            return EXIT_INFEASIBLE
    evaluation = evaluate_allocation(inst, supply, allocation)
    print(allocation_table(inst, supply, allocation).to_string(index=False), file=sys.stderr)
    document = codec.bundle(allocation, instance=inst, supply=supply)
    document["ratio"] = codec.num(evaluation.min_ratio)
    codec.write_document(document, args.out)
    if backend == Backend.BRUTE and evaluation.min_ratio < 1:
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- decompose ---------------------------------------------------------------------------------

def decompose(args, config) -> int:
    _, inst = _load(args.input, [MckcInstance], "instance")
    g = build(inst, args.radius)
    if args.mode == "weak":
        epsilon = config.decomposition.weak_epsilon if args.epsilon is None else args.epsilon
        result = weak_decompose(g, epsilon)
        codec.write_document(codec.bundle(result, instance=inst, radius=codec.num(args.radius)), args.out)
        return EXIT_OK
    delta = config.decomposition.delta if args.delta is None else args.delta
    frac, _ = solve_relaxation(inst, g, config.lp)
    if frac is None:
        logger.info(f"Relaxation infeasible at radius {args.radius}")
        return EXIT_INFEASIBLE
    result = strong_decompose(g, frac, delta, config.decomposition)
    document = codec.bundle(result, fractional=frac, instance=inst, radius=codec.num(args.radius))
    codec.write_document(document, args.out)
    return EXIT_OK


# -- gen ---------------------------------------------------------------------------------------

def generate(args, config) -> int:
    kind = args.family
    if kind == "mckc-gap":
        gap = gen_mckc_gap(args.k, soft=args.soft)
        document = codec.bundle(gap.instance, witness=gap.witness, radius=codec.num(gap.radius))
    elif kind == "conf-gap":
        gap = gen_conf_gap(args.k)
        mixture = check_conf_gap_mixture(args.k, gap)
        document = codec.bundle(gap.instance, supply=gap.supply, witness=gap.witness)
        document["mixture"] = {"p": codec.num(mixture.p), "s1": codec.emit(mixture.s1), "s2": codec.emit(mixture.s2)}
    elif kind == "bs-gap":
        gap = gen_bansal_sviridenko(args.k)
        document = codec.bundle(gap.instance, supply=gap.supply, witness=gap.witness)
    elif kind == "petersen":
        family = gen_petersen_pcmin(args.k)
        document = codec.bundle(family.instance, supply=family.mixture)
        document["matching_supplies"] = [codec.emit(s) for s in family.supplies]
        document["matchings"] = [[list(e) for e in m] for m in family.matchings]
    else:
        data, inst = _load(args.input, [CckpInstance], "instance")
        document = codec.emit(gen_qcmin_reduction(inst, _supply_for(data, args)))
    codec.write_document(document, args.out)
    return EXIT_OK


# -- verify ------------------------------------------------------------------------------------

def _same(a, b) -> bool:
    if a is INFINITY or b is INFINITY:
        return a is b
    return a == b or math.isclose(float(a), float(b), rel_tol=1e-9)


def _verify_document(data, obj) -> list:
    problems = []
    if isinstance(obj, McKcSolution):
        inst = _instance_sidecar(data, MckcInstance)
        report = evaluate_solution(inst, obj, obj.radius_guess)
        if not report.feasible_counts:
            problems.append(f"placed counts {obj.placed_counts(inst.n_types)} exceed the profile")
        claimed = codec.sidecar(data, "report")
        if claimed is not None and not _same(claimed.capacity_factor, report.capacity_factor):
            problems.append(f"reported b={claimed.capacity_factor} but measured {report.capacity_factor}")
        if claimed is not None and not _same(claimed.distance_factor, report.distance_factor):
            problems.append(f"reported a={claimed.distance_factor} but measured {report.distance_factor}")
    elif isinstance(obj, FarkasCertificate):
        inst = _instance_sidecar(data, CckpInstance)
        if not verify_farkas(inst, _supply_sidecar(data), obj):
            problems.append("Farkas certificate does not prove infeasibility")
    elif isinstance(obj, SeparatingHyperplane):
        supply = codec.parse_supply_point(codec.Node(data.get("supply"), "/supply"))
        if not obj.separates(supply):
            problems.append("hyperplane does not separate the supply")
    elif isinstance(obj, Allocation):
        inst = _instance_sidecar(data, CckpInstance)
        evaluation = evaluate_allocation(inst, _supply_sidecar(data), obj)
        problems.extend(evaluation.violations)
    else:
        raise ModelError(f"Nothing to verify in a {type(obj).__name__} document")
    return problems


def _verify_decomposition(data, obj, what: str) -> list:
    inst = _instance_sidecar(data, MckcInstance)
    if "radius" not in data:
        raise ModelError("Decomposition document carries no radius")
    g = build(inst, NumericHelper.to_number(data["radius"]))
    if isinstance(obj, WeakDecomposition):
        return weak_violations(g, obj)
    codec.require_type(obj, [StrongDecomposition], "decomposition")
    problems = []
    c = obj.constants
    if what == "roundable":
        frac = codec.sidecar(data, "fractional")
        if frac is None:
            raise ModelError("Roundable check needs the \"fractional\" block")
        for s in obj.roundable:
            if s.rounding is None:
                problems.append(f"roundable set rooted at {s.root} carries no rounding")
                continue
            report = verify_roundable(g, s.facilities, s.rounding, obj.x_hat, frac.y, c.roundable_diameter,
                                      1 + c.delta)
            if not report.diameter_ok or not report.suffix_ok or (c.literal and not report.demand_ok):
                problems.append(f"roundable set rooted at {s.root}: {report}")
    else:
        for part in obj.neighborhoods:
            if not verify_complete_neighborhood(g, part.facilities, part.clients):
                problems.append(f"neighborhood rooted at {part.root} is not complete")
            if part.facilities:
                diameter = g.hop_diameter(F(i) for i in sorted(part.facilities))
                if diameter is INFINITY or diameter > c.neighborhood_diameter:
                    problems.append(f"neighborhood rooted at {part.root} has diameter {diameter}")
    return problems


def verify(args, config) -> int:
    data = codec.read_document(args.input)
    obj = codec.parse(data, "")
    what = args.artifact
    if what in ("solution", "farkas"):
        if what == "farkas":
            codec.require_type(obj, [FarkasCertificate], "certificate")
        problems = _verify_document(data, obj)
    elif what in ("roundable", "neighborhood"):
        problems = _verify_decomposition(data, obj, what)
    else:
        return verify_supply_point(data, obj, args, config)
    for problem in problems:
        print(problem, file=sys.stderr)
    if problems:
        logger.info(f"verify {what}: {len(problems)} problems")
        return EXIT_INPUT
    print(f"verify {what}: ok", file=sys.stderr)
    return EXIT_OK


def verify_supply_point(data, inst, args, config) -> int:
    codec.require_type(inst, [CckpInstance], "instance")
    if "supply" not in data:
        raise ModelError("Supply-point check needs a \"supply\" block")
    point = codec.parse_supply_point(codec.Node(data["supply"], "/supply"))
    witness = codec.sidecar(data, "witness")
    if witness is not None:
        if isinstance(witness, ConfigurationLpSolution):
            problems = validate_configuration_witness(inst, point, witness)
        else:
            problems = validate_assignment_witness(inst, point, witness)
        for problem in problems:
            print(problem, file=sys.stderr)
        return EXIT_INPUT if problems else EXIT_OK
    if args.polyhedron == "conf":
        answer = p_conf_separation(inst, point, args.epsilon, config.separation, config.lp)
    else:
        answer = p_ass_membership(inst, point, config.lp)
    if isinstance(answer, SeparatingHyperplane):
        codec.write_document(codec.emit(answer), args.out)
        return EXIT_INFEASIBLE
    if isinstance(answer, ConfigurationLpSolution):
        codec.write_document(codec.emit(answer), args.out)
    else:
        codec.write_document(codec.emit_assignment(answer), args.out)
    return EXIT_OK


# -- oracle ------------------------------------------------------------------------------------

def oracle(args, config) -> int:
    if args.problem == "mckc":
        _, inst = _load(args.input, [MckcInstance], "instance")
        if args.radius is None:
            raise ModelError("oracle mckc needs --radius")
        solution = brute_force_mckc(inst, args.radius, args.b, config.oracle)
        if solution is None:
            print(f"No solution at radius {codec.num(args.radius)} with b={codec.num(args.b)}", file=sys.stderr)
            return EXIT_INFEASIBLE
        codec.write_document(codec.bundle(solution, instance=inst), args.out)
        return EXIT_OK
    data, inst = _load(args.input, [CckpInstance], "instance")
    supply = _supply_for(data, args)
    search = brute_force_restricted if inst.admissible is not None else brute_force_cckp
    result = search(inst, supply, config.oracle, target=args.target)
    document = codec.bundle(result.allocation, instance=inst, supply=supply) if result.allocation else {}
    document.update({"ratio": codec.num(result.ratio), "exact": result.exact, "reached_target": result.reached_target})
    codec.write_document(document, args.out)
    if args.target is not None:
        return EXIT_OK if result.reached_target else EXIT_INFEASIBLE
    return EXIT_OK if result.ratio >= 1 else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcenter", description="Heterogeneous capacitated k-center solvers")
    parser.add_argument("--config", help="JSON configuration overrides")
    parser.add_argument("--log-level", default=None, help="console log level")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="solve an MCKC or CCKP instance")
    problems = solve.add_subparsers(dest="problem", required=True)
    mckc = problems.add_parser("mckc")
    mckc.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.STRONG_SOFT.value)
    mckc.add_argument("--backend", choices=[b.value for b in Backend], default=None)
    mckc.add_argument("--delta", type=_number, default=None)
    mckc.add_argument("--radius", type=_number, default=None, help="solve at one radius instead of searching")
    mckc.add_argument("--trace", default=None, help="JSON-lines event log")
    mckc.set_defaults(handler=solve_mckc)
    cckp = problems.add_parser("cckp")
    cckp.add_argument("--backend", choices=[b.value for b in Backend], default=Backend.GREEDY.value)
    cckp.add_argument("--epsilon", type=_number, default=None)
    cckp.add_argument("--supply", default=None)
    cckp.set_defaults(handler=solve_cckp)

    dec = commands.add_parser("decompose", help="weak or strong decomposition at a radius")
    dec.add_argument("--mode", choices=["weak", "strong"], default="strong")
    dec.add_argument("--epsilon", type=_number, default=None)
    dec.add_argument("--delta", type=_number, default=None)
    dec.add_argument("--radius", type=_number, required=True)
    dec.set_defaults(handler=decompose)

    gen = commands.add_parser("gen", help="lower-bound instance generators")
    gen.add_argument("family", choices=["mckc-gap", "conf-gap", "bs-gap", "petersen", "embed-cckp"])
    gen.add_argument("--k", type=int, default=3)
    gen.add_argument("--soft", action="store_true", help="soft capacities (mckc-gap)")
    gen.add_argument("--supply", default=None)
    gen.set_defaults(handler=generate)

    ver = commands.add_parser("verify", help="check a solution, certificate, decomposition or supply point")
    ver.add_argument("artifact", choices=["solution", "farkas", "roundable", "neighborhood", "supply-point"])
    ver.add_argument("--polyhedron", choices=["ass", "conf"], default="ass")
    ver.add_argument("--epsilon", type=_number, default=None)
    ver.set_defaults(handler=verify)

    orc = commands.add_parser("oracle", help="guarded brute force")
    orc.add_argument("problem", choices=["mckc", "cckp"])
    orc.add_argument("--radius", type=_number, default=None)
    orc.add_argument("--b", type=_number, default=Fraction(1))
    orc.add_argument("--target", type=_number, default=None)
    orc.add_argument("--supply", default=None)
    orc.set_defaults(handler=oracle)

    for sub in (mckc, cckp, dec, gen, ver, orc):
        sub.add_argument("--in", dest="input", default="-", help="input file, '-' for stdin")
        sub.add_argument("--out", default=None, help="output file, stdout by default")
    return parser


@log_exceptions
def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        for handler in logging.getLogger().handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(args.log_level.upper())
    try:
        config = load_config(args.config)
        return args.handler(args, config)
    except (InstanceInfeasible, InfeasibleRadius) as e:
        logger.info(f"Certified infeasible: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GuardExceeded, CutLimitReached) as e:
        logger.warning(f"Stopped at a limit: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_LIMIT
    except ModelError as e:
        logger.error(f"Input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except KCenterError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    setup_logging(file_level=logging.DEBUG, console_level=logging.WARNING)
    logging.getLogger('numba').setLevel(logging.WARNING)
    sys.exit(main())

import json
from dataclasses import replace
from fractions import Fraction

import instance_io as codec
from conftest import line_instance
from core import CckpInstance, Machine, SupplyVector
from main import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_LIMIT, EXIT_OK, main


def _write(tmp_path, name, document):
    path = tmp_path / name
    codec.write_document(document, str(path))
    return str(path)


def _read(path):
    with open(path) as handle:
        return json.load(handle)


def _machines(supply):
    inst = CckpInstance(machines=(Machine(Fraction(4)), Machine(Fraction(4))), job_types=(Fraction(3),))
    return codec.bundle(inst, supply=SupplyVector(supply))


def test_solve_and_verify_mckc(tmp_path, star_instance):
    source = _write(tmp_path, "star.json", codec.emit(replace(star_instance, soft=True)))
    out = str(tmp_path / "solution.json")
    assert main(["solve", "mckc", "--in", source, "--out", out]) == EXIT_OK
    document = _read(out)
    assert document["kind"] == "mckc-solution"
    assert document["run"]["radius"] == 1
    assert document["report"]["capacity_factor"] == 1
    assert main(["verify", "solution", "--in", out]) == EXIT_OK

    document["report"]["capacity_factor"] = 7
    tampered = _write(tmp_path, "tampered.json", document)
    assert main(["verify", "solution", "--in", tampered]) == EXIT_INPUT


def test_strong_soft_on_hard_instance_relaxes_it(tmp_path, star_instance):
    source = _write(tmp_path, "star.json", codec.emit(star_instance))
    out = str(tmp_path / "solution.json")
    assert main(["solve", "mckc", "--in", source, "--out", out, "--radius", "1"]) == EXIT_OK
    assert _read(out)["instance"]["soft"] is True


def test_instance_short_of_capacity_is_infeasible(tmp_path):
    source = _write(tmp_path, "tiny.json", codec.emit(line_instance([0], [1, 1, 1, 1], [(1, 1)], soft=True)))
    assert main(["solve", "mckc", "--in", source, "--out", str(tmp_path / "x.json")]) == EXIT_INFEASIBLE


def test_greedy_certificate_is_verifiable(tmp_path):
    source = _write(tmp_path, "cckp.json", _machines((1,)))
    out = str(tmp_path / "cert.json")
    assert main(["solve", "cckp", "--in", source, "--out", out]) == EXIT_INFEASIBLE
    assert _read(out)["kind"] == "farkas"
    assert main(["verify", "farkas", "--in", out]) == EXIT_OK


def test_cckp_backends(tmp_path, capsys):
    source = _write(tmp_path, "cckp.json", _machines((3,)))
    out = str(tmp_path / "allocation.json")
    assert main(["solve", "cckp", "--in", source, "--out", out]) == EXIT_OK
    assert _read(out)["ratio"] == "3/4"
    assert "received" in capsys.readouterr().err
    assert main(["verify", "solution", "--in", out]) == EXIT_OK

    supply = _write(tmp_path, "supply.json", codec.emit(SupplyVector((3,))))
    assert main(["solve", "cckp", "--backend", "brute", "--in", source, "--supply", supply, "--out", out]) \
        == EXIT_INFEASIBLE


def test_oracle_commands(tmp_path, star_instance):
    cckp = _write(tmp_path, "cckp.json", _machines((3,)))
    out = str(tmp_path / "oracle.json")
    assert main(["oracle", "cckp", "--in", cckp, "--target", "1", "--out", out]) == EXIT_INFEASIBLE
    assert _read(out)["reached_target"] is False
    assert main(["oracle", "cckp", "--in", cckp, "--target", "1/2", "--out", out]) == EXIT_OK

    star = _write(tmp_path, "star.json", codec.emit(star_instance))
    assert main(["oracle", "mckc", "--in", star, "--out", out]) == EXIT_INPUT
    assert main(["oracle", "mckc", "--in", star, "--radius", "1", "--out", out]) == EXIT_OK
    assert main(["oracle", "mckc", "--in", star, "--radius", "1", "--b", "1/2", "--out", out]) == EXIT_INFEASIBLE


def test_guard_exits_with_limit(tmp_path):
    source = _write(tmp_path, "cckp.json", _machines((17,)))
    assert main(["oracle", "cckp", "--in", source, "--out", str(tmp_path / "x.json")]) == EXIT_LIMIT


def test_generators(tmp_path):
    out = str(tmp_path / "gap.json")
    assert main(["gen", "mckc-gap", "--k", "2", "--out", out]) == EXIT_OK
    document = _read(out)
    assert document["kind"] == "mckc"
    assert document["witness"]["kind"] == "fractional"

    assert main(["gen", "conf-gap", "--k", "2", "--out", out]) == EXIT_OK
    assert _read(out)["mixture"]["p"] == "1/2"

    source = _write(tmp_path, "cckp.json", _machines((3,)))
    assert main(["gen", "embed-cckp", "--in", source, "--out", out]) == EXIT_OK
    embedded = _read(out)
    assert embedded["soft"] is True
    assert len(embedded["clients"]) == 8


def test_decompose_and_verify(tmp_path, path_instance):
    source = _write(tmp_path, "path.json", codec.emit(path_instance))
    out = str(tmp_path / "strong.json")
    assert main(["decompose", "--radius", "1", "--in", source, "--out", out]) == EXIT_OK
    assert _read(out)["kind"] == "strong-decomposition"
    assert main(["verify", "neighborhood", "--in", out]) == EXIT_OK
    assert main(["verify", "roundable", "--in", out]) == EXIT_OK

    weak = str(tmp_path / "weak.json")
    assert main(["decompose", "--mode", "weak", "--radius", "1", "--in", source, "--out", weak]) == EXIT_OK
    assert _read(weak)["kind"] == "weak-decomposition"


def test_supply_point_separation(tmp_path):
    inst = CckpInstance(machines=(Machine(Fraction(4)), Machine(Fraction(4))), job_types=(Fraction(3), Fraction(5)))
    source = _write(tmp_path, "point.json", codec.bundle(inst, supply=SupplyVector((1, 0))))
    out = str(tmp_path / "plane.json")
    assert main(["verify", "supply-point", "--in", source, "--out", out]) == EXIT_INFEASIBLE
    assert _read(out)["kind"] == "hyperplane"
    inside = _write(tmp_path, "inside.json", codec.bundle(inst, supply=SupplyVector((3, 0))))
    assert main(["verify", "supply-point", "--in", inside, "--out", out]) == EXIT_OK
    assert _read(out)["kind"] == "assignment-solution"


def test_bad_input(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["solve", "mckc", "--in", str(broken)]) == EXIT_INPUT
    assert "error:" in capsys.readouterr().err
    wrong = _write(tmp_path, "supply.json", codec.emit(SupplyVector((1,))))
    assert main(["solve", "mckc", "--in", wrong]) == EXIT_INPUT

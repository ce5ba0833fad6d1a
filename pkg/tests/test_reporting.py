import io
import json
from fractions import Fraction

from core import CckpInstance, Machine, QualityReport, SupplyVector, Allocation
from helper import INFINITY
from reporting import RunTrace, allocation_table, print_report, quality_table


def _report():
    return QualityReport(max_assignment_distance=Fraction(1), per_facility_load={0: Fraction(3), 2: Fraction(1)},
                         distance_factor=Fraction(1), capacity_factor=Fraction(3, 2), feasible_counts=True,
                         per_facility_capacity={0: Fraction(2), 2: Fraction(4)})


def test_trace_events_are_plain_json(tmp_path):
    stream = io.StringIO()
    trace = RunTrace(path=str(tmp_path / "trace.jsonl"), stream=stream)
    trace.emit("part", facilities=frozenset({3, 1}), radius=Fraction(1, 2), far=INFINITY)
    trace.emit("cut", index=0)
    assert trace.of_kind("part") == [{"event": "part", "facilities": [1, 3], "radius": "1/2", "far": "inf"}]
    assert json.loads(stream.getvalue().splitlines()[1]) == {"event": "cut", "index": 0}
    trace.write()
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert len(lines) == 2


def test_trace_without_path_writes_nothing(tmp_path):
    trace = RunTrace()
    trace.emit("radius", radius=1)
    trace.write()
    assert list(tmp_path.iterdir()) == []


def test_quality_table():
    table = quality_table(_report())
    assert list(table["facility"]) == [0, 2]
    assert list(table["ratio"]) == [1.5, 0.25]


def test_allocation_table():
    inst = CckpInstance(machines=(Machine(Fraction(4)), Machine(Fraction(2))), job_types=(Fraction(1),))
    table = allocation_table(inst, SupplyVector((3,)), Allocation.from_lists([[0, 0], [0]]))
    assert list(table["received"]) == [2.0, 1.0]
    assert list(table["ratio"]) == [0.5, 0.5]


def test_print_report():
    out = io.StringIO()
    print_report(_report(), radius=Fraction(5, 2), out=out)
    text = out.getvalue()
    assert "Radius guess: 5/2" in text
    assert "Capacity factor (b): 3/2" in text
    assert "Per-facility load:" in text

import json
import sys
from typing import Any, Dict, List, Optional, TextIO

import pandas as pd

from core import Allocation, CckpInstance, QualityReport, SupplyVector, evaluate_allocation
from helper import NumericHelper
from logging_config import get_logger

logger = get_logger(__name__)


def _plain(value: Any) -> Any:
    """JSON-ready form of trace payloads: numbers via format_number, containers recursively."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_plain(v) for v in items]
    if isinstance(value, (str, bool)) or value is None:
        return value
    try:
        return NumericHelper.format_number(value)
    except (TypeError, ValueError):
        return str(value)


class RunTrace:
    """JSON-lines event log of one run: decomposition iterations, cuts, failures, final report."""

    def __init__(self, path: Optional[str] = None, stream: Optional[TextIO] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.path = path
        self.stream = stream
        self.events: List[Dict[str, Any]] = []

    def emit(self, event: str, **payload: Any):
        record = {"event": event}
        record.update(_plain(payload))
        self.events.append(record)
        if self.stream is not None:
            self.stream.write(json.dumps(record) + "\n")

    def of_kind(self, event: str) -> List[Dict[str, Any]]:
        return [e for e in self.events if e["event"] == event]

    def write(self, path: Optional[str] = None):
        path = path or self.path
        if path is None:
            return
        with open(path, "w") as handle:
            for record in self.events:
                handle.write(json.dumps(record) + "\n")
        self.logger.info(f"Wrote {len(self.events)} trace events to {path}")


def quality_table(report: QualityReport) -> pd.DataFrame:
    rows = []
    for i in sorted(report.per_facility_load):
        load = report.per_facility_load[i]
        capacity = report.per_facility_capacity.get(i)
        rows.append({
            "facility": i,
            "load": float(load),
            "capacity": float(capacity) if capacity is not None else float("nan"),
            "ratio": float(load / capacity) if capacity else float("nan"),
        })
    return pd.DataFrame(rows, columns=["facility", "load", "capacity", "ratio"])


def allocation_table(inst: CckpInstance, supply: SupplyVector, allocation: Allocation) -> pd.DataFrame:
    evaluation = evaluate_allocation(inst, supply, allocation)
    df = pd.DataFrame({
        "machine": range(inst.m),
        "demand": [float(inst.demand(i)) for i in range(inst.m)],
        "jobs": [len(allocation.assignment[i]) for i in range(inst.m)],
        "received": [float(r) for r in evaluation.received],
    })
    df["ratio"] = df["received"] / df["demand"]
    return df


def print_report(report: QualityReport, radius: Any = None, out: Optional[TextIO] = None):
    out = out or sys.stdout
    print("Capacitated k-Center Solution Report", file=out)
    print("=" * 70, file=out)
    if radius is not None:
        print(f"Radius guess: {NumericHelper.format_number(radius)}", file=out)
    print(f"Max assignment distance: {NumericHelper.format_number(report.max_assignment_distance)}", file=out)
    print(f"Distance factor (a): {NumericHelper.format_number(report.distance_factor)}", file=out)
    print(f"Capacity factor (b): {NumericHelper.format_number(report.capacity_factor)}", file=out)
    print(f"Counts within profile: {report.feasible_counts}", file=out)
    table = quality_table(report)
    if not table.empty:
        print("\nPer-facility load:", file=out)
        print(table.to_string(index=False), file=out)

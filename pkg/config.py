from dataclasses import dataclass, fields, is_dataclass, replace
from enum import Enum
from typing import Any, Dict, Optional
import json

from logging_config import ModelError


class Mode(str, Enum):
    WEAK = "weak"
    STRONG_SOFT = "strong-soft"
    STRONG_HARD = "strong-hard"


class Backend(str, Enum):
    GREEDY = "greedy"
    CONF_ROUND = "conf"
    QPTAS = "qptas"
    BRUTE = "brute"


@dataclass
class LpConfig:
    feasibility_tol: float = 1e-7
    pivot_tol: float = 1e-9
    max_pivots: int = 50000


@dataclass
class OracleConfig:
    max_facilities: int = 10
    max_total_capacities: int = 10
    max_job_copies: int = 16
    max_machines: int = 6
    max_restricted_jobs: int = 16
    max_placements: int = 2_000_000


@dataclass
class DecompositionConfig:
    delta: float = 0.5
    # None keeps the stated constants; overrides only move thresholds
    epsilon: Optional[float] = None
    horizon: Optional[int] = None
    root_radius: Optional[int] = None
    weak_epsilon: float = 0.5


@dataclass
class SeparationConfig:
    epsilon: float = 0.1
    max_rounds: int = 500
    knapsack_grid: int = 10000
    knapsack_guard: int = 50_000_000


@dataclass
class QptasConfig:
    epsilon: float = 0.2
    max_states: int = 10_000_000


@dataclass
class PipelineConfig:
    delta: float = 0.5
    mode: Mode = Mode.STRONG_SOFT
    cckp_backend: Backend = Backend.GREEDY
    max_cut_rounds: int = 200
    retry_matching: bool = True


@dataclass
class Config:
    pipeline: PipelineConfig
    decomposition: DecompositionConfig
    separation: SeparationConfig
    qptas: QptasConfig
    lp: LpConfig
    oracle: OracleConfig
    log_level: str = "WARNING"
    trace_file: Optional[str] = None


default_config = Config(
    pipeline=PipelineConfig(),
    decomposition=DecompositionConfig(),
    separation=SeparationConfig(),
    qptas=QptasConfig(),
    lp=LpConfig(),
    oracle=OracleConfig(),
)


def _merge(section: Any, overrides: Dict[str, Any], path: str) -> Any:
    known = {f.name: f for f in fields(section)}
    changes = {}
    for key, value in overrides.items():
        if key not in known:
            raise ModelError(f"Unknown configuration key {path}/{key}")
        current = getattr(section, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ModelError(f"Configuration section {path}/{key} must be an object")
            changes[key] = _merge(current, value, f"{path}/{key}")
        elif isinstance(current, Enum):
            try:
                changes[key] = type(current)(value)
            except ValueError:
                raise ModelError(f"Invalid value {value!r} for {path}/{key}")
        else:
            changes[key] = value
    return replace(section, **changes)


def load_config(config_file=None) -> Config:
    if config_file:
        with open(config_file) as handle:
            try:
                overrides = json.load(handle)
            except json.JSONDecodeError as e:
                raise ModelError(f"Configuration file {config_file} is not valid JSON: {e}")
        if not isinstance(overrides, dict):
            raise ModelError("Configuration root must be an object")
        return _merge(default_config, overrides, "")
    return default_config


def with_delta(config: Config, delta: float) -> Config:
    """Return a copy whose pipeline and decomposition share one delta."""
    if not 0 < delta < 1:
        raise ModelError(f"delta must lie in (0, 1), got {delta}")
    return replace(
        config,
        pipeline=replace(config.pipeline, delta=delta),
        decomposition=replace(config.decomposition, delta=delta),
    )

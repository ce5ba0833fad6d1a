from fractions import Fraction

import numpy as np
import pytest

from core import CapacityType, CckpInstance, Machine, MckcInstance, SupplyVector
from gap_instances import gen_mckc_gap


def line_instance(facilities, clients, capacities, soft=False, weights=None):
    """Facilities and clients at integer positions on a line; capacities as (count, capacity) pairs."""
    points = [Fraction(x) for x in list(facilities) + list(clients)]
    distance = tuple(tuple(abs(a - b) for b in points) for a in points)
    weights = tuple(Fraction(w) for w in weights) if weights else tuple(Fraction(1) for _ in clients)
    return MckcInstance(facilities=tuple(f"f{i}" for i in range(len(facilities))),
                        clients=tuple(f"c{j}" for j in range(len(clients))),
                        distance=distance, weights=weights,
                        capacities=tuple(CapacityType(k, Fraction(c)) for k, c in capacities), soft=soft)


def random_line_instance(rng, *, n_facilities, n_clients, n_types, soft, span=12):
    """Random metric on a line; the profile always has enough total capacity for every client."""
    facilities = sorted(int(x) for x in rng.integers(0, span, size=n_facilities))
    clients = sorted(int(x) for x in rng.integers(0, span, size=n_clients))
    caps = sorted({int(c) for c in rng.integers(1, 6, size=n_types)})
    counts = [int(k) for k in rng.integers(0, 3, size=len(caps))]
    counts[-1] = max(counts[-1], 1)
    while sum(k * c for k, c in zip(counts, caps)) < n_clients:
        counts[-1] += 1
    return line_instance(facilities, clients, list(zip(counts, caps)), soft=soft)


def random_cckp(rng, *, m, max_copies, n_types, cardinality=False, low=1, high=16):
    machines = tuple(Machine(demand=Fraction(int(rng.integers(low, high + 1))),
                             cardinality=int(rng.integers(1, 4)) if cardinality else None) for _ in range(m))
    caps = sorted({int(c) for c in rng.integers(low, high + 1, size=n_types)})
    inst = CckpInstance(machines=machines, job_types=tuple(Fraction(c) for c in caps))
    counts = [0] * len(caps)
    for _ in range(int(rng.integers(1, max_copies + 1))):
        counts[int(rng.integers(0, len(caps)))] += 1
    return inst, SupplyVector(tuple(counts))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def star_instance():
    # one central location, four unit clients around it
    return line_instance([0, 5], [1, 1, 1, 1], [(1, 2), (1, 4)])


@pytest.fixture
def path_instance():
    return line_instance([0, 2, 4, 6], [1, 3, 5, 7], [(2, 1), (1, 2)])


@pytest.fixture
def mckc_gap3():
    return gen_mckc_gap(3)

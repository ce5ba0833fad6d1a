"""Cardinality-constrained knapsack used to price configurations."""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from numba import jit

from config import SeparationConfig, default_config
from helper import NumericHelper
from logging_config import GuardExceeded, ModelError, get_logger, log_exceptions

logger = get_logger(__name__)


@dataclass(frozen=True)
class KnapsackResult:
    counts: Tuple[int, ...]
    value: Any
    cost: Any
    exact_grid: bool


class KnapsackSolver:
    """Maximize sum of gains over a multiset with at most `cardinality` items and cost strictly below budget.

    Costs are mapped to an integer grid. When every cost and the budget are
    rationals whose common denominator keeps the budget within the grid, the
    grid is exact; otherwise the cell is budget/grid and costs are rounded up,
    so every returned set respects the true budget.
    """

    def __init__(self, costs: Sequence[Any], gains: Sequence[Any], copies: Sequence[int], cardinality: int,
                 budget: Any, config: Optional[SeparationConfig] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.config = config or default_config.separation
        if not len(costs) == len(gains) == len(copies):
            raise ModelError("Knapsack costs, gains and copies must have equal length")
        if any(c < 0 for c in costs):
            raise ModelError("Knapsack costs must be nonnegative")
        self.costs = list(costs)
        self.gains = list(gains)
        self.copies = [int(s) for s in copies]
        self.cardinality = int(cardinality)
        self.budget = budget

    def _grid(self) -> Tuple[list, int, bool]:
        numbers = self.costs + [self.budget]
        if all(NumericHelper.is_exact(x) for x in numbers):
            scale = 1
            for x in numbers:
                scale = scale * Fraction(x).denominator // math.gcd(scale, Fraction(x).denominator)
            top = Fraction(self.budget) * scale
            if top <= self.config.knapsack_grid:
                return [int(Fraction(c) * scale) for c in self.costs], int(top) - 1, True
        cell = Fraction(self.budget) / self.config.knapsack_grid if NumericHelper.is_exact(self.budget) \
            else self.budget / self.config.knapsack_grid
        weights = [math.ceil(c / cell) if NumericHelper.is_exact(c / cell) else math.ceil(c / cell - 1e-12)
                   for c in self.costs]
        return weights, self.config.knapsack_grid - 1, False

    @staticmethod
    @jit(nopython=True)
    def _table(costs: np.ndarray, gains: np.ndarray, cardinality: int, capacity: int):
        n = costs.shape[0]
        best = np.full((cardinality + 1, capacity + 1), -1.0)
        best[0, :] = 0.0
        take = np.zeros((n, cardinality + 1, capacity + 1), dtype=np.bool_)
        for item in range(n):
            c = costs[item]
            g = gains[item]
            for k in range(cardinality, 0, -1):
                for w in range(capacity, c - 1, -1):
                    prev = best[k - 1, w - c]
                    if prev >= 0.0 and prev + g > best[k, w]:
                        best[k, w] = prev + g
                        take[item, k, w] = True
        return best, take

    @log_exceptions
    def solve(self) -> KnapsackResult:
        n_types = len(self.costs)
        if not self.budget > 0 or self.cardinality <= 0:
            return KnapsackResult(tuple([0] * n_types), Fraction(0), Fraction(0), True)
        weights, capacity, exact = self._grid()
        items = []
        for j in range(n_types):
            if weights[j] > capacity or self.gains[j] <= 0:
                continue
            items.extend([j] * min(self.copies[j], self.cardinality))
        if not items:
            return KnapsackResult(tuple([0] * n_types), Fraction(0), Fraction(0), exact)
        size = len(items) * (self.cardinality + 1) * (capacity + 1)
        if size > self.config.knapsack_guard:
            raise GuardExceeded(f"Knapsack table of {size} cells exceeds guard {self.config.knapsack_guard}")
        costs = np.array([weights[j] for j in items], dtype=np.int64)
        gains = np.array([float(self.gains[j]) for j in items], dtype=np.float64)
        best, take = self._table(costs, gains, self.cardinality, capacity)
        k = int(np.argmax(best[:, capacity]))
        counts = [0] * n_types
        w = capacity
        for item in range(len(items) - 1, -1, -1):
            if k > 0 and take[item, k, w]:
                counts[items[item]] += 1
                w -= int(costs[item])
                k -= 1
        value = NumericHelper.exact_sum(self.gains[j] * counts[j] for j in range(n_types))
        cost = NumericHelper.exact_sum(self.costs[j] * counts[j] for j in range(n_types))
        self.logger.debug(f"Knapsack over {len(items)} items: value {value}, cost {cost} < {self.budget}")
        return KnapsackResult(tuple(counts), value, cost, exact)


@log_exceptions
def max_knapsack_cardinality(values: Sequence[Any], weights: Sequence[Any], copies: Sequence[int],
                             cardinality: Optional[int], value_budget: Any,
                             config: Optional[SeparationConfig] = None) -> KnapsackResult:
    """Multiset maximizing sum of `weights` with at most `cardinality` items and sum of `values` below the budget.

    A `cardinality` of None means the total number of copies.
    """
    if cardinality is None:
        cardinality = sum(int(s) for s in copies)
    return KnapsackSolver(values, weights, copies, cardinality, value_budget, config).solve()

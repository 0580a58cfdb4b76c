"""Exhaustive solver for tiny task pools.

Enumerates every allocation vector and every execution permutation, scoring
each with the same scheduler the heuristic solvers use. The result certifies
the best reward reachable through this encoding, which is the right yardstick
for solver-quality tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NothingToSolveError, SearchSpaceLimitError
from .instance import Instance
from .routing import AdjustmentPolicy, evaluate_solution
from .state import SearchState
from .taskgen import TaskPool


@dataclass(frozen=True)
class OracleLimit:
    max_enumerations: int = 10_000_000

    def __post_init__(self) -> None:
        if self.max_enumerations <= 0:
            raise ValueError("max_enumerations must be > 0")


def search_space_size(num_tasks: int, max_lockers: int) -> int:
    return max_lockers ** num_tasks * math.factorial(num_tasks)


def brute_force_best(pool: TaskPool, instance: Instance, policy: AdjustmentPolicy,
                     max_lockers: int, limit: Optional[OracleLimit] = None,
                     ) -> tuple[SearchState, float]:
    """Enumerate all (allocation, permutation) pairs and return the best.

    Refuses (with the computed cardinality) when the space exceeds the limit.
    Ties break toward the lexicographically smallest pair; no randomness is
    involved.
    """
    n = len(pool)
    if n == 0:
        raise NothingToSolveError("task pool is empty")
    limit = limit or OracleLimit()
    cardinality = search_space_size(n, max_lockers)
    if cardinality > limit.max_enumerations:
        raise SearchSpaceLimitError(cardinality, limit.max_enumerations)

    best_state: Optional[SearchState] = None
    best_reward = -math.inf
    # itertools yields both coordinates in lexicographic order, so keeping the
    # first strict maximum realises the lexicographic tie-break.
    for x1 in itertools.product(range(max_lockers), repeat=n):
        for x2 in itertools.permutations(range(n)):
            state = SearchState(x1=np.array(x1, dtype=np.int64),
                                x2=np.array(x2, dtype=np.int64))
            _, cost = evaluate_solution(state, pool, instance, policy)
            if cost.reward > best_reward:
                best_reward = cost.reward
                state.reward = cost.reward
                best_state = state
    return best_state, best_reward


__all__ = ["OracleLimit", "search_space_size", "brute_force_best"]

"""Genetic-algorithm baseline over the same solution encoding and evaluator.

Standard operators for a mixed allocation/permutation chromosome: fitness-
proportional selection, uniform crossover on the allocation vector, order
crossover on the permutation, per-gene mutation (random locker reassignment /
position swap), and elitism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NothingToSolveError, ParameterError
from .instance import Instance
from .routing import AdjustmentPolicy, RoutePlan
from .hqm import Evaluator, RunHistory, effective_locker_count
from .state import SearchState
from .taskgen import TaskPool


@dataclass
class GaParams:
    population: int = 100
    generations: int = 1000
    elite_fraction: float = 0.05
    crossover_prob: float = 0.5
    mutation_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ParameterError("population must be >= 2")
        if self.generations < 1:
            raise ParameterError("generations must be >= 1")
        if not (0.0 <= self.crossover_prob <= 1.0 and 0.0 <= self.mutation_rate <= 1.0):
            raise ParameterError("probabilities must lie in [0, 1]")
        if self.elite_fraction * self.population < 1:
            raise ParameterError("elite_fraction * population must be >= 1")

    @property
    def elite_count(self) -> int:
        return max(1, int(self.elite_fraction * self.population))


def _select_index(rewards: np.ndarray, rng: np.random.Generator) -> int:
    total = rewards.sum()
    if total <= 0:
        return int(rng.integers(len(rewards)))
    return int(rng.choice(len(rewards), p=rewards / total))


def _uniform_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    mask = rng.integers(0, 2, size=a.shape[0]).astype(bool)
    return np.where(mask, a, b)


def _order_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Keep a slice of ``a`` in place, fill the rest in ``b``'s order."""
    n = len(a)
    if n == 1:
        return a.copy()
    c1, c2 = sorted(rng.choice(n + 1, size=2, replace=False).tolist())
    child = np.full(n, -1, dtype=np.int64)
    child[c1:c2] = a[c1:c2]
    used = set(a[c1:c2].tolist())
    fill = [v for v in b.tolist() if v not in used]
    slots = [k for k in range(n) if not (c1 <= k < c2)]
    for k, v in zip(slots, fill):
        child[k] = v
    return child


def _mutate(x1: np.ndarray, x2: np.ndarray, rate: float, max_lockers: int,
            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = len(x1)
    for k in range(n):
        if rng.uniform() < rate:
            x1[k] = rng.integers(max_lockers)
    for k in range(n):
        if rng.uniform() < rate and n > 1:
            j = int(rng.integers(n - 1))
            if j >= k:
                j += 1
            x2[k], x2[j] = x2[j], x2[k]
    return x1, x2


def next_generation(population: list[SearchState], params: GaParams,
                    rng: np.random.Generator, max_lockers: int) -> list[SearchState]:
    """Produce the next population from an evaluated one.

    The top elite states pass through unchanged (rewards intact); the rest are
    bred by selection, crossover, and mutation. Children come back with
    ``reward=None`` and must be evaluated by the caller.
    """
    if len(population) < 2:
        raise ParameterError("population must hold at least 2 individuals")
    if any(s.reward is None for s in population):
        raise ParameterError("population must be evaluated before breeding")

    ranked = sorted(population, key=lambda s: s.reward, reverse=True)
    out: list[SearchState] = [s.copy() for s in ranked[:params.elite_count]]
    rewards = np.array([s.reward for s in population])

    while len(out) < len(population):
        pa = population[_select_index(rewards, rng)]
        pb = population[_select_index(rewards, rng)]
        if rng.uniform() < params.crossover_prob:
            x1 = _uniform_crossover(pa.x1, pb.x1, rng)
            x2 = _order_crossover(pa.x2, pb.x2, rng)
        else:
            x1, x2 = pa.x1.copy(), pa.x2.copy()
        x1, x2 = _mutate(x1, x2, params.mutation_rate, max_lockers, rng)
        out.append(SearchState(x1=x1, x2=x2))
    return out


def run_ga(pool: TaskPool, instance: Instance, policy: AdjustmentPolicy,
           params: GaParams) -> tuple[SearchState, RoutePlan, RunHistory]:
    """Full GA run on the shared encoding; deterministic per seed."""
    n = len(pool)
    if n == 0:
        raise NothingToSolveError("task pool is empty")
    lockers = effective_locker_count(instance.fleet.max_lockers, n)
    rng = np.random.default_rng(params.seed)
    evaluator = Evaluator(pool, instance, policy)

    population = [
        SearchState(x1=rng.integers(0, lockers, size=n), x2=rng.permutation(n))
        for _ in range(params.population)
    ]
    for state in population:
        evaluator.reward(state)

    best = max(population, key=lambda s: s.reward)
    history = RunHistory(initial_best=best.reward)

    for _ in range(params.generations):
        population = next_generation(population, params, rng, lockers)
        for state in population:
            if state.reward is None:
                evaluator.reward(state)
        gen_best = max(population, key=lambda s: s.reward)
        if gen_best.reward > best.reward:
            best = gen_best
        history.best_per_step.append(best.reward)

    plan = evaluator.plan(best)
    return best, plan, history


__all__ = ["GaParams", "next_generation", "run_ga"]

"""Hybrid Q-learning solver over the task-allocation / task-sequence encoding.

The solver learns two adjacency-value tables: one over locker indices scoring
which locker follows which in the allocation vector, one over task ids scoring
which task follows which in the execution permutation. Each table carries one
extra virtual start row used to pick the first element of its chain. A
population of agents alternates a global construction step (epsilon-greedy
sampling of both chains from the normalized tables) with a differential local
move toward or away from another agent's best state; improvements are accepted
greedily and the accepted states feed the table updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import NothingToSolveError, ShapeError
from .instance import Instance
from .routing import AdjustmentPolicy, RoutePlan, evaluate_solution
from .state import SearchState
from .taskgen import TaskPool


@dataclass
class HqmParams:
    """Solver parameters.

    ``epsilon=None`` redraws the greedy threshold uniformly from (0, 1) at
    every single selection; a float pins it. The learning rate follows the
    schedule alpha(t) = 0.9 * exp(-t / timesteps).
    """

    agents: int = 100
    timesteps: int = 1000
    gamma: float = 0.9
    epsilon: Optional[float] = None
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.agents < 1:
            raise ValueError("agents must be >= 1")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")

    def alpha(self, t: int) -> float:
        return 0.9 * math.exp(-t / self.timesteps)


@dataclass
class QMatrices:
    """Adjacency-value tables for the two chains.

    ``q1`` has shape (lockers + 1, lockers), ``q2`` shape (tasks + 1, tasks);
    the extra last row of each is the virtual start row that scores first
    elements.
    """

    q1: np.ndarray
    q2: np.ndarray

    @classmethod
    def zeros(cls, lockers: int, tasks: int) -> "QMatrices":
        return cls(q1=np.zeros((lockers + 1, lockers)),
                   q2=np.zeros((tasks + 1, tasks)))

    def copy(self) -> "QMatrices":
        return QMatrices(q1=self.q1.copy(), q2=self.q2.copy())


@dataclass
class Agent:
    """One solution holder: its accepted states (most recent last) and RNG stream."""

    states: list[SearchState]
    best: SearchState
    rng: np.random.Generator

    def accept(self, state: SearchState) -> None:
        self.states.append(state)
        self.best = state


@dataclass
class RunHistory:
    initial_best: float
    best_per_step: list[float] = field(default_factory=list)
    convergence_step: Optional[int] = None

    @property
    def final_best(self) -> float:
        return self.best_per_step[-1] if self.best_per_step else self.initial_best


def write_history_csv(history: RunHistory, path: Union[str, Path],
                      header_comment: Optional[str] = None) -> None:
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    lines.append("timestep,best_reward")
    lines.append(f"0,{history.initial_best!r}")
    for t, r in enumerate(history.best_per_step, start=1):
        lines.append(f"{t},{r!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def effective_locker_count(max_lockers: int, num_tasks: int) -> int:
    """Lockers worth distinguishing: never more than one per task."""
    return max(1, min(max_lockers, num_tasks))


# ---------------------------------------------------------------------------
# Evaluation with memoization
# ---------------------------------------------------------------------------


class Evaluator:
    """Caches rewards of previously scored states (evaluation is pure)."""

    _CACHE_LIMIT = 150_000

    def __init__(self, pool: TaskPool, instance: Instance, policy: AdjustmentPolicy):
        self.pool = pool
        self.instance = instance
        self.policy = policy
        self._cache: dict[tuple[bytes, bytes], float] = {}
        self.calls = 0

    def reward(self, state: SearchState) -> float:
        self.calls += 1
        key = state.key()
        hit = self._cache.get(key)
        if hit is not None:
            state.reward = hit
            return hit
        _, cost = evaluate_solution(state, self.pool, self.instance, self.policy)
        if len(self._cache) >= self._CACHE_LIMIT:
            self._cache.clear()
        self._cache[key] = cost.reward
        state.reward = cost.reward
        return cost.reward

    def plan(self, state: SearchState) -> RoutePlan:
        plan, _ = evaluate_solution(state, self.pool, self.instance, self.policy)
        return plan


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def init_agents(pool: TaskPool, max_lockers: int, params: HqmParams,
                ) -> tuple[list[Agent], QMatrices]:
    """One uniformly random state per agent, plus all-zero value tables."""
    n = len(pool)
    if n == 0:
        raise NothingToSolveError("task pool is empty")
    lockers = effective_locker_count(max_lockers, n)
    seeds = np.random.SeedSequence(params.seed).spawn(params.agents)
    agents = []
    for s in seeds:
        rng = np.random.default_rng(s)
        state = SearchState(x1=rng.integers(0, lockers, size=n),
                            x2=rng.permutation(n))
        agents.append(Agent(states=[state], best=state, rng=rng))
    return agents, QMatrices.zeros(lockers, n)


def normalize_q(q: np.ndarray) -> np.ndarray:
    """Row-wise min-max scaling to [0, 1]; constant rows become uniform."""
    if not np.all(np.isfinite(q)):
        raise ValueError("Q matrix contains non-finite entries")
    lo = q.min(axis=1, keepdims=True)
    hi = q.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.empty_like(q, dtype=float)
    flat = (span == 0.0).ravel()
    np.divide(q - lo, span, out=out, where=~flat[:, None])
    out[flat] = 1.0 / q.shape[1]
    return out


def _pick_from_row(row: np.ndarray, candidates: np.ndarray, epsilon: Optional[float],
                   rng: np.random.Generator) -> int:
    """Epsilon-greedy pick among ``candidates`` scored by ``row``.

    With probability epsilon the best-scored candidate wins (first index on
    ties); otherwise one is sampled proportionally to its score, uniformly if
    the restricted row sums to zero. When epsilon is None a fresh threshold is
    drawn for this one selection.
    """
    eps = rng.uniform() if epsilon is None else epsilon
    scores = row[candidates]
    if rng.uniform() < eps:
        return int(candidates[int(np.argmax(scores))])
    total = scores.sum()
    if total <= 0.0:
        return int(candidates[rng.integers(len(candidates))])
    return int(candidates[rng.choice(len(candidates), p=scores / total)])


def global_construct(agent: Agent, qmats: QMatrices, epsilon: Optional[float] = None,
                     rng: Optional[np.random.Generator] = None) -> SearchState:
    """Build a full state by walking both chains of the normalized tables.

    The allocation vector is filled task by task, each locker drawn from the
    row of its predecessor (virtual start row first). The permutation is built
    the same way with already-used tasks masked out and the row renormalized.
    """
    rng = rng if rng is not None else agent.rng
    n_lockers = qmats.q1.shape[1]
    n_tasks = qmats.q2.shape[1]

    x1 = np.empty(n_tasks, dtype=np.int64)
    prev = n_lockers  # virtual start row
    all_lockers = np.arange(n_lockers)
    for t in range(n_tasks):
        nxt = _pick_from_row(qmats.q1[prev], all_lockers, epsilon, rng)
        x1[t] = nxt
        prev = nxt

    x2 = np.empty(n_tasks, dtype=np.int64)
    unused = np.ones(n_tasks, dtype=bool)
    prev = n_tasks
    for t in range(n_tasks):
        candidates = np.nonzero(unused)[0]
        nxt = _pick_from_row(qmats.q2[prev], candidates, epsilon, rng)
        x2[t] = nxt
        unused[nxt] = False
        prev = nxt

    return SearchState(x1=x1, x2=x2)


def local_move(state: SearchState, neighbor: SearchState, omega: Optional[float] = None,
               rng: Optional[np.random.Generator] = None,
               max_lockers: Optional[int] = None) -> SearchState:
    """Differential step: new = state + omega * (state - neighbor), repaired.

    The allocation vector is repaired by rounding and wrapping modulo
    ``max_lockers`` (inferred from the parents when omitted); the permutation
    by rank-ordering the raw values (stable ties). omega defaults to a fresh
    U(-1, 1) draw; omega = 0 returns an exact copy.
    """
    if state.x1.shape != neighbor.x1.shape or state.x2.shape != neighbor.x2.shape:
        raise ShapeError("states come from different task pools")
    if omega is None:
        if rng is None:
            raise ValueError("either omega or rng must be provided")
        omega = float(rng.uniform(-1.0, 1.0))

    lockers = max_lockers
    if lockers is None:
        lockers = int(max(state.x1.max(initial=0), neighbor.x1.max(initial=0))) + 1
    raw1 = state.x1 + omega * (state.x1 - neighbor.x1)
    x1 = np.mod(np.rint(raw1).astype(np.int64), lockers)

    raw2 = state.x2 + omega * (state.x2 - neighbor.x2)
    order = np.argsort(raw2, kind="stable")
    x2 = np.empty_like(state.x2)
    x2[order] = np.arange(len(raw2))
    return SearchState(x1=x1, x2=x2)


def _chain_pairs(values: np.ndarray, start_row: int) -> list[tuple[int, int]]:
    pairs = [(start_row, int(values[0]))]
    pairs.extend((int(values[k - 1]), int(values[k])) for k in range(1, len(values)))
    return pairs


def update_q(qmats: QMatrices, state: SearchState, reward: float, alpha: float,
             gamma: float) -> QMatrices:
    """One-step value update along both chains of an accepted state.

    Every adjacent pair (including the virtual start transition) receives
    Q <- Q + alpha * (reward + gamma * max(next row) - Q), applied
    sequentially in chain order. Mutates and returns ``qmats``.
    """
    for q, values in ((qmats.q1, state.x1), (qmats.q2, state.x2)):
        if len(values) == 0:
            continue
        for a, b in _chain_pairs(values, q.shape[0] - 1):
            q[a, b] += alpha * (reward + gamma * q[b].max() - q[a, b])
    return qmats


def has_converged(prev: QMatrices, cur: QMatrices, tol: float) -> bool:
    """True when every entry of both tables moved by strictly less than ``tol``."""
    if prev.q1.shape != cur.q1.shape or prev.q2.shape != cur.q2.shape:
        raise ShapeError("Q matrices have mismatched dimensions")
    diff = max(np.abs(prev.q1 - cur.q1).max(initial=0.0),
               np.abs(prev.q2 - cur.q2).max(initial=0.0))
    return diff < tol


# ---------------------------------------------------------------------------
# Outer loop
# ---------------------------------------------------------------------------


def run_hqm(pool: TaskPool, instance: Instance, policy: AdjustmentPolicy,
            params: HqmParams) -> tuple[SearchState, RoutePlan, RunHistory]:
    """Full solver run; deterministic per seed.

    Per timestep every agent proposes one globally constructed state and one
    local differential move against another agent's best, accepting each only
    on strict reward improvement; the tables are then updated from every
    agent's current best and the loop stops at the step budget or once the
    tables stop moving.
    """
    evaluator = Evaluator(pool, instance, policy)
    agents, qmats = init_agents(pool, instance.fleet.max_lockers, params)
    lockers = qmats.q1.shape[1]
    for agent in agents:
        evaluator.reward(agent.best)

    history = RunHistory(initial_best=max(a.best.reward for a in agents))
    n_agents = len(agents)

    for t in range(1, params.timesteps + 1):
        alpha = params.alpha(t)
        snapshot = qmats.copy()
        normalized = QMatrices(q1=normalize_q(qmats.q1), q2=normalize_q(qmats.q2))

        for agent in agents:
            candidate = global_construct(agent, normalized, params.epsilon)
            if evaluator.reward(candidate) > agent.best.reward:
                agent.accept(candidate)

        for idx, agent in enumerate(agents):
            if n_agents > 1:
                j = int(agent.rng.integers(n_agents - 1))
                if j >= idx:
                    j += 1
                neighbor = agents[j].best
            else:
                neighbor = agent.best
            moved = local_move(agent.best, neighbor, rng=agent.rng, max_lockers=lockers)
            if evaluator.reward(moved) > agent.best.reward:
                agent.accept(moved)

        for agent in agents:
            update_q(qmats, agent.best, agent.best.reward, alpha, params.gamma)

        best = max(a.best.reward for a in agents)
        history.best_per_step.append(best)
        if has_converged(snapshot, qmats, params.tol):
            history.convergence_step = t
            break

    best_agent = max(agents, key=lambda a: a.best.reward)
    best_state = best_agent.best
    plan = evaluator.plan(best_state)
    return best_state, plan, history


__all__ = [
    "HqmParams",
    "QMatrices",
    "Agent",
    "RunHistory",
    "Evaluator",
    "effective_locker_count",
    "init_agents",
    "normalize_q",
    "global_construct",
    "local_move",
    "update_q",
    "has_converged",
    "run_hqm",
    "write_history_csv",
]

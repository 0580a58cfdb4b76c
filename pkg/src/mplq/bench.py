"""Experiment grid and critical-factor sweeps.

The grid crosses network sizes (parking-space counts x locations per space)
with both solvers and both adjustment strategies, replicated over seeds, and
reports lockers deployed, travel distance, average service delay, reward,
improvement rate, and the per-cell reward gap between strategies. Sweeps vary
one generator factor at a time and record the mean service delay it induces.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import ConfigurationError, ParameterError, UndefinedRateError
from .ga import GaParams, run_ga
from .hqm import HqmParams, RunHistory, run_hqm
from .instance import GeneratorConfig, assign_customers, generate_instance
from .routing import AdjustmentPolicy, compute_delay
from .taskgen import build_tasks

SWEEP_FACTORS = (
    "T_s", "T_p", "Q", "V_l", "num_spaces", "locations_per_space", "rho_l", "rho_c",
)


@dataclass(frozen=True)
class BudgetProfile:
    """Solver effort: agents doubles as GA population, iterations as generations."""

    agents: int
    iterations: int

    @classmethod
    def desk(cls) -> "BudgetProfile":
        return cls(agents=20, iterations=200)

    @classmethod
    def paper(cls) -> "BudgetProfile":
        return cls(agents=100, iterations=1000)

    @classmethod
    def named(cls, name: str) -> "BudgetProfile":
        try:
            return {"desk": cls.desk, "paper": cls.paper}[name]()
        except KeyError:
            raise ConfigurationError(f"unknown budget profile {name!r}; expected desk or paper")


@dataclass(frozen=True)
class GridConfig:
    spaces_counts: tuple[int, ...] = (5, 6, 7, 8, 9, 10)
    locations_counts: tuple[int, ...] = (5, 10, 15, 20)
    policies: tuple[str, ...] = ("btd", "hcps")
    solvers: tuple[str, ...] = ("hqm", "ga")
    replications: int = 1
    base_config: GeneratorConfig = field(default_factory=GeneratorConfig)
    seeds: Optional[tuple[int, ...]] = None
    budget: BudgetProfile = field(default_factory=BudgetProfile.desk)

    def __post_init__(self) -> None:
        if not self.spaces_counts or not self.locations_counts:
            raise ConfigurationError("grid axes must be non-empty")
        if not self.policies or not self.solvers:
            raise ConfigurationError("policies and solvers must be non-empty")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.replications:
            raise ConfigurationError("seeds must provide one seed per replication")

    def replication_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return self.seeds
        return tuple(self.base_config.seed + r for r in range(self.replications))


@dataclass(frozen=True)
class CellOutcome:
    """One solver x policy x replication record of a grid cell."""

    spaces: int
    locations: int
    solver: str
    policy: str
    replication: int
    seed: int
    lockers: int
    distance_km: float
    avg_delay_min: float
    reward: float
    improvement_pct: float


@dataclass(frozen=True)
class CellAggregate:
    spaces: int
    locations: int
    solver: str
    policy: str
    lockers_mean: float
    lockers_mean_rounded_up: int
    distance_mean: float
    delay_mean: float
    reward_mean: float
    improvement_mean: float


@dataclass(frozen=True)
class GapEntry:
    spaces: int
    locations: int
    solver: str
    reward_gap: float


@dataclass(frozen=True)
class GridResult:
    rows: tuple[CellOutcome, ...]

    def cell_aggregates(self) -> list[CellAggregate]:
        groups: dict[tuple, list[CellOutcome]] = {}
        for row in self.rows:
            groups.setdefault((row.spaces, row.locations, row.solver, row.policy), []).append(row)
        out = []
        for (spaces, locations, solver, policy), rows in sorted(groups.items()):
            lockers = _mean([r.lockers for r in rows])
            out.append(CellAggregate(
                spaces=spaces, locations=locations, solver=solver, policy=policy,
                lockers_mean=lockers,
                lockers_mean_rounded_up=math.ceil(lockers),
                distance_mean=_mean([r.distance_km for r in rows]),
                delay_mean=_mean([r.avg_delay_min for r in rows]),
                reward_mean=_mean([r.reward for r in rows]),
                improvement_mean=_mean([r.improvement_pct for r in rows]),
            ))
        return out

    def reward_gaps(self) -> list[GapEntry]:
        """Mean reward under the depot strategy minus the holding strategy, per cell."""
        by_policy: dict[tuple, dict[str, float]] = {}
        for agg in self.cell_aggregates():
            by_policy.setdefault((agg.spaces, agg.locations, agg.solver), {})[agg.policy] = agg.reward_mean
        out = []
        for (spaces, locations, solver), rewards in sorted(by_policy.items()):
            if "btd" in rewards and "hcps" in rewards:
                out.append(GapEntry(spaces, locations, solver,
                                    reward_gap(rewards["btd"], rewards["hcps"])))
        return out

    def block_means(self) -> list[CellAggregate]:
        """Means over all location settings and replications of one spaces count."""
        groups: dict[tuple, list[CellOutcome]] = {}
        for row in self.rows:
            groups.setdefault((row.spaces, row.solver, row.policy), []).append(row)
        out = []
        for (spaces, solver, policy), rows in sorted(groups.items()):
            lockers = _mean([r.lockers for r in rows])
            out.append(CellAggregate(
                spaces=spaces, locations=0, solver=solver, policy=policy,
                lockers_mean=lockers,
                lockers_mean_rounded_up=math.ceil(lockers),
                distance_mean=_mean([r.distance_km for r in rows]),
                delay_mean=_mean([r.avg_delay_min for r in rows]),
                reward_mean=_mean([r.reward for r in rows]),
                improvement_mean=_mean([r.improvement_pct for r in rows]),
            ))
        return out


@dataclass(frozen=True)
class SweepConfig:
    factor: str
    values: tuple[float, ...]
    replications: int = 10
    base_config: GeneratorConfig = field(default_factory=GeneratorConfig)
    policy: str = "hcps"
    budget: BudgetProfile = field(default_factory=BudgetProfile.desk)
    seeds: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.factor not in SWEEP_FACTORS:
            raise ConfigurationError(
                f"unknown sweep factor {self.factor!r}; expected one of {SWEEP_FACTORS}")
        if not self.values:
            raise ConfigurationError("sweep values must be non-empty")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.replications:
            raise ConfigurationError("seeds must provide one seed per replication")

    def replication_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return self.seeds
        return tuple(self.base_config.seed + r for r in range(self.replications))


@dataclass(frozen=True)
class SweepPoint:
    factor: str
    value: float
    mean_delay: float
    stderr: float
    replications: int


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _stderr(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    m = _mean(values)
    var = sum((v - m) ** 2 for v in values) / (n - 1)
    return math.sqrt(var / n)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def improvement_rate(history: RunHistory) -> float:
    """Final best reward over initial best reward, as a percentage gain."""
    if history.initial_best == 0:
        raise UndefinedRateError("initial best reward is zero; improvement rate undefined")
    return (history.final_best - history.initial_best) / history.initial_best * 100.0


def reward_gap(reward_btd: float, reward_hcps: float) -> float:
    """Signed difference: depot-strategy reward minus holding-strategy reward."""
    if not (math.isfinite(reward_btd) and math.isfinite(reward_hcps)):
        raise ParameterError("reward gap requires finite rewards")
    return reward_btd - reward_hcps


# ---------------------------------------------------------------------------
# Grid execution
# ---------------------------------------------------------------------------


def _solve_one(pool, instance, solver: str, policy_name: str, budget: BudgetProfile,
               seed: int):
    policy = AdjustmentPolicy.parse(policy_name)
    if solver == "hqm":
        params = HqmParams(agents=budget.agents, timesteps=budget.iterations, seed=seed)
        return run_hqm(pool, instance, policy, params)
    if solver == "ga":
        elite = max(0.05, 1.0 / budget.agents)  # keep >= 1 elite at tiny populations
        params = GaParams(population=budget.agents, generations=budget.iterations,
                          elite_fraction=elite, seed=seed)
        return run_ga(pool, instance, policy, params)
    raise ConfigurationError(f"unknown solver {solver!r}; expected hqm or ga")


def _run_cell_replication(args: tuple) -> list[CellOutcome]:
    """One (cell, replication): every solver x policy on the identical instance."""
    spaces, locations, rep, seed, base_config, solvers, policies, budget = args
    config = replace(base_config, num_spaces=spaces, locations_per_space=locations, seed=seed)
    instance = generate_instance(config)
    assignment = assign_customers(instance)
    pool = build_tasks(instance, assignment)
    rows = []
    for solver in solvers:
        for policy_name in policies:
            best, plan, history = _solve_one(pool, instance, solver, policy_name, budget, seed)
            _, avg_delay = compute_delay(plan)
            rows.append(CellOutcome(
                spaces=spaces, locations=locations, solver=solver, policy=policy_name,
                replication=rep, seed=seed,
                lockers=plan.lockers_dispatched,
                distance_km=plan.total_distance,
                avg_delay_min=avg_delay,
                reward=best.reward,
                improvement_pct=improvement_rate(history),
            ))
    return rows


def run_grid(grid: GridConfig, jobs: int = 1) -> GridResult:
    """Run the full grid; every solver/policy pair sees identical instances."""
    seeds = grid.replication_seeds()
    units = [
        (spaces, locations, rep, seeds[rep], grid.base_config,
         grid.solvers, grid.policies, grid.budget)
        for spaces in grid.spaces_counts
        for locations in grid.locations_counts
        for rep in range(grid.replications)
    ]
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell_replication, units))
    else:
        chunks = [_run_cell_replication(u) for u in units]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.spaces, r.locations, r.replication, r.solver, r.policy))
    return GridResult(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Factor sweeps
# ---------------------------------------------------------------------------


def apply_factor(base: GeneratorConfig, factor: str, value: float) -> GeneratorConfig:
    """Rebuild a generator config with one swept factor pinned to ``value``.

    The two time-window factors set the span range to [value - 20, value + 20]
    (floored at 1 minute); the walking-range factor spreads +-0.1 km around the
    value.
    """
    if factor == "T_s":
        return replace(base, customer_span_range=(max(1.0, value - 20.0), value + 20.0))
    if factor == "T_p":
        return replace(base, parking_span_range=(max(1.0, value - 20.0), value + 20.0))
    if factor == "Q":
        return replace(base, capacity=value)
    if factor == "V_l":
        return replace(base, locker_speed=value)
    if factor == "num_spaces":
        return replace(base, num_spaces=int(value))
    if factor == "locations_per_space":
        return replace(base, locations_per_space=int(value))
    if factor == "rho_l":
        return replace(base, service_radius=value)
    if factor == "rho_c":
        return replace(base, walk_range=(max(0.05, value - 0.1), value + 0.1))
    raise ConfigurationError(f"unknown sweep factor {factor!r}")


def _run_sweep_point(args: tuple) -> SweepPoint:
    factor, value, base_config, policy_name, budget, seeds = args
    delays = []
    for seed in seeds:
        config = apply_factor(replace(base_config, seed=seed), factor, value)
        instance = generate_instance(config)
        assignment = assign_customers(instance)
        pool = build_tasks(instance, assignment)
        policy = AdjustmentPolicy.parse(policy_name)
        params = HqmParams(agents=budget.agents, timesteps=budget.iterations,
                           seed=seed)
        _, plan, _ = run_hqm(pool, instance, policy, params)
        _, avg_delay = compute_delay(plan)
        delays.append(avg_delay)
    return SweepPoint(factor=factor, value=value, mean_delay=_mean(delays),
                      stderr=_stderr(delays), replications=len(seeds))


def sweep_factor(sweep: SweepConfig, jobs: int = 1) -> list[SweepPoint]:
    """Delay response of one factor across its axis values; seeds pair across values."""
    seeds = sweep.replication_seeds()
    units = [
        (sweep.factor, value, sweep.base_config, sweep.policy, sweep.budget, seeds)
        for value in sweep.values
    ]
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_run_sweep_point, units))
    else:
        points = [_run_sweep_point(u) for u in units]
    return points


# ---------------------------------------------------------------------------
# CSV / plot-data output
# ---------------------------------------------------------------------------


def write_grid_csv(result: GridResult, path: Union[str, Path],
                   header_comment: Optional[str] = None) -> None:
    """One row per replication record, then cell/gap/block aggregate rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["kind", "spaces", "locations", "solver", "policy", "replication",
                         "seed", "lockers", "distance_km", "avg_delay_min", "reward",
                         "improvement_pct", "reward_gap"])
        for r in result.rows:
            writer.writerow(["rep", r.spaces, r.locations, r.solver, r.policy,
                             r.replication, r.seed, r.lockers, repr(r.distance_km),
                             repr(r.avg_delay_min), repr(r.reward),
                             repr(r.improvement_pct), ""])
        for a in result.cell_aggregates():
            writer.writerow(["cell_mean", a.spaces, a.locations, a.solver, a.policy, "",
                             "", a.lockers_mean_rounded_up, repr(a.distance_mean),
                             repr(a.delay_mean), repr(a.reward_mean),
                             repr(a.improvement_mean), ""])
        for g in result.reward_gaps():
            writer.writerow(["gap", g.spaces, g.locations, g.solver, "", "", "", "", "",
                             "", "", "", repr(g.reward_gap)])
        for a in result.block_means():
            writer.writerow(["block_mean", a.spaces, "", a.solver, a.policy, "", "",
                             a.lockers_mean_rounded_up, repr(a.distance_mean),
                             repr(a.delay_mean), repr(a.reward_mean),
                             repr(a.improvement_mean), ""])


def read_grid_rows(path: Union[str, Path]) -> list[CellOutcome]:
    """Parse the replication records back out of a grid CSV."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for rec in csv.DictReader(lines):
        if rec["kind"] != "rep":
            continue
        rows.append(CellOutcome(
            spaces=int(rec["spaces"]), locations=int(rec["locations"]),
            solver=rec["solver"], policy=rec["policy"],
            replication=int(rec["replication"]), seed=int(rec["seed"]),
            lockers=int(rec["lockers"]), distance_km=float(rec["distance_km"]),
            avg_delay_min=float(rec["avg_delay_min"]), reward=float(rec["reward"]),
            improvement_pct=float(rec["improvement_pct"])))
    return rows


def write_sweep_csv(points: Sequence[SweepPoint], path: Union[str, Path],
                    header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["factor", "value", "mean_delay_min", "stderr", "replications"])
        for p in points:
            writer.writerow([p.factor, repr(p.value), repr(p.mean_delay),
                             repr(p.stderr), p.replications])


def read_sweep_points(path: Union[str, Path]) -> list[SweepPoint]:
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for rec in csv.DictReader(lines):
        points.append(SweepPoint(
            factor=rec["factor"], value=float(rec["value"]),
            mean_delay=float(rec["mean_delay_min"]), stderr=float(rec["stderr"]),
            replications=int(rec["replications"])))
    return points


def write_plotdata(result_or_points, out_dir: Union[str, Path]) -> list[Path]:
    """Long-format (x, y, series) files, one per plotted metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if isinstance(result_or_points, GridResult):
        metrics = {
            "lockers": lambda a: a.lockers_mean_rounded_up,
            "distance": lambda a: a.distance_mean,
            "delay": lambda a: a.delay_mean,
            "reward": lambda a: a.reward_mean,
        }
        aggregates = result_or_points.cell_aggregates()
        for name, getter in metrics.items():
            p = out_dir / f"grid_{name}.csv"
            with open(p, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["x", "y", "series"])
                for a in aggregates:
                    writer.writerow([a.locations, repr(float(getter(a))),
                                     f"{a.solver}-{a.policy}-spaces{a.spaces}"])
            written.append(p)
    else:
        points = list(result_or_points)
        if points:
            p = out_dir / f"sweep_{points[0].factor}.csv"
            with open(p, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["x", "y", "series"])
                for pt in points:
                    writer.writerow([repr(pt.value), repr(pt.mean_delay), pt.factor])
            written.append(p)
    return written


__all__ = [
    "SWEEP_FACTORS",
    "BudgetProfile",
    "GridConfig",
    "CellOutcome",
    "CellAggregate",
    "GapEntry",
    "GridResult",
    "SweepConfig",
    "SweepPoint",
    "improvement_rate",
    "reward_gap",
    "apply_factor",
    "run_grid",
    "sweep_factor",
    "write_grid_csv",
    "read_grid_rows",
    "write_sweep_csv",
    "read_sweep_points",
    "write_plotdata",
]

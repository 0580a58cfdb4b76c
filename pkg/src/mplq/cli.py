"""Command-line driver: generate, solve, validate, oracle, bench, sweep.

Every command honors --seed (falling back to the MPLQ_SEED environment
variable) and writes outputs whose first line records the resolved
configuration, so any run can be reproduced from its artifacts. A final
machine-readable RESULT line of key=value pairs is printed on success.

Exit codes: 0 success, 1 infeasible result or refused computation, 2 usage or
file-parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench
from .errors import (ConfigurationError, InstanceFormatError, MplqError,
                     SearchSpaceLimitError)
from .ga import GaParams, run_ga
from .hqm import HqmParams, effective_locker_count, run_hqm, write_history_csv
from .instance import (GeneratorConfig, assign_customers, generate_instance,
                       load_instance, save_instance, validate_instance,
                       write_assignment_csv)
from .oracle import OracleLimit, brute_force_best, search_space_size
from .routing import (AdjustmentPolicy, TravelNoise, check_feasibility,
                      compute_delay, evaluate_solution, write_plan_csv)
from .state import SearchState
from .taskgen import build_tasks, write_taskpool_csv

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2


def _resolve_seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("MPLQ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"MPLQ_SEED must be an integer, got {env!r}")
    return 0


def _config_line(args: argparse.Namespace, seed: int) -> str:
    pairs = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    pairs["seed"] = seed
    return "config " + " ".join(f"{k}={v}" for k, v in pairs.items())


def _print_result(**pairs) -> None:
    print("RESULT " + " ".join(f"{k}={v}" for k, v in pairs.items()))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_generate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    config = GeneratorConfig(
        num_spaces=args.spaces,
        locations_per_space=args.locations,
        service_radius=args.service_radius,
        seed=seed,
        capacity=args.capacity,
        locker_speed=args.speed,
        buffer_min=args.buffer,
    )
    if args.max_lockers is not None:
        config = replace(config, max_lockers=args.max_lockers)
    instance = generate_instance(config)
    report = validate_instance(instance)
    if not report.ok:
        for v in report.violations:
            print(f"violation: {v.entity}: {v.rule}", file=sys.stderr)
        return EXIT_INFEASIBLE
    save_instance(instance, args.out)
    _print_result(command="generate", seed=seed, out=args.out,
                  spaces=len(instance.spaces), customers=len(instance.customers))
    return EXIT_OK


def _prepare(instance_path: str):
    instance = load_instance(instance_path)
    assignment = assign_customers(instance)
    pool = build_tasks(instance, assignment)
    return instance, assignment, pool


def _load_solver_config(path: Optional[str]) -> dict:
    """Solver config file: JSON with keys agents, timesteps, gamma, tol, seed, policy."""
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InstanceFormatError(f"cannot read solver config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(
            f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    known = {"agents", "timesteps", "gamma", "tol", "seed", "policy"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InstanceFormatError(f"{path}: unknown solver config keys {unknown}")
    return data


def _cmd_solve(args: argparse.Namespace) -> int:
    file_cfg = _load_solver_config(args.config)
    seed = args.seed if args.seed is not None else file_cfg.get("seed")
    seed = _resolve_seed(seed)
    agents = args.agents if args.agents is not None else int(file_cfg.get("agents", 20))
    iters = args.iters if args.iters is not None else int(file_cfg.get("timesteps", 200))
    gamma = args.gamma if args.gamma is not None else float(file_cfg.get("gamma", 0.9))
    tol = args.tol if args.tol is not None else float(file_cfg.get("tol", 1e-8))
    policy_name = args.policy if args.policy is not None \
        else str(file_cfg.get("policy", "hcps"))

    instance, assignment, pool = _prepare(args.instance)
    policy = AdjustmentPolicy.parse(policy_name)
    noise = TravelNoise(sigma=args.noise_sigma, seed=seed) if args.noise_sigma > 0 else None

    if args.solver == "hqm":
        params = HqmParams(agents=agents, timesteps=iters, gamma=gamma, tol=tol,
                           seed=seed)
        best, plan, history = run_hqm(pool, instance, policy, params)
    elif args.solver == "ga":
        elite = max(0.05, 1.0 / agents)
        params = GaParams(population=agents, generations=iters,
                          elite_fraction=elite, seed=seed)
        best, plan, history = run_ga(pool, instance, policy, params)
    else:
        raise ConfigurationError(f"unknown solver {args.solver!r}")

    if noise is not None:
        plan, _ = evaluate_solution(best, pool, instance, policy, noise=noise)

    feasibility = check_feasibility(plan, best, pool, instance)
    total_delay, avg_delay = compute_delay(plan)
    header = _config_line(args, seed)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_plan_csv(plan, pool, out_dir / "plan.csv", header_comment=header)
    write_history_csv(history, out_dir / "history.csv", header_comment=header)
    write_taskpool_csv(pool, out_dir / "tasks.csv")
    write_assignment_csv(instance, assignment, out_dir / "assignment.csv")
    solution = {
        "config": header,
        "solver": args.solver,
        "policy": policy.value,
        "seed": seed,
        "x1": best.x1.tolist(),
        "x2": best.x2.tolist(),
        "reward": best.reward,
    }
    (out_dir / "solution.json").write_text(json.dumps(solution, indent=2) + "\n",
                                           encoding="utf-8")

    improvement = bench.improvement_rate(history)
    metrics = dict(
        command="solve", solver=args.solver, policy=policy.value, seed=seed,
        tasks=len(pool), unassignable=len(assignment.unassignable),
        unservable=len(pool.unservable), lockers=plan.lockers_dispatched,
        distance_km=repr(plan.total_distance), total_delay_min=repr(total_delay),
        avg_delay_min=repr(avg_delay), reward=repr(best.reward),
        improvement_pct=repr(improvement),
        converged_step=history.convergence_step,
        hard_violations=len(feasibility.hard()),
    )
    (out_dir / "metrics.txt").write_text(
        f"# {header}\n" + "\n".join(f"{k}={v}" for k, v in metrics.items()) + "\n",
        encoding="utf-8")
    _print_result(**metrics)
    return EXIT_OK if not feasibility.hard() else EXIT_INFEASIBLE


def _cmd_validate(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    report = validate_instance(instance)
    violations = 0
    for v in report.violations:
        print(f"instance violation: {v.entity}: {v.rule}")
        violations += 1

    if args.solution:
        try:
            data = json.loads(Path(args.solution).read_text(encoding="utf-8"))
            x1 = np.array(data["x1"], dtype=np.int64)
            x2 = np.array(data["x2"], dtype=np.int64)
            policy = AdjustmentPolicy.parse(data.get("policy", "hcps"))
        except (OSError, ValueError, KeyError) as exc:
            raise InstanceFormatError(f"cannot parse solution file {args.solution}: {exc}")
        assignment = assign_customers(instance)
        pool = build_tasks(instance, assignment)
        state = SearchState(x1=x1, x2=x2)
        plan, cost = evaluate_solution(state, pool, instance, policy)
        feasibility = check_feasibility(plan, state, pool, instance)
        for v in feasibility.violations:
            print(f"constraint ({v.constraint}) {v.severity}: {v.entity}: {v.description}")
        violations += len(feasibility.hard())
        _print_result(command="validate", instance=args.instance,
                      solution=args.solution, reward=repr(cost.reward),
                      hard_violations=len(feasibility.hard()),
                      soft_violations=len(feasibility.soft()))
    else:
        _print_result(command="validate", instance=args.instance,
                      instance_violations=len(report.violations))

    return EXIT_OK if violations == 0 else EXIT_INFEASIBLE


def _cmd_oracle(args: argparse.Namespace) -> int:
    instance, _, pool = _prepare(args.instance)
    policy = AdjustmentPolicy.parse(args.policy)
    lockers = args.max_lockers
    if lockers is None:
        lockers = effective_locker_count(instance.fleet.max_lockers, len(pool))
    try:
        best, reward = brute_force_best(pool, instance, policy, lockers,
                                        OracleLimit(max_enumerations=args.limit))
    except SearchSpaceLimitError as exc:
        print(f"refused: {exc.cardinality} states exceed the limit {exc.limit}",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_result(command="oracle", policy=args.policy, tasks=len(pool),
                  lockers=lockers, states=search_space_size(len(pool), lockers),
                  reward=repr(reward), x1=",".join(map(str, best.x1.tolist())),
                  x2=",".join(map(str, best.x2.tolist())))
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    grid = bench.GridConfig(
        spaces_counts=args.spaces,
        locations_counts=args.locations,
        policies=args.policies,
        solvers=args.solvers,
        replications=args.replications,
        base_config=replace(GeneratorConfig(), seed=seed),
        budget=bench.BudgetProfile.named(args.budget),
    )
    result = bench.run_grid(grid, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = _config_line(args, seed)
    bench.write_grid_csv(result, out_dir / "grid.csv", header_comment=header)
    bench.write_plotdata(result, out_dir / "plotdata")
    _print_result(command="bench", seed=seed, cells=len(args.spaces) * len(args.locations),
                  replications=args.replications, rows=len(result.rows),
                  out=str(out_dir / "grid.csv"))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    sweep = bench.SweepConfig(
        factor=args.factor,
        values=args.values,
        replications=args.replications,
        base_config=replace(GeneratorConfig(), seed=seed),
        policy=args.policy,
        budget=bench.BudgetProfile.named(args.budget),
    )
    points = bench.sweep_factor(sweep, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = _config_line(args, seed)
    bench.write_sweep_csv(points, out_dir / "sweep.csv", header_comment=header)
    bench.write_plotdata(points, out_dir / "plotdata")
    _print_result(command="sweep", seed=seed, factor=args.factor,
                  points=len(points), out=str(out_dir / "sweep.csv"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mplq",
        description="Mobile parcel locker location-routing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random instance file")
    p.add_argument("--out", required=True)
    p.add_argument("--spaces", type=int, default=5)
    p.add_argument("--locations", type=int, default=5)
    p.add_argument("--service-radius", type=float, default=5.0)
    p.add_argument("--capacity", type=float, default=20.0)
    p.add_argument("--speed", type=float, default=0.7)
    p.add_argument("--buffer", type=float, default=10.0)
    p.add_argument("--max-lockers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="solve an instance with hqm or ga")
    p.add_argument("--instance", required=True)
    p.add_argument("--solver", choices=("hqm", "ga"), default="hqm")
    p.add_argument("--policy", choices=("btd", "hcps"), default=None)
    p.add_argument("--agents", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--config", default=None,
                   help="JSON solver config (agents, timesteps, gamma, tol, seed, policy)")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("validate", help="validate an instance and optionally a solution")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("oracle", help="exact optimum of a tiny instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", choices=("btd", "hcps"), default="hcps")
    p.add_argument("--max-lockers", type=int, default=None)
    p.add_argument("--limit", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("bench", help="run the experiment grid")
    p.add_argument("--spaces", type=_int_list, default=(5,))
    p.add_argument("--locations", type=_int_list, default=(5,))
    p.add_argument("--solvers", type=_str_list, default=("hqm", "ga"))
    p.add_argument("--policies", type=_str_list, default=("btd", "hcps"))
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--budget", choices=("desk", "paper"), default="desk")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="bench_out")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("sweep", help="sweep one critical factor against delay")
    p.add_argument("--factor", choices=bench.SWEEP_FACTORS, required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--policy", choices=("btd", "hcps"), default="hcps")
    p.add_argument("--budget", choices=("desk", "paper"), default="desk")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="sweep_out")
    p.set_defaults(func=_cmd_sweep)

    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (InstanceFormatError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MplqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(run_cli())


__all__ = ["run_cli", "main", "build_parser"]

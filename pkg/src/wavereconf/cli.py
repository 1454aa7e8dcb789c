"""Command-line entry point: run, check, ssa, sweep."""
from __future__ import annotations

import argparse
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from .errors import OracleCapExceeded, ScenarioError
from .generate import GeneratorParams, random_scenario
from .model import validate_configuration
from .oracle import MAX_AGENTS, feasible
from .protocol import Mode
from .scenario_io import (parse_scenario, serialize_final_configuration,
                          write_metrics_csv, write_trajectory_csv)
from .sim import run
from .stochastic import build_ctmc, ssa_run

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NONTERMINATION = 3
EXIT_CAP = 4
EXIT_DISAGREE = 5


def _err(msg: str) -> None:
    print(f"wavereconf: {msg}", file=sys.stderr)


def _load(path) -> Optional[object]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _err(f"cannot read {path}: {exc.strerror or exc}")
        return None
    try:
        return parse_scenario(text)
    except ScenarioError as exc:
        _err(f"{path}: {exc}")
        return None


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------- run / check

def cmd_run(scenario_path, seed: Optional[int] = None, out=None) -> int:
    scenario = _load(scenario_path)
    if scenario is None:
        return EXIT_INPUT
    result = run(scenario, seed)
    m = result.metrics
    _emit(write_metrics_csv([m]), out)
    final = serialize_final_configuration(scenario, result.configuration,
                                          scenario.broken_after_failures())
    if out is not None:
        Path(out).with_suffix(".config").write_text(final)
    if m.non_termination:
        return EXIT_NONTERMINATION
    return EXIT_OK if m.converged else EXIT_INFEASIBLE


def cmd_check(scenario_path) -> int:
    scenario = _load(scenario_path)
    if scenario is None:
        return EXIT_INPUT
    agents = scenario.agent_map(scenario.broken_after_failures())
    try:
        result = feasible(agents, scenario.task, scenario.transport,
                          current=scenario.initial_configuration())
    except OracleCapExceeded as exc:
        _err(str(exc))
        return EXIT_CAP
    if result.feasible:
        print(f"feasible min_changes={result.min_changes}")
        return EXIT_OK
    print("infeasible")
    return EXIT_INFEASIBLE


def cmd_ssa(agents: int, lambda_fail: float, mu_resolve: float, p_infeasible: float,
            t_max: float, seed: int = 0, out=None) -> int:
    try:
        spec = build_ctmc(agents, lambda_fail, mu_resolve, p_infeasible)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    _emit(write_trajectory_csv(ssa_run(spec, seed, t_max)), out)
    return EXIT_OK


# ---------------------------------------------------------------------- sweep

def parse_range(text: str) -> list:
    """``"4..8"``, ``"4,6,8"`` or ``"5"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if lo > hi:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def sweep_scenario(seed: int, n_agents: int, n_failures: int, gen: GeneratorParams,
                   feasible_only: bool, max_tries: int = 1000):
    """Random scenario for one sweep run; rejection-sampled when ``feasible_only``."""
    rng = random.Random(seed)
    for _ in range(max_tries):
        s = random_scenario(rng, n_agents, n_failures, gen, seed=seed)
        if not feasible_only:
            return s
        if feasible(s.agent_map(s.broken_after_failures()), s.task, s.transport).feasible:
            return s
    raise RuntimeError(f"no feasible scenario after {max_tries} draws (seed {seed})")


def check_run(scenario, result) -> list:
    """Problems with a run as judged by the oracle and the validity rules."""
    problems = []
    m = result.metrics
    agents = scenario.agent_map(scenario.broken_after_failures())
    if m.non_termination:
        return ["no quiescence before t_max"]
    report = validate_configuration(result.configuration, scenario.task, agents, scenario.transport)
    if m.converged and not report.valid:
        problems.append(f"committed configuration is invalid: {report.violations}")
    if len(scenario.failures) == 1:
        oracle = feasible(agents, scenario.task, scenario.transport)
        if oracle.feasible != m.converged:
            problems.append(f"oracle feasible={oracle.feasible} but wave converged={m.converged}")
    else:
        halted = {result.configuration.step_of(a) for a, snap in result.snapshots.items()
                  if snap.mode is Mode.HALTED}
        stray = [v for v in report.violations if v.step not in halted]
        if stray:
            problems.append(f"violations outside halted steps: {stray}")
    # A lone wave never retries; under contention each retry is a fresh
    # search, so the bound applies per attempt.
    n = len(scenario.agents)
    worst = max(result.attempt_messages.values(), default=0)
    if worst > 2 * n * (n + 1):
        problems.append(f"{worst} messages in one wave attempt exceeds {2 * n * (n + 1)}")
    return problems


def _sweep_one(job):
    seed, n_agents, n_failures, gen, feasible_only = job
    scenario = sweep_scenario(seed, n_agents, n_failures, gen, feasible_only)
    result = run(scenario)
    return result.metrics, check_run(scenario, result)


def cmd_sweep(agents="4..8", runs: int = 100, seed0: int = 0, out=None, failures="1",
              feasible_only: bool = True, workers: int = 1,
              gen: GeneratorParams = GeneratorParams(), tamper=None) -> int:
    """Random-scenario sweep over agent and failure counts.

    ``tamper(scenario, result)`` may mutate each result before it is checked;
    it exists so tests can confirm that disagreements are caught.
    """
    try:
        agent_counts = parse_range(agents) if isinstance(agents, str) else list(agents)
        failure_counts = parse_range(failures) if isinstance(failures, str) else list(failures)
    except ValueError as exc:
        _err(f"bad range: {exc}")
        return EXIT_INPUT
    if any(n < 1 or n > MAX_AGENTS for n in agent_counts) or gen.max_steps > 8:
        _err(f"sweep agent counts must lie in 1..{MAX_AGENTS}")
        return EXIT_CAP
    jobs = []
    for n in agent_counts:
        for f in failure_counts:
            for _ in range(runs):
                jobs.append((seed0 + len(jobs), n, f, gen, feasible_only))

    comments = [
        f"sweep agents={agents} failures={failures} runs={runs} seed0={seed0} "
        f"feasible_only={int(feasible_only)}",
        f"generator {gen.describe()}",
    ]
    rows, disagreements = [], []
    if tamper is None and workers > 1 and jobs:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_one, jobs, chunksize=8))
    else:
        outcomes = []
        for job in jobs:
            seed, n, f, g, fo = job
            scenario = sweep_scenario(seed, n, f, g, fo)
            result = run(scenario)
            if tamper is not None:
                tamper(scenario, result)
            outcomes.append((result.metrics, check_run(scenario, result)))
    for (seed, *_), (metrics, problems) in zip(jobs, outcomes):
        rows.append(metrics)
        disagreements += [f"seed {seed}: {p}" for p in problems]

    _emit(write_metrics_csv(rows, comments), out)
    for d in disagreements:
        _err(d)
    if disagreements:
        return EXIT_DISAGREE
    if any(m.non_termination for m in rows):
        return EXIT_NONTERMINATION
    return EXIT_OK


# ---------------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavereconf",
                                     description="Wave-based role reconfiguration simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="metrics CSV path (stdout if omitted); "
                                 "the final configuration goes next to it as .config")

    p = sub.add_parser("check", help="oracle feasibility after all failures")
    p.add_argument("--scenario", required=True)

    p = sub.add_parser("ssa", help="stochastic population trajectory")
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--lambda-fail", type=float, required=True)
    p.add_argument("--mu-resolve", type=float, required=True)
    p.add_argument("--p-infeasible", type=float, default=0.0)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="random scenarios checked against the oracle")
    p.add_argument("--agents", default="4..8", help='e.g. "4..8", "4,6" or "5"')
    p.add_argument("--failures", default="1")
    p.add_argument("--runs", type=int, default=100, help="runs per (agents, failures) cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--include-infeasible", action="store_true",
                   help="skip rejection sampling, keep infeasible scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.scenario, args.seed, args.out)
    if args.command == "check":
        return cmd_check(args.scenario)
    if args.command == "ssa":
        return cmd_ssa(args.agents, args.lambda_fail, args.mu_resolve, args.p_infeasible,
                       args.t_max, args.seed, args.out)
    if args.runs < 0:
        _err("--runs must be non-negative")
        return EXIT_INPUT
    return cmd_sweep(args.agents, args.runs, args.seed, args.out, args.failures,
                     feasible_only=not args.include_infeasible, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())

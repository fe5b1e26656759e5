"""Command-line entry points: run a search, re-render a report, or
brute-force the true front of a small simulated space."""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from typing import Sequence

from .bruteforce import front_hypervolume, true_baseline, true_front
from .driver import (BudgetError, RunConfig, report, report_from_history, run)
from .evaluator import (ProcessAdapter, SimulatorAdapter, baseline_config,
                        load_sim, load_suite)
from .space import load_space
from .telemetry import parse_bindings
from .util import canonical_json

import yaml


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harbor",
        description="Constrained search over flag configurations with noisy, "
                    "warmup-aware evaluations.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one search run")
    run_p.add_argument("--space", required=True, help="flag space document")
    target = run_p.add_mutually_exclusive_group(required=True)
    target.add_argument("--sim", help="simulator document (in-process eval)")
    target.add_argument("--adapter", help="worker command speaking the "
                                          "line-JSON eval protocol on stdio")
    run_p.add_argument("--suite", help="task suite document "
                                       "(required with --adapter)")
    run_p.add_argument("--budget-search", type=float, required=True,
                       help="total evaluation budget, full-suite units")
    run_p.add_argument("--budget-deploy", type=float, required=True,
                       help="per-task deployment cost ceiling")
    run_p.add_argument("--delta", type=float, default=0.02,
                       help="allowed pass-rate drop below baseline")
    run_p.add_argument("--eta", type=float, default=0.1,
                       help="risk level of the safety constraint")
    run_p.add_argument("--fidelities", default=None,
                       help="comma-separated subset sizes, e.g. 8,22,44,89; "
                            "default: full suite only")
    run_p.add_argument("--batch", type=int, default=2,
                       help="configurations per region batch")
    run_p.add_argument("--regions", type=int, default=3,
                       help="number of local search regions")
    run_p.add_argument("--sobol", type=int, default=16,
                       help="space-filling init evaluations")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--parallel", type=int, default=1,
                       help="task-level evaluation parallelism")
    run_p.add_argument("--history", default=None,
                       help="write the run history to this file")
    run_p.add_argument("--meta", action="append", default=[],
                       help="prior history file to warm-start from "
                            "(repeatable)")
    run_p.add_argument("--format", choices=("text", "machine"),
                       default="text")

    rep_p = sub.add_parser("report", help="render a finished run's history")
    rep_p.add_argument("--history", required=True)
    rep_p.add_argument("--format", choices=("text", "machine"),
                       default="text")

    orc_p = sub.add_parser("oracle", help="brute-force the true safe front "
                                          "of a simulated space")
    orc_p.add_argument("--space", required=True)
    orc_p.add_argument("--sim", required=True)
    orc_p.add_argument("--delta", type=float, default=0.02)
    orc_p.add_argument("--budget-deploy", type=float, default=None)
    orc_p.add_argument("--format", choices=("text", "machine"),
                       default="text")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    if args.sim:
        sim = load_sim(args.sim, space)
        adapter = SimulatorAdapter(sim)
        suite = adapter.suite()
        bindings = adapter.bindings
    else:
        if not args.suite:
            print("error: --adapter requires --suite", file=sys.stderr)
            return 2
        suite = load_suite(args.suite)
        with open(args.space, "r", encoding="utf-8") as fh:
            bindings = parse_bindings(yaml.safe_load(fh.read()))
        adapter = ProcessAdapter(shlex.split(args.adapter), bindings=bindings)
    fidelities = (tuple(int(x) for x in args.fidelities.split(","))
                  if args.fidelities else (suite.full_size,))
    rc = RunConfig(
        budget_search=args.budget_search,
        budget_deploy=args.budget_deploy,
        delta=args.delta,
        eta=args.eta,
        fidelities=fidelities,
        batch_size=args.batch,
        region_count=args.regions,
        sobol_count=args.sobol,
        seed=args.seed,
        parallelism=args.parallel,
        history_path=args.history,
        meta_paths=tuple(args.meta),
    )
    try:
        rr = run(rc, space, adapter, suite=suite, bindings=bindings)
    except BudgetError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    finally:
        close = getattr(adapter, "close", None)
        if close is not None:
            close()
    print(report(rr, args.format), end="")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    print(report_from_history(args.history, args.format), end="")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    sim = load_sim(args.sim, space)
    r0, base_cost = true_baseline(sim, baseline_config(space))
    front = true_front(sim, r0=r0, delta=args.delta,
                       deploy_budget=args.budget_deploy)
    cost_ref = args.budget_deploy
    if cost_ref is None:
        cost_ref = max((o.per_task_cost for o in front), default=base_cost) * 1.25
    volume = front_hypervolume(front, mu_ref=r0 - args.delta, cost_ref=cost_ref)
    payload = {
        "type": "oracle",
        "baseline_rate": r0,
        "baseline_cost": base_cost,
        "delta": args.delta,
        "budget_deploy": args.budget_deploy,
        "hypervolume": volume,
        "front": [{"config": o.config.as_dict(), "pass_rate": o.pass_rate,
                   "per_task_cost": o.per_task_cost} for o in front],
    }
    if args.format == "machine":
        print(canonical_json(payload))
        return 0
    print(f"baseline rate {r0:.4f}, cost {base_cost:.4f}; "
          f"true front ({len(front)} points, hypervolume {volume:.6f}):")
    for o in front:
        flags = ", ".join(f"{k}={v}" for k, v in sorted(o.config.as_dict().items()))
        print(f"  rate {o.pass_rate:.4f} cost {o.per_task_cost:.4f}  [{flags}]")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "report":
        return _cmd_report(args)
    return _cmd_oracle(args)


if __name__ == "__main__":
    sys.exit(main())

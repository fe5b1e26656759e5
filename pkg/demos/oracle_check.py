"""Score a search run against the brute-forced ground truth.

Small flag spaces can be enumerated outright, which turns the optimizer
into something we can grade: run the search under a budget, then compute
the true safe Pareto front by exhaustive evaluation and compare dominated
hypervolume.  This is the same machinery the acceptance tests use.

Run:  python3 demos/oracle_check.py
"""

from harbor.bruteforce import score_front, true_baseline, true_front
from harbor.driver import RunConfig, run
from harbor.evaluator import SimulatorAdapter, baseline_config

from simulated_search import build_space, build_truth


def main() -> None:
    space = build_space()
    truth = build_truth(space)
    r0, base_cost = true_baseline(truth, baseline_config(space))
    print(f"true baseline: rate {r0:.4f}, per-task cost {base_cost:.2f}")

    exact = true_front(truth, r0=r0, delta=0.08, deploy_budget=1.5)
    defaults = space.default_config().as_dict()
    print(f"\ntrue safe front ({len(exact)} points):")
    for o in exact:
        changed = [f"{k}={v}" for k, v in o.config.as_dict().items()
                   if v != defaults[k]]
        print(f"  rate {o.pass_rate:.4f} cost {o.per_task_cost:.2f}  "
              f"{', '.join(changed) or '(baseline)'}")

    rc = RunConfig(budget_search=30.0, budget_deploy=1.5, delta=0.08,
                   eta=0.15, fidelities=(4, 12), sobol_count=12, seed=7)
    result = run(rc, space, SimulatorAdapter(truth))
    found = [(e.config, e.mean, e.cost) for e in result.front]
    found_hv, true_hv, ratio = score_front(found, truth, r0=r0, delta=0.08,
                                           deploy_budget=1.5)
    print(f"\nsearch spent {result.total_units:.1f} of "
          f"{rc.budget_search:.0f} units and claimed {len(found)} points")
    print(f"hypervolume at true values: found {found_hv:.4f} "
          f"true {true_hv:.4f} ratio {ratio:.3f}")


if __name__ == "__main__":
    main()

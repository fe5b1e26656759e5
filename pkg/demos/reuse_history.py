"""Warm-start a search from an earlier run's history file.

Workloads drift: the second system below has the same flags but slightly
different effect sizes.  Instead of starting cold, the second search loads
the first run's history as down-weighted prior evidence (inflated
variance, never counted against the new budget) and spends its own budget
confirming or overturning it.

Run:  python3 demos/reuse_history.py
"""

import tempfile
from pathlib import Path

from harbor.bruteforce import score_front, true_baseline
from harbor.driver import RunConfig, run
from harbor.evaluator import SimulatorAdapter, baseline_config

from simulated_search import build_space, build_truth


def search(space, truth, *, budget, seed, history=None, meta=()):
    rc = RunConfig(budget_search=budget, budget_deploy=1.5, delta=0.08,
                   eta=0.15, fidelities=(4, 12), sobol_count=12, seed=seed,
                   history_path=history, meta_paths=tuple(meta))
    return run(rc, space, SimulatorAdapter(truth))


def main() -> None:
    space = build_space()
    v1 = build_truth(space)
    # v2: same shape, compaction got cheaper to forgive and the planner
    # hint got stronger.  Close enough for transfer to help.
    v2_linear = dict(v1.linear)
    v2_linear["compaction"] = (-0.2,)
    v2_linear["planner_hint"] = (0.55,)
    from dataclasses import replace
    v2 = replace(v1, linear=v2_linear, seed=12)

    r0, _ = true_baseline(v2, baseline_config(space))
    with tempfile.TemporaryDirectory() as tmp:
        history = str(Path(tmp) / "v1.jsonl")
        first = search(space, v1, budget=30.0, seed=7, history=history)
        print(f"v1 run: {first.total_units:.1f} units, "
              f"{len(first.front)} front points, history at {history}")
        print("\nv2 searches at a quarter of the v1 budget "
              "(hypervolume ratio vs the true v2 front):")
        for label, meta in (("cold", ()), ("warm-started", (history,))):
            ratios = []
            prior = 0
            for seed in (3, 9, 21):
                result = search(space, v2, budget=8.0, seed=seed, meta=meta)
                found = [(e.config, e.mean, e.cost) for e in result.front]
                _, _, ratio = score_front(found, v2, r0=r0, delta=0.08,
                                          deploy_budget=1.5)
                ratios.append(ratio)
                prior = sum(1 for r in result.history if r.source == "meta")
            shown = ", ".join(f"{r:.3f}" for r in ratios)
            print(f"  {label:13s} ({prior:2d} prior records): {shown}  "
                  f"mean {sum(ratios) / len(ratios):.3f}")


if __name__ == "__main__":
    main()

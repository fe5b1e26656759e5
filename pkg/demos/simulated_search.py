"""Tune a simulated task runner end to end and print the report.

The scenario: a batch evaluation harness with six runtime flags spread over
three subsystems.  Ground truth (known only to the simulator) is that the
result cache and the planner hint help, aggressive compaction hurts, the
cache needs a few sessions to warm up before its benefit shows, and the
tracing flag is wired to a consumer that never reads it.  The engine gets a
fixed measurement budget and has to map the safe rate/cost trade-off
without ever being told any of that.

Run:  python3 demos/simulated_search.py
"""

from harbor.driver import RunConfig, report, run
from harbor.evaluator import SimSpec, SimulatorAdapter
from harbor.space import FlagDef, FlagSpace


def build_space() -> FlagSpace:
    return FlagSpace(flags=(
        FlagDef("result_cache", "boolean", (False, True), block="memory",
                warm_dependent=True, cost_weight=0.2),
        FlagDef("compaction", "boolean", (False, True), block="memory",
                cost_weight=-0.05),
        FlagDef("planner_hint", "boolean", (False, True), block="planner",
                cost_weight=0.1),
        FlagDef("scan_limit", "numeric", (64.0, 128.0, 256.0),
                block="planner", default=128.0),
        FlagDef("retry_reads", "boolean", (False, True), block="control",
                cost_weight=0.05),
        FlagDef("tracing", "boolean", (False, True), block="control"),
    ))


def build_truth(space: FlagSpace) -> SimSpec:
    tasks = tuple(f"job-{i:02d}" for i in range(12))
    return SimSpec(
        space=space,
        tasks=tasks,
        base_logits=tuple(0.4 for _ in tasks),
        linear={
            "result_cache": (0.6,),
            "compaction": (-0.35,),
            "planner_hint": (0.4,),
            "scan_limit": (0.15,),
            "retry_reads": (0.1,),
            "tracing": (0.0,),
        },
        couplings=(("result_cache", "planner_hint", 0.3),),
        warm_kappa={"result_cache": 2.5},
        cost_overheads={"result_cache": 0.2, "planner_hint": 0.1,
                        "retry_reads": 0.05},
        silent_gates=("tracing",),
        seed=11,
    )


def main() -> None:
    space = build_space()
    adapter = SimulatorAdapter(build_truth(space))
    rc = RunConfig(
        budget_search=30.0,     # total spend, in full-budget run equivalents
        budget_deploy=1.5,      # per-task cost ceiling for anything we ship
        delta=0.08,             # tolerated rate drop below the baseline
        eta=0.15,               # risk level for the safety filter
        fidelities=(4, 12),     # cheap subset first, full suite to confirm
        sobol_count=12,
        seed=7,
    )
    result = run(rc, space, adapter)
    print(report(result))
    print()
    print("front, one line per non-dominated configuration:")
    defaults = space.default_config().as_dict()
    for entry in result.front:
        changed = [f"{k}={v}" for k, v in entry.config.as_dict().items()
                   if v != defaults[k]]
        print(f"  rate {entry.mean:.3f} +- {entry.sd:.3f} "
              f"cost {entry.cost:.2f}  {', '.join(changed) or '(baseline)'}")


if __name__ == "__main__":
    main()

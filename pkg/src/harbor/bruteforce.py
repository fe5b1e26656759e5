"""Exhaustive ground-truth baselines for small flag spaces.

Enumerates every configuration, computes noiseless long-run pass rates and
expected per-task costs from a simulation description, and derives the true
safe Pareto front.  Only practical for spaces small enough to enumerate;
used to score search output and to pin expected values in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .acquisition import hypervolume
from .evaluator import SimSpec, sim_truth
from .space import Configuration, FlagSpace


@dataclass(frozen=True)
class TrueOutcome:
    config: Configuration
    pass_rate: float
    per_task_cost: float


def enumerate_truth(spec: SimSpec, *, session_index: int = 1_000_000,
                    ) -> list[TrueOutcome]:
    """Noiseless outcome of every configuration in the space."""
    outcomes = []
    for config in spec.space.enumerate_all():
        rate, cost = sim_truth(spec, config, session_index=session_index)
        outcomes.append(TrueOutcome(config, rate, cost))
    return outcomes


def true_baseline(spec: SimSpec, baseline: Configuration, *,
                  session_index: int = 1_000_000) -> tuple[float, float]:
    return sim_truth(spec, baseline, session_index=session_index)


def safe_outcomes(outcomes: list[TrueOutcome], *, r0: float, delta: float,
                  deploy_budget: float | None = None) -> list[TrueOutcome]:
    """True-feasible set: long-run rate within delta of baseline, cost in budget."""
    kept = [o for o in outcomes if o.pass_rate >= r0 - delta]
    if deploy_budget is not None:
        kept = [o for o in kept if o.per_task_cost <= deploy_budget]
    return kept


def true_front(spec: SimSpec, *, r0: float, delta: float,
               deploy_budget: float | None = None,
               session_index: int = 1_000_000) -> list[TrueOutcome]:
    """Non-dominated safe configurations (maximize rate, minimize cost)."""
    safe = safe_outcomes(enumerate_truth(spec, session_index=session_index),
                         r0=r0, delta=delta, deploy_budget=deploy_budget)
    safe.sort(key=lambda o: (o.per_task_cost, -o.pass_rate))
    front: list[TrueOutcome] = []
    best = float("-inf")
    for o in safe:
        if o.pass_rate > best:
            front.append(o)
            best = o.pass_rate
    return front


def front_hypervolume(outcomes: list[TrueOutcome], *, mu_ref: float,
                      cost_ref: float) -> float:
    points = [(o.pass_rate, o.per_task_cost) for o in outcomes]
    return hypervolume(points, mu_ref=mu_ref, cost_ref=cost_ref)


def score_front(found: list[tuple[Configuration, float, float]],
                spec: SimSpec, *, r0: float, delta: float,
                deploy_budget: float | None = None, mu_ref: float = 0.0,
                cost_ref: float | None = None,
                session_index: int = 1_000_000) -> tuple[float, float, float]:
    """Hypervolume of a found front at TRUE values versus the true front.

    ``found`` holds (config, claimed rate, claimed cost) triples; claims are
    ignored and replaced by ground truth, and truly unsafe entries count
    zero area.  Returns (found_hv, true_hv, ratio).
    """
    truth = true_front(spec, r0=r0, delta=delta, deploy_budget=deploy_budget,
                       session_index=session_index)
    if cost_ref is None:
        everything = enumerate_truth(spec, session_index=session_index)
        cost_ref = max(o.per_task_cost for o in everything) * 1.25
    true_hv = front_hypervolume(truth, mu_ref=mu_ref, cost_ref=cost_ref)
    true_at: dict[Configuration, tuple[float, float]] = {}
    found_points = []
    for config, _, _ in found:
        config = spec.space.pin(config)
        if config not in true_at:
            true_at[config] = sim_truth(spec, config,
                                        session_index=session_index)
        rate, cost = true_at[config]
        if rate < r0 - delta:
            continue
        if deploy_budget is not None and cost > deploy_budget:
            continue
        found_points.append((rate, cost))
    found_hv = hypervolume(found_points, mu_ref=mu_ref, cost_ref=cost_ref)
    ratio = found_hv / true_hv if true_hv > 0 else (1.0 if found_hv == 0 else 0.0)
    return found_hv, true_hv, ratio

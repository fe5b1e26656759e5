"""Cost-aware, safety-filtered candidate selection.

Candidates are scored by Monte-Carlo expected hypervolume improvement on the
(pass rate, per-task cost) front at each fidelity, divided by the predicted
evaluation cost, with a diversity discount inside a batch.  A one-sided
posterior bound enforces the never-much-worse-than-baseline constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .space import Configuration, FlagSpace
from .surrogate import CostModel, Surrogate
from .util import derive_seed

OK = "ok"
EMPTY_POOL = "empty-pool"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class FrontPoint:
    mu: float
    cost: float
    config: Configuration | None = None


@dataclass(frozen=True)
class ParetoFront:
    """Non-dominated (higher pass rate, lower cost) points at one fidelity,
    with the hypervolume reference point fixed per run.  Fronts tied to a
    fidelity m measure cost in totals over the m-task subset."""

    fidelity: int | None
    points: tuple[FrontPoint, ...]
    mu_ref: float
    cost_ref: float

    @staticmethod
    def from_points(points: Sequence[FrontPoint], fidelity: int | None,
                    mu_ref: float, cost_ref: float) -> "ParetoFront":
        kept: list[FrontPoint] = []
        ordered = sorted(points, key=lambda p: (p.cost, -p.mu))
        best_mu = -math.inf
        for p in ordered:
            if p.mu > best_mu:
                kept.append(p)
                best_mu = p.mu
        return ParetoFront(fidelity, tuple(kept), mu_ref, cost_ref)

    def hypervolume(self) -> float:
        return hypervolume(
            [(p.mu, p.cost) for p in self.points], self.mu_ref, self.cost_ref)


def dominates(a: tuple[float, float], b: tuple[float, float]) -> bool:
    """Strict Pareto dominance: at least as good in both, better in one."""
    return (a[0] >= b[0] and a[1] <= b[1]) and (a[0] > b[0] or a[1] < b[1])


def hypervolume(points: Sequence[tuple[float, float]], mu_ref: float,
                cost_ref: float) -> float:
    """Area dominated between the points and the reference corner.

    Tolerates dominated and out-of-box inputs; both contribute nothing.
    """
    pts = [(mu, cost) for mu, cost in points if mu > mu_ref and cost < cost_ref]
    if not pts:
        return 0.0
    pts.sort(key=lambda p: (-p[0], p[1]))
    frontier: list[tuple[float, float]] = []
    best_cost = math.inf
    for mu, cost in pts:
        if cost < best_cost:
            frontier.append((mu, cost))
            best_cost = cost
    area = 0.0
    last_mu = mu_ref
    for mu, cost in reversed(frontier):
        area += (mu - last_mu) * (cost_ref - cost)
        last_mu = mu
    return area


def _staircase(front: ParetoFront) -> tuple[np.ndarray, np.ndarray]:
    """In-box front points as ascending (mu, cost) staircase arrays."""
    pts = sorted((p.mu, p.cost) for p in front.points
                 if p.mu > front.mu_ref and p.cost < front.cost_ref)
    mus, costs = [], []
    for mu, cost in pts:
        if mus and mu == mus[-1]:
            continue  # same rate at higher cost adds nothing
        mus.append(mu)
        costs.append(cost)
    return np.array(mus), np.array(costs)


def hypervolume_gain(front: ParetoFront, mu_samples: np.ndarray,
                     cost_samples: np.ndarray) -> np.ndarray:
    """Added hypervolume of each sampled point over the front, vectorized
    over arrays of any matching shape."""
    mus, costs = _staircase(front)
    gain = np.zeros_like(np.asarray(mu_samples), dtype=float)
    # strip i spans (edges[i], uppers[i]] and is already covered down to
    # covers[i]; past the last front point only the reference covers.
    edges = np.concatenate([[front.mu_ref], mus])
    uppers = np.concatenate([mus, [np.inf]])
    covers = np.concatenate([costs, [front.cost_ref]])
    for lo, hi, cover in zip(edges, uppers, covers):
        width = np.clip(np.minimum(mu_samples, hi) - lo, 0.0, None)
        depth = np.clip(cover - cost_samples, 0.0, None)
        gain += width * depth
    return gain


def ehvi(candidate: Configuration, s: Surrogate, cost_model: CostModel,
         front: ParetoFront, samples: int = 1024, seed: int = 0) -> float:
    """Monte-Carlo expected hypervolume improvement of one candidate.

    Draws the pass rate from the unclamped posterior and the cost from the
    cost model with its residual spread.  A front carrying a fidelity is in
    total-cost units over that subset, so cost draws are scaled to match.
    """
    mu, sigma = s.predict(candidate)
    cost = cost_model.predict(candidate)
    scale = front.fidelity if front.fidelity else 1
    rng = np.random.default_rng(seed)
    mu_draws = mu + sigma * rng.standard_normal(samples)
    cost_draws = scale * (cost + cost_model.residual_std
                          * rng.standard_normal(samples))
    return float(hypervolume_gain(front, mu_draws, cost_draws).mean())


def safety_filter(candidates: Sequence[Configuration], s: Surrogate, r0: float,
                  delta: float, eta: float) -> list[Configuration]:
    """Keep candidates whose one-sided lower posterior bound clears r0 - delta.

    The bound holds with probability 1 - eta under the posterior; order is
    preserved and the filter is deterministic.
    """
    if not candidates:
        return []
    z = norm.ppf(1.0 - eta)
    mu, sigma = s.predict_many(list(candidates))
    keep = mu - z * sigma >= r0 - delta
    return [c for c, ok in zip(candidates, keep) if ok]


@dataclass(frozen=True)
class BatchProposal:
    configs: tuple[Configuration, ...]
    fidelity: int | None
    score: float
    status: str
    predicted_cost: float = 0.0


def _candidate_pool(region, space: FlagSpace, pool_cap: int,
                    seed: int) -> list[Configuration]:
    center = space.pin(region.center)
    if space.ball_size(region.radius) <= pool_cap:
        pool = sorted(space.hamming_neighbors(center, region.radius), key=space.key)
    else:
        pool = space.sample_ball(center, region.radius, pool_cap, seed)
        pool = sorted(set(pool), key=space.key)
    return pool


def _greedy(pool: list[Configuration], gains: np.ndarray, denom: np.ndarray,
            q: int, d_div: int, space: FlagSpace) -> list[int]:
    chosen: list[int] = []
    available = list(range(len(pool)))
    while available and len(chosen) < q:
        best_i, best_score = None, -math.inf
        for i in available:
            discount = 1.0
            if chosen:
                nearest = min(space.distance(pool[i], pool[j]) for j in chosen)
                discount = min(1.0, nearest / d_div)
            score = gains[i] * discount / denom[i]
            if score > best_score:
                best_i, best_score = i, score
        chosen.append(best_i)
        available.remove(best_i)
    return chosen


def select_batch(region, s: Surrogate, cost_model: CostModel,
                 fronts: Mapping[int, ParetoFront], fidelities: Sequence[int],
                 q: int, *, r0: float, delta: float, eta: float, seed: int = 0,
                 remaining_budget: float = math.inf, d_div: int = 2,
                 pool_cap: int = 1024, mc_samples: int = 128) -> BatchProposal:
    """Pick up to q configurations and a fidelity from a trust region.

    Candidates come from the region's Hamming ball (sampled at the pool cap),
    pass the safety filter, and are picked greedily by improvement per
    predicted cost with a diversity discount of min(1, distance/d_div) to
    already-picked batch members.  The fidelity with the best summed
    improvement-to-cost ratio wins; a batch that would overflow the remaining
    budget is trimmed, then pushed to cheaper fidelities, then declared
    infeasible.  An empty safe pool is legal and tells the caller to rework
    the region.
    """
    if not region.alive:
        raise ValueError("cannot select from a dead region")
    space = s.space
    pool = _candidate_pool(region, space, pool_cap, derive_seed(seed, "pool"))
    pool = safety_filter(pool, s, r0, delta, eta)
    if not pool:
        return BatchProposal((), None, 0.0, EMPTY_POOL)

    mu, sigma = s.predict_many(pool)
    cost = cost_model.predict_many(pool)
    rng = np.random.default_rng(derive_seed(seed, "draws"))
    z = rng.standard_normal((len(pool), mc_samples))
    u = rng.standard_normal((len(pool), mc_samples))
    mu_draws = mu[:, None] + sigma[:, None] * z
    cost_draws = cost[:, None] + cost_model.residual_std * u

    plans: list[tuple[float, int, list[int]]] = []
    for m in sorted(fidelities):
        front = fronts.get(m)
        if front is None:
            front = ParetoFront(m, (), 0.0, 2.0 * max(float(cost.max()), 1e-9) * m)
        gains = hypervolume_gain(front, mu_draws, m * cost_draws).mean(axis=1)
        denom = np.maximum(m * cost, 1e-12)
        picks = _greedy(pool, gains, denom, q, d_div, space)
        numerator = 0.0
        for rank, i in enumerate(picks):
            discount = 1.0
            if rank:
                nearest = min(space.distance(pool[i], pool[j]) for j in picks[:rank])
                discount = min(1.0, nearest / d_div)
            numerator += gains[i] * discount
        total_cost = float(sum(denom[i] for i in picks))
        plans.append((numerator / total_cost if total_cost > 0 else 0.0, m, picks))

    plans.sort(key=lambda p: (-p[0], p[1]))
    best_score, best_m, best_picks = plans[0]
    ordered_ms = [best_m] + sorted((m for _, m, _ in plans if m < best_m), reverse=True)
    for m in ordered_ms:
        picks = next(p for _, pm, p in plans if pm == m)
        while picks:
            batch_cost = float(sum(m * cost[i] for i in picks))
            if batch_cost <= remaining_budget:
                return BatchProposal(
                    tuple(pool[i] for i in picks), m, best_score, OK, batch_cost)
            picks = picks[:-1]
    return BatchProposal((), None, 0.0, INFEASIBLE)

"""End-to-end optimization loop.

Anchors a cold baseline, space-fills with a Sobol design at the cheapest
fidelity, then alternates region-local batch selection, evaluation,
warm-aware target correction, surrogate refits, and region bookkeeping
until the search budget runs out.  The result is a safety-filtered,
budget-feasible Pareto front; candidates are committed only after a smoke
preflight shows every enabled flag actually firing.

Budgets are expressed in full-suite-equivalent units: one unit is the
measured cost of the baseline evaluation over the whole suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from scipy.stats import norm

from .acquisition import (EMPTY_POOL, INFEASIBLE, OK, FrontPoint, ParetoFront,
                          select_batch)
from .evaluator import (EvaluationRecord, TaskSuite, baseline_config, evaluate,
                        fidelity_subset, measure_baseline)
from .space import Configuration, FlagSpace, sobol_init
from .surrogate import (AnovaEntry, CostModel, Surrogate, block_anova,
                        fit, fit_cost_model)
from .telemetry import (CounterBinding, detect_asymmetry, detect_silent,
                        preflight_smoke)
from .trustregion import (BatchOutcome, TrustRegion, freeze_blocks,
                          init_regions, relax_region, update_region)
from .util import canonical_json, derive_seed
from .warmstart import (apply_correction, counter_logs_from_history,
                        fit_warm_curves, observation_variance)

PHASE_BASELINE = "baseline"
PHASE_INIT = "init"
PHASE_SEARCH = "search"
PHASE_PREFLIGHT = "preflight"
PHASE_ORDER = (PHASE_BASELINE, PHASE_INIT, PHASE_SEARCH, PHASE_PREFLIGHT)

# Fraction of the remaining allowance handed to the selector; the held-back
# share absorbs cost noise so recorded totals stay under the cap.
BUDGET_HEADROOM = 0.9


class BudgetError(RuntimeError):
    """Search budget cannot cover the mandatory baseline and init phases."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


def wilson_interval(k: int, n: int, level: float = 0.9) -> tuple[float, float]:
    """Two-sided Wilson score interval for k passes out of n trials."""
    if n <= 0:
        raise ValueError("wilson_interval requires at least one trial")
    if not 0 <= k <= n:
        raise ValueError(f"pass count {k} outside [0, {n}]")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level {level} outside (0, 1)")
    z = float(norm.ppf(0.5 * (1.0 + level)))
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides the space, adapter, and suite."""

    budget_search: float
    budget_deploy: float
    delta: float = 0.02
    eta: float = 0.1
    fidelities: tuple[int, ...] = ()
    batch_size: int = 2
    region_count: int = 3
    sobol_count: int = 16
    seed: int = 0
    parallelism: int = 1
    subset_mode: str = "prefix-shuffle"
    history_path: str | None = None
    meta_paths: tuple[str, ...] = ()
    region_radius: int = 2
    r_max: int | None = None
    tau_succ: int = 3
    tau_fail: int = 3
    freeze_min_projections: int = 8
    freeze_collapse_ratio: float = 1e-3
    silent_epsilon: float = 0.5
    silent_min_observations: int = 3
    lambda_main: float = 1e-2
    lambda_cross: float = 10.0
    lambda_meta: float = 4.0
    mc_samples: int = 128
    pool_cap: int = 1024
    diversity_distance: int = 2
    max_iterations: int = 1000
    wilson_level: float = 0.9
    default_kappa: float = 2.0

    def __post_init__(self):
        if self.budget_search <= 0:
            raise ValueError("search budget must be positive")
        if self.budget_deploy <= 0:
            raise ValueError("deployment budget must be positive")
        if self.delta < 0:
            raise ValueError("safety margin must be nonnegative")
        if not 0.0 < self.eta <= 0.5:
            raise ValueError("risk level must lie in (0, 0.5]")
        fids = tuple(sorted({int(m) for m in self.fidelities}))
        if fids and fids[0] < 1:
            raise ValueError("fidelities must be positive")
        object.__setattr__(self, "fidelities", fids)
        object.__setattr__(self, "meta_paths", tuple(self.meta_paths))
        if self.batch_size < 1 or self.region_count < 1 or self.sobol_count < 1:
            raise ValueError("batch size, region count, and init count must be >= 1")

    def semantic_dict(self) -> dict[str, Any]:
        """Fields that define the run's behavior; paths and parallelism are
        operational and excluded so equivalent runs hash identically."""
        out = {}
        for name, value in self.__dict__.items():
            if name in ("history_path", "meta_paths", "parallelism"):
                continue
            out[name] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass(frozen=True)
class FrontEntry:
    config: Configuration
    mean: float
    sd: float
    cost: float
    passes: int
    trials: int
    lower: float
    upper: float
    committed: bool = False

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.as_dict(),
            "mean": self.mean,
            "sd": self.sd,
            "cost": self.cost,
            "passes": self.passes,
            "trials": self.trials,
            "lower": self.lower,
            "upper": self.upper,
            "committed": self.committed,
        }


@dataclass(frozen=True)
class LedgerRow:
    phase: str
    fidelity: int
    evaluations: int
    raw_cost: float
    units: float

    def to_json_dict(self) -> dict[str, Any]:
        return {"phase": self.phase, "fidelity": self.fidelity,
                "evaluations": self.evaluations, "raw_cost": self.raw_cost,
                "units": self.units}


@dataclass(frozen=True)
class RunResult:
    front: tuple[FrontEntry, ...]
    committed: Configuration | None
    vetoes: tuple[dict, ...]
    ledger: tuple[LedgerRow, ...]
    phase_totals: dict[str, float]
    total_raw_cost: float
    total_units: float
    budget_units: float
    baseline_unit_cost: float
    baseline_rate: float
    cost_reference: float
    anova: tuple[AnovaEntry, ...]
    silent_flags: tuple[dict, ...]
    anomalies: tuple[dict, ...]
    frozen_blocks: tuple[dict, ...]
    region_log: tuple[dict, ...]
    iterations: int
    seed: int
    space: FlagSpace
    history: tuple[EvaluationRecord, ...]
    history_path: str | None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "type": "result",
            "front": [e.to_json_dict() for e in self.front],
            "committed": self.committed.as_dict() if self.committed else None,
            "vetoes": list(self.vetoes),
            "ledger": [row.to_json_dict() for row in self.ledger],
            "phase_totals": dict(self.phase_totals),
            "total_raw_cost": self.total_raw_cost,
            "total_units": self.total_units,
            "budget_units": self.budget_units,
            "baseline_unit_cost": self.baseline_unit_cost,
            "baseline_rate": self.baseline_rate,
            "cost_reference": self.cost_reference,
            "anova": [{"block": a.name, "raw": a.raw,
                       "normalized": a.normalized} for a in self.anova],
            "silent_flags": list(self.silent_flags),
            "anomalies": list(self.anomalies),
            "frozen_blocks": list(self.frozen_blocks),
            "region_log": list(self.region_log),
            "iterations": self.iterations,
            "seed": self.seed,
        }


def load_meta_history(paths: Sequence[str], space: FlagSpace, *,
                      lambda_meta: float = 4.0) -> list[EvaluationRecord]:
    """Import prior-run logs as soft evidence on the current space.

    Configs are projected (missing flags take defaults, unknown flags are
    dropped) and every imported variance is inflated by ``lambda_meta`` so
    fresh measurements dominate the old ones.  A log sharing no flag names
    with the current space is rejected outright.
    """
    ours = set(space.by_name.keys())
    records: list[EvaluationRecord] = []
    for path in paths:
        docs = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    docs.append(json.loads(line))
                except json.JSONDecodeError as err:
                    raise ValueError(f"{path}:{lineno}: not valid JSON: {err}") from err
        record_docs = [d for d in docs if d.get("type") == "record"]
        if not record_docs:
            raise ValueError(f"{path}: no evaluation records found")
        theirs: set[str] = set()
        for doc in record_docs:
            theirs.update(doc.get("config", {}).keys())
        if not theirs & ours:
            raise ValueError(
                f"{path}: no flag overlap with the current space; "
                f"prior flags {sorted(theirs)}, current flags {sorted(ours)}")
        for doc in record_docs:
            base = EvaluationRecord.from_json_dict(doc)
            target = base.corrected_target
            variance = base.corrected_variance
            if target is None:
                target = base.raw_pass_rate
            if variance is None:
                variance = observation_variance(base.raw_pass_rate, base.fidelity)
            records.append(replace(
                base,
                config=space.project(doc.get("config", {})),
                source="meta",
                corrected_target=target,
                corrected_variance=variance * lambda_meta,
            ))
    return records


def pareto_front(history: Sequence[EvaluationRecord], s: Surrogate,
                 cost_model: CostModel, *, budget_deploy: float, delta: float,
                 eta: float, r0: float) -> ParetoFront:
    """Non-dominated safe set over evaluated configs at the final posterior.

    Falls back to the baseline configuration alone when the filters reject
    everything; by construction it satisfies the constraint at its own
    measurement.
    """
    space = s.space
    seen: list[Configuration] = []
    for record in history:
        if record.source != "live":
            continue
        config = space.pin(record.config)
        if config not in seen:
            seen.append(config)
    seen.sort(key=space.key)
    z = float(norm.ppf(1.0 - eta))
    points: list[FrontPoint] = []
    if seen:
        mu, sd = s.predict_many(seen)
        cost = cost_model.predict_many(seen)
        for config, m, sig, c in zip(seen, mu, sd, cost):
            if float(m) - z * sig < r0 - delta:
                continue
            if float(c) > budget_deploy:
                continue
            points.append(FrontPoint(float(m), float(c), config))
    front = ParetoFront.from_points(points, None, mu_ref=r0 - delta,
                                    cost_ref=budget_deploy)
    if front.points:
        return front
    anchor = baseline_config(space)
    mu0, var0 = s.predict(anchor)
    fallback = FrontPoint(mu0, float(cost_model.predict(anchor)), anchor)
    return ParetoFront.from_points([fallback], None, mu_ref=r0 - delta,
                                   cost_ref=budget_deploy)


def build_ledger(history: Sequence[EvaluationRecord], unit: float,
                 ) -> tuple[tuple[LedgerRow, ...], dict[str, float], float]:
    """Group recorded costs by phase and fidelity.

    Returns rows in phase order, the per-phase totals, and the grand total
    (the sum of per-phase totals, so the parts add up by construction).
    """
    groups: dict[tuple[str, int], list[float]] = {}
    for record in history:
        if record.source != "live":
            continue
        phase = record.phase or PHASE_SEARCH
        groups.setdefault((phase, record.fidelity), []).append(record.total_cost)
    rank = {p: i for i, p in enumerate(PHASE_ORDER)}
    rows = []
    for (phase, fidelity), costs in sorted(
            groups.items(), key=lambda kv: (rank.get(kv[0][0], len(rank)), kv[0])):
        raw = math.fsum(costs)
        rows.append(LedgerRow(phase, fidelity, len(costs), raw, raw / unit))
    phase_totals: dict[str, float] = {}
    for row in rows:
        phase_totals[row.phase] = phase_totals.get(row.phase, 0.0) + row.raw_cost
    total = math.fsum(phase_totals.values())
    return tuple(rows), phase_totals, total


class _Driver:
    """Mutable state for one run; public entry point is run() below."""

    def __init__(self, rc: RunConfig, space: FlagSpace, adapter,
                 suite: TaskSuite, bindings: Mapping[str, CounterBinding]):
        self.rc = rc
        self.space = space
        self.adapter = adapter
        self.suite = suite
        self.bindings = dict(bindings)
        self.history: list[EvaluationRecord] = []
        self.regions: list[TrustRegion] = []
        self.region_counter = 0
        # Every configuration that ever served as a region center; killed
        # centers stay here so a restart can never revive a dead region.
        self.used_centers: list[Configuration] = []
        self.session = 0
        self.spent_raw = 0.0
        self.baseline_raw = 1.0
        self.r0 = 0.0
        self.sigma2_base = 0.0
        self.cost_ref_per_task = 1.0
        self.warm_model = fit_warm_curves({}, self._warm_flags(),
                                          default_kappa=rc.default_kappa)
        self.surrogate: Surrogate | None = None
        self.cost_model: CostModel | None = None
        self.silent_registry: list[dict] = []
        self.anomaly_registry: list[dict] = []
        self.frozen_registry: list[dict] = []
        self.region_log: list[dict] = []
        self.iterations = 0
        self._fh = None
        if rc.history_path:
            self._fh = open(rc.history_path, "w", encoding="utf-8")

    # -- plumbing ---------------------------------------------------------

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _write(self, doc: dict) -> None:
        if self._fh is not None:
            self._fh.write(canonical_json(doc) + "\n")
            self._fh.flush()

    def _warm_flags(self) -> list[str]:
        return [f.name for f in self.space.active_flags if f.warm_dependent]

    def _live(self) -> list[EvaluationRecord]:
        return [r for r in self.history if r.source == "live"]

    @property
    def b_sea_raw(self) -> float:
        return self.rc.budget_search * self.baseline_raw

    def _smoke_estimate(self) -> float:
        return self.baseline_raw / self.suite.full_size

    def _search_allowance(self) -> float:
        reserve = 3.0 * self._smoke_estimate()
        return (self.b_sea_raw - self.spent_raw - reserve) * BUDGET_HEADROOM

    # -- record intake ----------------------------------------------------

    def _append(self, record: EvaluationRecord) -> EvaluationRecord:
        record = apply_correction(record, self.warm_model, self.space,
                                  self.r0, self.sigma2_base)
        self.history.append(record)
        self.spent_raw += record.total_cost
        self._write(record.to_json_dict())
        self._run_detectors(record)
        return record

    def _run_detectors(self, record: EvaluationRecord) -> None:
        for verdict in detect_asymmetry(record, space=self.space):
            self.anomaly_registry.append({
                "session": record.session_index,
                "flag": verdict.flag,
                "reason": verdict.reason,
            })
        findings = detect_silent(self._live(), self.rc.silent_epsilon,
                                 self.rc.silent_min_observations,
                                 space=self.space)
        for finding in findings:
            flag = self.space.by_name[finding.flag]
            self.space = self.space.exclude({finding.flag: flag.default})
            self.silent_registry.append({
                "flag": finding.flag,
                "on_observations": finding.on_observations,
                "mean_consumer_counter": finding.mean_consumer_counter,
                "session": record.session_index,
            })
            self._repin_regions()

    def _repin_regions(self) -> None:
        self.regions = [replace(r, center=self.space.pin(r.center))
                        for r in self.regions]

    def _refit(self) -> None:
        live = self._live()
        logs = counter_logs_from_history(live, self.space)
        self.warm_model = fit_warm_curves(logs, self._warm_flags(),
                                          default_kappa=self.rc.default_kappa)
        for i, record in enumerate(self.history):
            if record.source != "live":
                continue
            self.history[i] = apply_correction(record, self.warm_model,
                                               self.space, self.r0,
                                               self.sigma2_base)
        self.surrogate = fit(self.history, self.space,
                             lambda_main=self.rc.lambda_main,
                             lambda_cross=self.rc.lambda_cross,
                             prior_mean=self.r0)
        self.cost_model = fit_cost_model(self._live(), self.space)

    def _fronts(self) -> dict[int, ParetoFront]:
        """Per-fidelity incumbent fronts in total-cost-at-m units, against
        the run's frozen reference corner (mu 0, cost 2x the worst per-task
        cost seen through init, scaled by m)."""
        fronts: dict[int, ParetoFront] = {}
        for m in self.rc.fidelities:
            points = []
            for record in self._live():
                if record.fidelity != m or record.uninformative:
                    continue
                if record.corrected_target is None:
                    continue
                points.append(FrontPoint(record.corrected_target,
                                         record.total_cost,
                                         self.space.pin(record.config)))
            fronts[m] = ParetoFront.from_points(
                points, m, mu_ref=0.0, cost_ref=self.cost_ref_per_task * m)
        return fronts

    # -- phases -----------------------------------------------------------

    def run_baseline(self) -> None:
        rc = self.rc
        baseline = measure_baseline(self.adapter, self.space, self.suite,
                                    rc.seed, parallelism=rc.parallelism)
        self.baseline_raw = baseline.record.total_cost
        if self.baseline_raw <= 0:
            raise RuntimeError("baseline evaluation reported zero total cost; "
                               "budget units would be degenerate")
        self.r0 = baseline.r0
        self.sigma2_base = baseline.variance
        self.session = 1
        self._append(baseline.record)

    def run_init(self) -> None:
        rc = self.rc
        design = sobol_init(self.space, rc.sobol_count,
                            derive_seed(rc.seed, "sobol"))
        m0 = rc.fidelities[0]
        for config in design.configs:
            config = self.space.pin(config)
            tasks = fidelity_subset(self.suite, m0, rc.seed, rc.subset_mode)
            record = evaluate(self.adapter, config, tasks, self.session,
                              derive_seed(rc.seed, "eval", self.session),
                              parallelism=rc.parallelism, phase=PHASE_INIT)
            self.session += 1
            self._append(record)
        self.cost_ref_per_task = 2.0 * max(r.per_task_cost for r in self._live())
        self._refit()
        self.regions = init_regions(self._live(), self.surrogate,
                                    rc.region_count, rc.region_radius)
        self.region_counter = len(self.regions)
        self.used_centers = [r.center for r in self.regions]

    def _evaluate_batch(self, proposal) -> list[EvaluationRecord]:
        rc = self.rc
        tasks = fidelity_subset(self.suite, proposal.fidelity, rc.seed,
                                rc.subset_mode)
        records = []
        for config in proposal.configs:
            record = evaluate(self.adapter, config, tasks, self.session,
                              derive_seed(rc.seed, "eval", self.session),
                              parallelism=rc.parallelism, phase=PHASE_SEARCH)
            self.session += 1
            records.append(self._append(record))
        return records

    def _region_step(self, index: int, iteration: int) -> tuple[bool, bool]:
        """Run one region's batch; returns (evaluated, state_changed)."""
        rc = self.rc
        region = self.regions[index]
        allowance = self._search_allowance()
        entry = {"iteration": iteration, "region": region.name,
                 "radius": region.radius, "center": region.center.as_dict()}
        if allowance <= 0:
            entry.update(status="budget-exhausted")
            self.region_log.append(entry)
            return False, False
        proposal = select_batch(
            region, self.surrogate, self.cost_model, self._fronts(),
            rc.fidelities, rc.batch_size, r0=self.r0, delta=rc.delta,
            eta=rc.eta, seed=derive_seed(rc.seed, "select", iteration, region.name),
            remaining_budget=allowance, d_div=rc.diversity_distance,
            pool_cap=rc.pool_cap, mc_samples=rc.mc_samples)
        if proposal.status == INFEASIBLE:
            entry.update(status=INFEASIBLE)
            self.region_log.append(entry)
            return False, False
        if proposal.status == EMPTY_POOL:
            updated = relax_region(region, r_max=self._r_max())
            self.regions[index] = updated
            entry.update(status=EMPTY_POOL,
                         radius_after=updated.radius, alive=updated.alive)
            self.region_log.append(entry)
            return False, True
        records = self._evaluate_batch(proposal)
        informative = [r for r in records
                       if not r.uninformative and r.corrected_target is not None]
        best = max(informative, key=lambda r: r.corrected_target, default=None)
        improved = best is not None and best.corrected_target > region.best_target
        outcome = BatchOutcome(
            improved=improved,
            best_config=self.space.pin(best.config) if improved else None,
            best_target=best.corrected_target if improved else None)
        updated = update_region(region, outcome, tau_succ=rc.tau_succ,
                                tau_fail=rc.tau_fail, r_max=self._r_max())
        self.regions[index] = updated
        if updated.center != region.center:
            self.used_centers.append(updated.center)
        entry.update(status=OK, fidelity=proposal.fidelity,
                     batch=len(records), improved=improved,
                     radius_after=updated.radius, alive=updated.alive)
        self.region_log.append(entry)
        self._refit()
        return True, True

    def _r_max(self) -> int:
        if self.rc.r_max is not None:
            return self.rc.r_max
        return max(1, len(self.space.active_flags))

    def _freeze(self) -> None:
        rc = self.rc
        actions = freeze_blocks(self.surrogate, self._live(), self.space,
                                n_min=rc.freeze_min_projections,
                                collapse_ratio=rc.freeze_collapse_ratio)
        for action in actions:
            self.space = self.space.exclude(dict(action.pins))
            self.frozen_registry.append({
                "block": action.block,
                "pins": {name: value for name, value in action.pins},
                "iteration": self.iterations,
            })
            self._repin_regions()
        if actions:
            self._refit()

    def _restart_regions(self) -> None:
        rc = self.rc
        alive = [r for r in self.regions if r.alive]
        if len(alive) >= 2 or len(alive) >= rc.region_count:
            self.regions = alive
            return
        fresh = init_regions(self._live(), self.surrogate,
                             rc.region_count - len(alive), rc.region_radius,
                             existing_centers=self.used_centers
                             + [r.center for r in alive],
                             name_offset=self.region_counter)
        self.region_counter += len(fresh)
        self.used_centers.extend(r.center for r in fresh)
        for region in fresh:
            self.region_log.append({
                "iteration": self.iterations, "region": region.name,
                "status": "restarted", "radius": region.radius,
                "center": region.center.as_dict()})
        self.regions = alive + fresh

    def run_search(self) -> None:
        rc = self.rc
        while self.iterations < rc.max_iterations:
            if self._search_allowance() <= 0:
                break
            self.iterations += 1
            evaluated = False
            state_changed = False
            for index in range(len(self.regions)):
                if not self.regions[index].alive:
                    continue
                did_eval, did_change = self._region_step(index, self.iterations)
                evaluated = evaluated or did_eval
                state_changed = state_changed or did_change
            self._freeze()
            self._restart_regions()
            if not self.regions:
                break
            if not evaluated and not state_changed:
                break

    def run_preflight(self, front: ParetoFront,
                      ) -> tuple[Configuration | None, list[dict]]:
        rc = self.rc
        thresholds = {flag: binding.fire_after_turns
                      for flag, binding in self.bindings.items()}
        candidates = sorted(front.points,
                            key=lambda p: (-p.mu, self.space.key(p.config)))
        committed = None
        vetoes: list[dict] = []
        for point in candidates:
            if self.spent_raw + 2.0 * self._smoke_estimate() > self.b_sea_raw:
                vetoes.append({"config": point.config.as_dict(),
                               "reason": "search budget exhausted before preflight"})
                break
            result = preflight_smoke(
                point.config, self.adapter, self.suite.smoke_task,
                thresholds, session_index=self.session,
                seed=derive_seed(rc.seed, "preflight", self.session),
                space=self.space)
            if result.record is not None:
                self.session += 1
                self._append(result.record)
            if result.passed:
                committed = point.config
                break
            vetoes.append({
                "config": point.config.as_dict(),
                "reason": result.reason or "preflight failed",
                "verdicts": [{"flag": v.flag, "status": v.status,
                              "reason": v.reason} for v in result.verdicts],
            })
        return committed, vetoes

    # -- assembly ---------------------------------------------------------

    def finish(self) -> RunResult:
        rc = self.rc
        self._refit()
        front = pareto_front(self.history, self.surrogate, self.cost_model,
                             budget_deploy=rc.budget_deploy, delta=rc.delta,
                             eta=rc.eta, r0=self.r0)
        smoke = self.suite.smoke_task or self.suite.tasks[0]
        if self.suite.smoke_task is None:
            self.suite = replace(self.suite, smoke_task=smoke)
        committed, vetoes = self.run_preflight(front)

        counts: dict[Configuration, tuple[int, int]] = {}
        for record in self._live():
            config = self.space.pin(record.config)
            k, n = counts.get(config, (0, 0))
            counts[config] = (k + sum(record.outcomes), n + record.fidelity)
        ordered = sorted(front.points,
                         key=lambda p: (-p.mu, self.space.key(p.config)))
        _, sd = self.surrogate.predict_many([p.config for p in ordered])
        entries = []
        for point, sigma in zip(ordered, sd):
            k, n = counts.get(point.config, (0, 0))
            if n > 0:
                lower, upper = wilson_interval(k, n, rc.wilson_level)
            else:
                lower, upper = 0.0, 1.0
            entries.append(FrontEntry(
                config=point.config, mean=min(1.0, max(0.0, float(point.mu))),
                sd=float(sigma), cost=float(point.cost),
                passes=k, trials=n, lower=lower, upper=upper,
                committed=(committed is not None and point.config == committed)))

        ledger, phase_totals, total_raw = build_ledger(self.history,
                                                       self.baseline_raw)
        result = RunResult(
            front=tuple(entries),
            committed=committed,
            vetoes=tuple(vetoes),
            ledger=ledger,
            phase_totals=phase_totals,
            total_raw_cost=total_raw,
            total_units=total_raw / self.baseline_raw,
            budget_units=rc.budget_search,
            baseline_unit_cost=self.baseline_raw,
            baseline_rate=self.r0,
            cost_reference=self.cost_ref_per_task,
            anova=block_anova(self.surrogate),
            silent_flags=tuple(self.silent_registry),
            anomalies=tuple(self.anomaly_registry),
            frozen_blocks=tuple(self.frozen_registry),
            region_log=tuple(self.region_log),
            iterations=self.iterations,
            seed=rc.seed,
            space=self.space,
            history=tuple(self.history),
            history_path=rc.history_path,
        )
        self._write(result.to_json_dict())
        return result


def run(rc: RunConfig, space: FlagSpace, adapter, *,
        suite: TaskSuite | None = None,
        bindings: Mapping[str, CounterBinding] | None = None) -> RunResult:
    """Execute one full search under ``rc`` and return the report payload."""
    if suite is None:
        suite = adapter.suite()
    if bindings is None:
        bindings = getattr(adapter, "bindings", {}) or {}
    if not rc.fidelities:
        rc = replace(rc, fidelities=(suite.full_size,))
    if rc.fidelities[-1] != suite.full_size:
        raise ValueError(
            f"largest fidelity {rc.fidelities[-1]} must equal the full suite "
            f"size {suite.full_size}")

    est_init = rc.sobol_count * rc.fidelities[0] / suite.full_size
    mandatory = 1.0 + est_init
    if rc.budget_search < mandatory:
        raise BudgetError(
            f"search budget {rc.budget_search} units cannot cover the baseline "
            f"(1.0) plus initialization (~{est_init:.3f}); "
            f"need at least {mandatory:.3f}", estimate=mandatory)

    meta = (load_meta_history(rc.meta_paths, space, lambda_meta=rc.lambda_meta)
            if rc.meta_paths else [])
    driver = _Driver(rc, space, adapter, suite, bindings)
    driver.history.extend(meta)
    try:
        driver._write({"type": "header", "version": 1,
                       "run": rc.semantic_dict(),
                       "flags": [f.name for f in space.flags],
                       "pinned": {k: v for k, v in sorted(space.pinned.items())}})
        driver.run_baseline()
        driver.run_init()
        driver.run_search()
        return driver.finish()
    finally:
        driver.close()


# -- reporting -------------------------------------------------------------


def report(rr: RunResult, format: str = "text") -> str:
    """Render a run as text tables or as a machine-readable JSON document."""
    if format == "machine":
        return canonical_json(rr.to_json_dict())
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")
    return render_report(rr.to_json_dict())


def parse_report(document: str) -> dict[str, Any]:
    """Inverse of the machine format; returns the result payload."""
    doc = json.loads(document)
    if not isinstance(doc, dict) or doc.get("type") != "result":
        raise ValueError("not a machine-readable run report")
    return doc


def render_report(doc: Mapping[str, Any]) -> str:
    """Text rendering of a result payload (from a run or a history file)."""
    lines: list[str] = []
    lines.append("== summary ==")
    lines.append(f"baseline pass rate {doc['baseline_rate']:.4f}; "
                 f"one budget unit = {doc['baseline_unit_cost']:.4f} raw cost")
    lines.append(f"spent {doc['total_units']:.3f} of {doc['budget_units']:.3f} "
                 f"units ({doc['total_raw_cost']:.4f} raw) over "
                 f"{doc['iterations']} iterations; seed {doc['seed']}")
    committed = doc.get("committed")
    if committed:
        flags = ", ".join(f"{k}={v}" for k, v in sorted(committed.items()))
        lines.append(f"committed: {flags}")
    else:
        lines.append("committed: none (every candidate was vetoed)")
        for veto in doc.get("vetoes", []):
            flags = ", ".join(f"{k}={v}" for k, v in sorted(veto["config"].items()))
            lines.append(f"  vetoed [{flags}]: {veto['reason']}")

    lines.append("")
    lines.append("== pareto front (posterior mean, per-task cost) ==")
    header = (f"{'mean':>8} {'sd':>8} {'cost':>8} {'passes':>9} "
              f"{'interval':>19}  config")
    lines.append(header)
    for entry in doc.get("front", []):
        flags = ", ".join(f"{k}={v}" for k, v in sorted(entry["config"].items()))
        mark = " *" if entry.get("committed") else ""
        lines.append(
            f"{entry['mean']:8.4f} {entry['sd']:8.4f} {entry['cost']:8.4f} "
            f"{entry['passes']:>4}/{entry['trials']:<4} "
            f"[{entry['lower']:.4f}, {entry['upper']:.4f}]  {flags}{mark}")

    lines.append("")
    lines.append("== budget ledger ==")
    lines.append(f"{'phase':<12} {'fidelity':>8} {'evals':>6} "
                 f"{'raw cost':>12} {'units':>8}")
    for row in doc.get("ledger", []):
        lines.append(f"{row['phase']:<12} {row['fidelity']:>8} "
                     f"{row['evaluations']:>6} {row['raw_cost']:>12.4f} "
                     f"{row['units']:>8.4f}")
    lines.append(f"{'total':<12} {'':>8} {'':>6} "
                 f"{doc['total_raw_cost']:>12.4f} {doc['total_units']:>8.4f}")

    lines.append("")
    lines.append("== block variance shares ==")
    for row in doc.get("anova", []):
        lines.append(f"{row['block']:<20} raw {row['raw']:>10.6f} "
                     f"share {row['normalized']:>7.4f}")

    if doc.get("silent_flags"):
        lines.append("")
        lines.append("== silent flags (excluded) ==")
        for item in doc["silent_flags"]:
            lines.append(
                f"{item['flag']}: {item['on_observations']} on-observations, "
                f"mean consumer counter {item['mean_consumer_counter']:.3f}, "
                f"excluded at session {item['session']}")
    if doc.get("anomalies"):
        lines.append("")
        lines.append("== write/read asymmetries ==")
        for item in doc["anomalies"]:
            lines.append(f"session {item['session']} {item['flag']}: "
                         f"{item['reason']}")
    if doc.get("frozen_blocks"):
        lines.append("")
        lines.append("== frozen blocks ==")
        for item in doc["frozen_blocks"]:
            pins = ", ".join(f"{k}={v}" for k, v in sorted(item["pins"].items()))
            lines.append(f"iteration {item['iteration']} {item['block']}: {pins}")
    return "\n".join(lines) + "\n"


def report_from_history(path: str, format: str = "text") -> str:
    """Rebuild the report from a history file's trailing result line."""
    result = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get("type") == "result":
                result = doc
    if result is None:
        raise ValueError(f"{path}: no result line; the run did not finish")
    if format == "machine":
        return canonical_json(result)
    return render_report(result)

"""Evaluation harness: task suites, fidelity subsets, adapters, and records.

An adapter runs one task against one configuration and reports pass/fail,
cost, and counters.  The in-process simulator is the default adapter; live
harnesses attach over a line-delimited JSON pipe (see ``ProcessAdapter``).
"""

from __future__ import annotations

import json
import math
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .space import BOOLEAN, CATEGORICAL, Configuration, FlagSpace, SpaceError
from .telemetry import CounterBinding, TelemetrySnapshot
from .util import canonical_json, derive_seed

PREFIX_SHUFFLE = "prefix-shuffle"
STRATIFIED = "stratified"

TURN_COUNTER = "turns"  # reserved counter carrying trajectory length


class AdapterError(RuntimeError):
    """Base class for adapter failures."""


class AdapterTransportError(AdapterError):
    """Retryable transport failure, tagged with the task in flight."""

    def __init__(self, task_id: str, detail: str = ""):
        super().__init__(f"transport failure on task {task_id!r}"
                         + (f": {detail}" if detail else ""))
        self.task_id = task_id


class AdapterProtocolError(AdapterError):
    """Fatal malformed response; carries the raw payload."""

    def __init__(self, message: str, payload: str = ""):
        super().__init__(f"{message}; payload: {payload!r}")
        self.payload = payload


@dataclass(frozen=True)
class TaskSuite:
    """The full evaluation suite: task ids, optional categories, smoke task."""

    tasks: tuple[str, ...]
    categories: tuple[tuple[str, str], ...] = ()
    smoke_task: str | None = None

    def __post_init__(self):
        if len(set(self.tasks)) != len(self.tasks):
            raise ValueError("duplicate task ids in suite")
        if not self.tasks:
            raise ValueError("empty task suite")

    @property
    def full_size(self) -> int:
        return len(self.tasks)

    @cached_property
    def category_of(self) -> dict[str, str]:
        return dict(self.categories)


_SUBSET_CACHE: dict[tuple, tuple[str, ...]] = {}


def fidelity_subset(suite: TaskSuite, m: int, seed: int,
                    mode: str = PREFIX_SHUFFLE) -> tuple[str, ...]:
    """Deterministic size-m subset of the suite, in canonical suite order.

    Prefix-shuffle draws one seeded permutation per (suite, seed) and takes
    prefixes, so subsets nest across fidelities.  Stratified preserves
    category proportions to within one task per category.
    """
    n = suite.full_size
    if not 1 <= m <= n:
        raise ValueError(f"fidelity {m} outside [1, {n}]")
    key = (suite.tasks, suite.categories, m, seed, mode)
    if key in _SUBSET_CACHE:
        return _SUBSET_CACHE[key]
    if m == n:
        chosen = suite.tasks
    elif mode == PREFIX_SHUFFLE:
        order = np.random.default_rng(
            derive_seed(seed, "subset", suite.tasks)).permutation(n)
        keep = set(order[:m].tolist())
        chosen = tuple(t for i, t in enumerate(suite.tasks) if i in keep)
    elif mode == STRATIFIED:
        if not suite.categories:
            raise ValueError("stratified subsets need task categories")
        chosen = _stratified_subset(suite, m, seed)
    else:
        raise ValueError(f"unknown subset mode {mode!r}")
    _SUBSET_CACHE[key] = chosen
    return chosen


def _stratified_subset(suite: TaskSuite, m: int, seed: int) -> tuple[str, ...]:
    order = np.random.default_rng(
        derive_seed(seed, "subset", suite.tasks)).permutation(suite.full_size)
    rank = {suite.tasks[int(i)]: pos for pos, i in enumerate(order)}
    groups: dict[str, list[str]] = {}
    for task in suite.tasks:
        groups.setdefault(suite.category_of.get(task, ""), []).append(task)
    # largest-remainder quotas keep every category within one of proportional
    quotas: dict[str, int] = {}
    remainders: list[tuple[float, str]] = []
    assigned = 0
    for cat, members in groups.items():
        exact = m * len(members) / suite.full_size
        quotas[cat] = int(exact)
        assigned += quotas[cat]
        remainders.append((exact - quotas[cat], cat))
    for _, cat in sorted(remainders, key=lambda rc: (-rc[0], rc[1]))[: m - assigned]:
        quotas[cat] += 1
    keep: set[str] = set()
    for cat, members in groups.items():
        ordered = sorted(members, key=lambda t: rank[t])
        keep.update(ordered[: quotas[cat]])
    return tuple(t for t in suite.tasks if t in keep)


@dataclass(frozen=True)
class TaskResult:
    passed: int
    cost: float
    counters: Mapping[str, float]
    timed_out: bool = False


@dataclass(frozen=True, eq=False)
class EvaluationRecord:
    """One configuration evaluated on one task subset; append-only history unit."""

    config: Configuration
    fidelity: int
    tasks: tuple[str, ...]
    outcomes: tuple[int, ...]
    raw_pass_rate: float
    total_cost: float
    session_index: int
    counters: TelemetrySnapshot
    seed: int
    phase: str = ""
    source: str = "live"
    corrected_target: float | None = None
    corrected_variance: float | None = None
    clipped: bool = False
    uninformative: bool = False

    def __post_init__(self):
        if self.fidelity != len(self.tasks) or len(self.outcomes) != self.fidelity:
            raise ValueError("record fidelity disagrees with its task list")
        expected = sum(self.outcomes) / self.fidelity
        if abs(self.raw_pass_rate - expected) > 1e-12:
            raise ValueError("raw_pass_rate is not the mean of outcomes")

    @property
    def per_task_cost(self) -> float:
        return self.total_cost / self.fidelity

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "type": "record",
            "config": self.config.as_dict(),
            "fidelity": self.fidelity,
            "tasks": list(self.tasks),
            "outcomes": list(self.outcomes),
            "raw_pass_rate": self.raw_pass_rate,
            "total_cost": self.total_cost,
            "session_index": self.session_index,
            "counters": dict(self.counters.counters),
            "turn_count": self.counters.turn_count,
            "seed": self.seed,
            "phase": self.phase,
            "source": self.source,
            "corrected_target": self.corrected_target,
            "corrected_variance": self.corrected_variance,
            "clipped": self.clipped,
            "uninformative": self.uninformative,
        }

    @staticmethod
    def from_json_dict(doc: Mapping[str, Any],
                       bindings: Mapping[str, CounterBinding] | None = None,
                       ) -> "EvaluationRecord":
        snapshot = TelemetrySnapshot(
            counters=dict(doc.get("counters", {})),
            turn_count=int(doc.get("turn_count", 0)),
            bindings=dict(bindings or {}),
        )
        return EvaluationRecord(
            config=Configuration.of(doc["config"]),
            fidelity=int(doc["fidelity"]),
            tasks=tuple(doc["tasks"]),
            outcomes=tuple(int(o) for o in doc["outcomes"]),
            raw_pass_rate=float(doc["raw_pass_rate"]),
            total_cost=float(doc["total_cost"]),
            session_index=int(doc["session_index"]),
            counters=snapshot,
            seed=int(doc.get("seed", 0)),
            phase=doc.get("phase", ""),
            source=doc.get("source", "live"),
            corrected_target=doc.get("corrected_target"),
            corrected_variance=doc.get("corrected_variance"),
            clipped=bool(doc.get("clipped", False)),
            uninformative=bool(doc.get("uninformative", False)),
        )


# ---------------------------------------------------------------------------
# simulator


@dataclass(frozen=True, eq=False)
class SimSpec:
    """Ground-truth generative model for the simulated harness.

    Pass outcomes are Bernoulli draws from a logistic-linear model over the
    encoded configuration with pairwise flag couplings; contributions of
    warm-dependent flags scale with 1 - exp(-n/kappa) in the session index n.
    Silent gates zero a flag's consumer counters without touching outcomes.
    """

    space: FlagSpace
    tasks: tuple[str, ...]
    base_logits: tuple[float, ...]
    linear: Mapping[str, tuple[float, ...]]
    couplings: tuple[tuple[str, str, float], ...] = ()
    warm_kappa: Mapping[str, float] = field(default_factory=dict)
    default_kappa: float = 2.0
    cost_base: tuple[float, ...] = ()
    cost_overheads: Mapping[str, float] = field(default_factory=dict)
    cost_noise: float = 0.0
    silent_gates: tuple[str, ...] = ()
    turns: Mapping[str, int] = field(default_factory=dict)
    default_turns: int = 6
    fire_after: Mapping[str, int] = field(default_factory=dict)
    categories: tuple[tuple[str, str], ...] = ()
    smoke_task: str | None = None
    read_plateau: float = 12.0
    seed: int = 0

    def __post_init__(self):
        if len(self.base_logits) != len(self.tasks):
            raise ValueError("base_logits length disagrees with task count")
        if self.cost_base and len(self.cost_base) != len(self.tasks):
            raise ValueError("cost_base length disagrees with task count")
        if not self.cost_base:
            object.__setattr__(self, "cost_base", tuple(1.0 for _ in self.tasks))
        for name in list(self.linear) + [f for pair in self.couplings for f in pair[:2]]:
            if name not in self.space.by_name:
                raise ValueError(f"simulator references unknown flag {name!r}")
        for a, b, _ in self.couplings:
            for name in (a, b):
                if self.space.by_name[name].kind == CATEGORICAL:
                    raise ValueError(f"couplings need scalar flags; {name!r} is a preset")
        for kappa in self.warm_kappa.values():
            if kappa <= 0:
                raise ValueError("warm kappa must be positive")
        if any(c < 0 for c in self.cost_base) or self.cost_noise < 0:
            raise ValueError("negative cost component")

    @cached_property
    def task_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tasks)}

    def warm_scale(self, flag: str, session_index: int) -> float:
        f = self.space.by_name[flag]
        if not f.warm_dependent:
            return 1.0
        kappa = self.warm_kappa.get(flag, self.default_kappa)
        return 1.0 - math.exp(-session_index / kappa)

    def logit(self, config: Configuration, task: str, session_index: int) -> float:
        total = self.base_logits[self.task_index[task]]
        for name, coeffs in self.linear.items():
            f = self.space.by_name[name]
            coords = f.encode_value(config[name])
            scale = self.warm_scale(name, session_index)
            total += scale * float(np.dot(coeffs, coords))
        for a, b, coeff in self.couplings:
            xa = self.space.by_name[a].encode_value(config[a])[0]
            xb = self.space.by_name[b].encode_value(config[b])[0]
            total += (coeff * xa * xb
                      * self.warm_scale(a, session_index)
                      * self.warm_scale(b, session_index))
        return total

    def pass_prob(self, config: Configuration, task: str, session_index: int) -> float:
        return 1.0 / (1.0 + math.exp(-self.logit(config, task, session_index)))

    def activation(self, config: Configuration, flag: str) -> float:
        """Per-flag cost activation in [0, 1]."""
        f = self.space.by_name[flag]
        if f.kind == CATEGORICAL:
            return f.values.index(config[flag]) / (len(f.values) - 1)
        return (f.encode_value(config[flag])[0] + 1.0) / 2.0

    def expected_task_cost(self, config: Configuration, task: str) -> float:
        cost = self.cost_base[self.task_index[task]]
        for flag, overhead in self.cost_overheads.items():
            cost += overhead * self.activation(config, flag)
        return max(cost, 0.0)

    def task_turns(self, task: str) -> int:
        return int(self.turns.get(task, self.default_turns))


def sim_truth(spec: SimSpec, config: Configuration,
              session_index: int = 1_000_000) -> tuple[float, float]:
    """Exact mean pass rate over the suite and exact mean per-task cost.

    The default session index is effectively fully warmed.
    """
    mu = sum(spec.pass_prob(config, t, session_index) for t in spec.tasks) / len(spec.tasks)
    cost = sum(spec.expected_task_cost(config, t) for t in spec.tasks) / len(spec.tasks)
    return mu, cost


class SimulatorAdapter:
    """In-process adapter over a SimSpec; deterministic given seeds."""

    def __init__(self, spec: SimSpec):
        self.spec = spec
        self.parallel = True
        self.bindings = {
            f.name: CounterBinding(
                flag=f.name,
                writes=(f"{f.name}.writes",),
                consumers=(f"{f.name}.reads",),
                fire_after_turns=int(spec.fire_after.get(f.name, 1)),
            )
            for f in spec.space.flags
        }

    def suite(self) -> TaskSuite:
        spec = self.spec
        smoke = spec.smoke_task
        if smoke is None:
            smoke = min(spec.tasks, key=lambda t: (spec.cost_base[spec.task_index[t]], t))
        return TaskSuite(spec.tasks, spec.categories, smoke_task=smoke)

    def evaluate_task(self, config: Configuration, task_id: str,
                      session_index: int, seed: int) -> TaskResult:
        spec = self.spec
        if task_id not in spec.task_index:
            raise AdapterProtocolError(f"unknown task {task_id!r}", task_id)
        rng = np.random.default_rng(derive_seed(
            spec.seed, seed, task_id, session_index, canonical_json(config.as_dict())))
        prob = spec.pass_prob(config, task_id, session_index)
        passed = int(rng.random() < prob)
        cost = spec.expected_task_cost(config, task_id)
        if spec.cost_noise > 0:
            cost = max(0.0, cost + spec.cost_noise * float(rng.standard_normal()))
        turns = spec.task_turns(task_id)
        counters: dict[str, float] = {TURN_COUNTER: float(turns)}
        for f in spec.space.flags:
            if not f.is_enabled(config[f.name]):
                continue
            counters[f"{f.name}.writes"] = float(turns)
            fires_at = int(spec.fire_after.get(f.name, 1))
            if f.name in spec.silent_gates or turns < fires_at:
                reads = 0.0
            elif f.warm_dependent:
                reads = spec.read_plateau * spec.warm_scale(f.name, session_index)
            else:
                reads = float(turns)
            counters[f"{f.name}.reads"] = reads
        return TaskResult(passed=passed, cost=cost, counters=counters)


# ---------------------------------------------------------------------------
# line-delimited JSON adapter protocol


class ProcessAdapter:
    """Adapter speaking line-delimited JSON with a child process.

    Handshake (child -> parent): ``{"type": "hello", "parallel": bool}``.
    Request: ``{"type": "eval", "config": {...}, "task_id": ..., "session_index":
    ..., "seed": ...}``.  Response: ``{"type": "result", "task_id": ...,
    "passed": 0|1, "cost": number, "counters": {...}}``.
    """

    def __init__(self, command: Sequence[str], *,
                 bindings: Mapping[str, CounterBinding] | None = None,
                 timeout: float | None = None, timeout_cost: float | None = None):
        self.command = list(command)
        self.bindings = dict(bindings or {})
        self.timeout = timeout
        self.timeout_cost = timeout_cost if timeout_cost is not None else (timeout or 0.0)
        self.parallel = False
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()
        self._cond = threading.Condition()
        self._responses: dict[str, list[dict]] = {}
        self._failed: str | None = None
        self._start()

    def _start(self) -> None:
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)
        line = self._proc.stdout.readline()
        if not line:
            raise AdapterTransportError("<handshake>", "adapter exited before hello")
        try:
            hello = json.loads(line)
        except json.JSONDecodeError:
            raise AdapterProtocolError("handshake is not JSON", line.strip())
        if hello.get("type") != "hello" or not isinstance(hello.get("parallel"), bool):
            raise AdapterProtocolError("malformed handshake", line.strip())
        self.parallel = hello["parallel"]
        self._failed = None
        self._responses = {}
        threading.Thread(target=self._reader, args=(self._proc,), daemon=True).start()

    def _reader(self, proc: subprocess.Popen) -> None:
        while True:
            line = proc.stdout.readline()
            if not line:
                with self._cond:
                    if self._proc is proc:
                        self._failed = "adapter closed its output stream"
                    self._cond.notify_all()
                return
            with self._cond:
                try:
                    message = json.loads(line)
                except json.JSONDecodeError:
                    self._responses.setdefault("", []).append({"raw": line.strip()})
                    self._cond.notify_all()
                    continue
                key = str(message.get("task_id", ""))
                self._responses.setdefault(key, []).append(
                    {"raw": line.strip(), "message": message})
                self._cond.notify_all()

    def restart(self) -> None:
        self.close()
        self._start()

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            self._proc.wait(timeout=5)
            self._proc = None

    def evaluate_task(self, config: Configuration, task_id: str,
                      session_index: int, seed: int) -> TaskResult:
        request = {"type": "eval", "config": config.as_dict(), "task_id": task_id,
                   "session_index": session_index, "seed": seed}
        with self._lock:
            if self._proc is None or self._proc.poll() is not None:
                raise AdapterTransportError(task_id, "adapter process is gone")
            try:
                self._proc.stdin.write(json.dumps(request, sort_keys=True) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as err:
                raise AdapterTransportError(task_id, str(err))
        with self._cond:
            got = self._cond.wait_for(
                lambda: self._responses.get(task_id) or self._responses.get("")
                or self._failed is not None,
                timeout=self.timeout)
            if not got:
                # per-task timeout: recorded as a failure with cost accrued
                return TaskResult(passed=0, cost=self.timeout_cost, counters={},
                                  timed_out=True)
            if self._responses.get(""):
                entry = self._responses[""].pop(0)
                raise AdapterProtocolError("response is not addressable", entry["raw"])
            if not self._responses.get(task_id):
                raise AdapterTransportError(task_id, self._failed or "no response")
            entry = self._responses[task_id].pop(0)
        return self._validate(entry, task_id)

    @staticmethod
    def _validate(entry: dict, task_id: str) -> TaskResult:
        message = entry.get("message")
        if message is None:
            raise AdapterProtocolError("response is not JSON", entry["raw"])
        if message.get("type") != "result":
            raise AdapterProtocolError("response type is not 'result'", entry["raw"])
        passed = message.get("passed")
        cost = message.get("cost")
        if passed not in (0, 1) or not isinstance(cost, (int, float)):
            raise AdapterProtocolError("result fields out of contract", entry["raw"])
        counters = message.get("counters", {})
        if not isinstance(counters, Mapping):
            raise AdapterProtocolError("counters is not a mapping", entry["raw"])
        return TaskResult(passed=int(passed), cost=float(cost),
                          counters={str(k): float(v) for k, v in counters.items()})


# ---------------------------------------------------------------------------
# evaluation driver-side assembly


def evaluate(adapter, config: Configuration, tasks: Sequence[str],
             session_index: int, seed: int, *, parallelism: int = 1,
             retries: int = 1, phase: str = "", source: str = "live",
             ) -> EvaluationRecord:
    """Run ``config`` on each task and assemble one immutable record.

    Task dispatch may overlap when the adapter tolerates it; assembly order is
    the task-list order regardless, so records are deterministic.  Transport
    failures are retried (restarting the adapter when it supports restart);
    malformed responses are fatal.
    """
    tasks = tuple(tasks)

    def run_one(position: int) -> TaskResult:
        task = tasks[position]
        task_seed = derive_seed(seed, "task", task)
        failure: AdapterTransportError | None = None
        for attempt in range(retries + 1):
            try:
                return adapter.evaluate_task(config, task, session_index, task_seed)
            except AdapterTransportError as err:
                failure = err
                if attempt < retries and hasattr(adapter, "restart"):
                    adapter.restart()
        raise failure

    workers = max(1, parallelism if getattr(adapter, "parallel", False) else 1)
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, range(len(tasks))))
    else:
        results = [run_one(i) for i in range(len(tasks))]

    outcomes = tuple(r.passed for r in results)
    total_cost = sum(r.cost for r in results)
    counters: dict[str, float] = {}
    for r in results:
        for name in r.counters:
            counters[name] = counters.get(name, 0.0) + float(r.counters[name])
    snapshot = TelemetrySnapshot(
        counters=counters,
        turn_count=int(round(counters.get(TURN_COUNTER, 0.0))),
        bindings=dict(getattr(adapter, "bindings", {}) or {}),
    )
    return EvaluationRecord(
        config=config, fidelity=len(tasks), tasks=tasks, outcomes=outcomes,
        raw_pass_rate=sum(outcomes) / len(tasks), total_cost=total_cost,
        session_index=session_index, counters=snapshot, seed=seed,
        phase=phase, source=source)


@dataclass(frozen=True)
class BaselineResult:
    r0: float
    variance: float
    record: EvaluationRecord
    config: Configuration


def baseline_config(space: FlagSpace) -> Configuration:
    """Anchor configuration: warm-dependent flags off, everything else default."""
    mapping: dict[str, Any] = {}
    for f in space.active_flags:
        if f.warm_dependent and f.kind == BOOLEAN:
            mapping[f.name] = False
        else:
            mapping[f.name] = f.default
    return space.config(mapping)


def measure_baseline(adapter, space: FlagSpace, suite: TaskSuite,
                     seed: int, *, parallelism: int = 1) -> BaselineResult:
    """Direct full-suite measurement of the cold anchor rate R0.

    Runs at session index 0 so no warm machinery is exercised; the variance is
    the plain binomial p(1-p)/N.
    """
    config = baseline_config(space)
    record = evaluate(adapter, config, suite.tasks, session_index=0,
                      seed=derive_seed(seed, "baseline"), phase="baseline",
                      parallelism=parallelism)
    r0 = record.raw_pass_rate
    variance = r0 * (1.0 - r0) / suite.full_size
    return BaselineResult(r0=r0, variance=variance, record=record, config=config)


# ---------------------------------------------------------------------------
# simulator document parsing


def parse_sim(document: str | Mapping[str, Any], space: FlagSpace) -> SimSpec:
    """Parse a YAML/JSON simulator document against a space.

    See the README for the schema; every flag referenced must exist in the
    space and coefficient lists must match latent widths.
    """
    doc = yaml.safe_load(document) if isinstance(document, str) else document
    if not isinstance(doc, Mapping):
        raise ValueError("simulator document must be a mapping")

    tasks_field = doc.get("tasks", 0)
    categories: list[tuple[str, str]] = []
    if isinstance(tasks_field, int):
        if doc.get("categories"):
            tasks = []
            for cat in doc["categories"]:
                count = int(doc["categories"][cat])
                members = [f"{cat}-{i:03d}" for i in range(count)]
                tasks.extend(members)
                categories.extend((t, cat) for t in members)
            tasks = tuple(tasks)
        else:
            if tasks_field <= 0:
                raise ValueError("simulator needs tasks")
            tasks = tuple(f"task-{i:03d}" for i in range(tasks_field))
    else:
        tasks = tuple(str(t) for t in tasks_field)
        cat_map = doc.get("categories") or {}
        categories = [(t, cat_map[t]) for t in tasks if t in cat_map]

    base = doc.get("base_logit", 0.0)
    if isinstance(base, (int, float)):
        base_logits = tuple(float(base) for _ in tasks)
    else:
        base_logits = tuple(float(b) for b in base)

    linear: dict[str, tuple[float, ...]] = {}
    for flag, coeff in (doc.get("linear") or {}).items():
        if flag not in space.by_name:
            raise ValueError(f"linear coefficient for unknown flag {flag!r}")
        width = space.by_name[flag].dim
        if isinstance(coeff, (int, float)):
            if width != 1:
                raise ValueError(f"flag {flag!r} needs {width} coefficients")
            linear[flag] = (float(coeff),)
        else:
            if len(coeff) != width:
                raise ValueError(f"flag {flag!r} needs {width} coefficients")
            linear[flag] = tuple(float(c) for c in coeff)

    couplings = tuple((str(a), str(b), float(c))
                      for a, b, c in (doc.get("couplings") or ()))

    warm = doc.get("warm") or {}
    cost = doc.get("cost") or {}
    cost_base = cost.get("base", 1.0)
    if isinstance(cost_base, (int, float)):
        cost_base = tuple(float(cost_base) for _ in tasks)
    else:
        cost_base = tuple(float(c) for c in cost_base)
    overheads = {str(f): float(v) for f, v in (cost.get("overheads") or {}).items()}
    for f in space.flags:
        overheads.setdefault(f.name, f.cost_weight)

    turns_doc = doc.get("turns") or {}
    return SimSpec(
        space=space,
        tasks=tasks,
        base_logits=base_logits,
        linear=linear,
        couplings=couplings,
        warm_kappa={str(f): float(k) for f, k in (warm.get("kappa") or {}).items()},
        default_kappa=float(warm.get("default_kappa", 2.0)),
        cost_base=cost_base,
        cost_overheads=overheads,
        cost_noise=float(cost.get("noise", 0.0)),
        silent_gates=tuple(doc.get("silent_gates") or ()),
        turns={str(t): int(v) for t, v in (turns_doc.get("per_task") or {}).items()},
        default_turns=int(turns_doc.get("default", 6)),
        fire_after={str(f): int(v) for f, v in (doc.get("fire_after") or {}).items()},
        categories=tuple(categories),
        smoke_task=doc.get("smoke_task"),
        read_plateau=float(doc.get("read_plateau", 12.0)),
        seed=int(doc.get("seed", 0)),
    )


def load_sim(path: str, space: FlagSpace) -> SimSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_sim(fh.read(), space)


def parse_suite(document: str | Mapping[str, Any]) -> TaskSuite:
    """Read a task-suite document: task ids, optional categories, smoke task."""
    doc = yaml.safe_load(document) if isinstance(document, str) else document
    if not isinstance(doc, Mapping) or "tasks" not in doc:
        raise ValueError("suite document must be a mapping with a 'tasks' list")
    tasks = tuple(str(t) for t in doc["tasks"])
    categories = tuple(sorted((str(t), str(c))
                              for t, c in (doc.get("categories") or {}).items()))
    for task, _ in categories:
        if task not in tasks:
            raise ValueError(f"category entry for unknown task {task!r}")
    smoke = doc.get("smoke")
    if smoke is not None and smoke not in tasks:
        raise ValueError(f"smoke task {smoke!r} is not in the suite")
    return TaskSuite(tasks, categories, smoke_task=smoke)


def load_suite(path: str) -> TaskSuite:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_suite(fh.read())

"""Counter-based flag health checks.

Catches flags that are wired upstream of where their consumers read (silent
flags), write/read asymmetries, and pre-commit smoke failures, from the
counters adapters attach to every evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

GREEN = "GREEN"
YELLOW = "YELLOW"
RED = "RED"


@dataclass(frozen=True)
class CounterBinding:
    """Which counters a flag writes and which its consumers increment."""

    flag: str
    writes: tuple[str, ...] = ()
    consumers: tuple[str, ...] = ()
    fire_after_turns: int = 1


@dataclass(frozen=True, eq=False)
class TelemetrySnapshot:
    """Aggregated counters for one evaluation record."""

    counters: Mapping[str, float]
    turn_count: int
    bindings: Mapping[str, CounterBinding]

    def write_total(self, flag: str) -> float:
        binding = self.bindings.get(flag)
        if binding is None:
            return 0.0
        return sum(self.counters.get(name, 0.0) for name in binding.writes)

    def consumer_total(self, flag: str) -> float:
        binding = self.bindings.get(flag)
        if binding is None:
            return 0.0
        return sum(self.counters.get(name, 0.0) for name in binding.consumers)


@dataclass(frozen=True)
class FlagVerdict:
    flag: str
    status: str
    reason: str


@dataclass(frozen=True)
class SilentFinding:
    """A flag that never fired its consumer counters while switched on."""

    flag: str
    on_observations: int
    mean_consumer_counter: float


@dataclass(frozen=True)
class PreflightResult:
    verdicts: tuple[FlagVerdict, ...]
    passed: bool
    reason: str | None = None
    record: Any = None


def _enabled_flags(config, space) -> list[str]:
    if space is not None:
        return [f.name for f in space.active_flags if f.is_enabled(config[f.name])]
    return [name for name, value in config.items if bool(value)]


def detect_silent(history: Sequence, epsilon: float = 0.5, n_silent: int = 3,
                  space=None) -> list[SilentFinding]:
    """Flags observed on in >= ``n_silent`` records whose consumer counters
    stayed below ``epsilon`` on average.

    Only flags with consumer-counter bindings are judged; a flag with no
    consumers bound cannot testify against itself.
    """
    on_counts: dict[str, int] = {}
    totals: dict[str, float] = {}
    for record in history:
        snapshot = record.counters
        for flag in _enabled_flags(record.config, space):
            binding = snapshot.bindings.get(flag)
            if binding is None or not binding.consumers:
                continue
            on_counts[flag] = on_counts.get(flag, 0) + 1
            totals[flag] = totals.get(flag, 0.0) + snapshot.consumer_total(flag)
    findings = []
    for flag in sorted(on_counts):
        n = on_counts[flag]
        if n < n_silent:
            continue
        mean = totals[flag] / n
        if mean < epsilon:
            findings.append(SilentFinding(flag, n, mean))
    return findings


def detect_asymmetry(record, space=None) -> list[FlagVerdict]:
    """On-flags whose write counters moved while every consumer counter
    stayed at zero.  Both-sides-zero is silent-flag territory, not this.
    """
    snapshot = record.counters
    findings = []
    for flag in _enabled_flags(record.config, space):
        binding = snapshot.bindings.get(flag)
        if binding is None or not binding.writes or not binding.consumers:
            continue
        wrote = snapshot.write_total(flag)
        consumed = snapshot.consumer_total(flag)
        if wrote > 0 and consumed == 0:
            findings.append(FlagVerdict(
                flag, RED,
                f"writes {wrote:g} with zero consumer reads"))
    return findings


def judge_smoke(config, snapshot: TelemetrySnapshot,
                thresholds: Mapping[str, int] | None = None,
                space=None) -> tuple[tuple[FlagVerdict, ...], bool]:
    """Classify each on-flag from a single smoke evaluation.

    Consumer counters moved: GREEN.  Zero counters on a trajectory shorter
    than the flag's firing threshold: YELLOW (inconclusive).  Zero counters
    at or past the threshold: RED.  Any RED fails the check.
    """
    thresholds = thresholds or {}
    verdicts = []
    for flag in _enabled_flags(config, space):
        binding = snapshot.bindings.get(flag)
        if binding is None or not binding.consumers:
            continue
        fired = snapshot.consumer_total(flag)
        threshold = thresholds.get(flag, binding.fire_after_turns)
        if fired > 0:
            verdicts.append(FlagVerdict(flag, GREEN, f"consumer counters at {fired:g}"))
        elif snapshot.turn_count < threshold:
            verdicts.append(FlagVerdict(
                flag, YELLOW,
                f"no reads in {snapshot.turn_count} turns (fires after {threshold})"))
        else:
            verdicts.append(FlagVerdict(
                flag, RED,
                f"no reads after {snapshot.turn_count} turns (fires after {threshold})"))
    passed = all(v.status != RED for v in verdicts)
    return tuple(verdicts), passed


def preflight_smoke(config, adapter, smoke_task: str,
                    thresholds: Mapping[str, int] | None = None, *,
                    session_index: int = 0, seed: int = 0,
                    space=None) -> PreflightResult:
    """Run the single smoke task and judge every on-flag's counters.

    An evaluation failure vetoes conservatively rather than passing silently.
    """
    from .evaluator import AdapterError, evaluate  # late import; evaluator owns snapshots

    try:
        record = evaluate(adapter, config, (smoke_task,),
                          session_index=session_index, seed=seed,
                          phase="preflight")
    except AdapterError as err:
        return PreflightResult((), False, reason=f"smoke evaluation failed: {err}")
    verdicts, passed = judge_smoke(config, record.counters, thresholds, space=space)
    reason = None
    if not passed:
        dead = ", ".join(v.flag for v in verdicts if v.status == RED)
        reason = f"dead flag wiring: {dead}"
    return PreflightResult(verdicts, passed, reason=reason, record=record)


def parse_bindings(document: Mapping[str, Any] | None) -> dict[str, CounterBinding]:
    """Extract per-flag counter bindings from a space document's ``counters``."""
    if not document:
        return {}
    section = document.get("counters") if "counters" in document else document
    out: dict[str, CounterBinding] = {}
    for flag, spec in (section or {}).items():
        out[flag] = CounterBinding(
            flag=flag,
            writes=tuple(spec.get("writes", ())),
            consumers=tuple(spec.get("reads", ())),
            fire_after_turns=int(spec.get("fire_after_turns", 1)),
        )
    return out

"""Shared fixtures and record-building helpers for the test suite."""

from __future__ import annotations

import math

import pytest

from harbor.evaluator import EvaluationRecord
from harbor.space import FlagDef, FlagSpace
from harbor.telemetry import CounterBinding, TelemetrySnapshot


def mixed_space() -> FlagSpace:
    """A small space covering every flag kind and a multi-block layout."""
    return FlagSpace(
        flags=(
            FlagDef("cache", "boolean", (False, True), block="memory",
                    warm_dependent=True, cost_weight=0.2),
            FlagDef("prefetch", "boolean", (False, True), block="memory"),
            FlagDef("threshold", "numeric", (0.75, 0.80, 0.85), block="policy",
                    default=0.80),
            FlagDef("mode", "categorical", ("plain", "greedy", "exact"),
                    block="policy"),
            FlagDef("retry", "boolean", (False, True), block="control",
                    cost_weight=-0.1),
        ),
    )


def bool_space(n: int, blocks: int = 2) -> FlagSpace:
    """n boolean flags spread round-robin over the given number of blocks."""
    return FlagSpace(
        flags=tuple(
            FlagDef(f"f{i}", "boolean", (False, True), block=f"b{i % blocks}")
            for i in range(n)
        ),
    )


def snapshot_for(space: FlagSpace, counters: dict[str, float] | None = None,
                 turns: int = 10) -> TelemetrySnapshot:
    bindings = {
        f.name: CounterBinding(flag=f.name, writes=(f"{f.name}.writes",),
                               consumers=(f"{f.name}.reads",))
        for f in space.flags
    }
    return TelemetrySnapshot(counters=dict(counters or {}), turn_count=turns,
                             bindings=bindings)


def make_record(space: FlagSpace, config, outcomes, *, session: int = 1,
                phase: str = "search", costs=None, counters=None,
                corrected=None, variance=None, source: str = "live",
                seed: int = 0) -> EvaluationRecord:
    """Assemble a self-consistent record from pass/fail outcomes."""
    outcomes = tuple(int(o) for o in outcomes)
    m = len(outcomes)
    if costs is None:
        costs = tuple(1.0 for _ in outcomes)
    return EvaluationRecord(
        config=config,
        fidelity=m,
        tasks=tuple(f"t{i:03d}" for i in range(m)),
        outcomes=outcomes,
        raw_pass_rate=sum(outcomes) / m,
        total_cost=math.fsum(costs),
        session_index=session,
        phase=phase,
        seed=seed,
        source=source,
        counters=counters if counters is not None else snapshot_for(space),
        corrected_target=corrected,
        corrected_variance=variance,
    )


@pytest.fixture
def space() -> FlagSpace:
    return mixed_space()

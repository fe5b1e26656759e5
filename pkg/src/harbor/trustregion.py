"""Local search regions on the Hamming graph.

Integer-radius balls around incumbents that double on success streaks and
halve on failure streaks; a radius below one kills the region.  Blocks whose
fitted scale collapses get frozen at the incumbent's values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .space import Configuration, FlagSpace
from .surrogate import Surrogate

IMPROVED = "improved"
NOT_IMPROVED = "not_improved"


@dataclass(frozen=True)
class TrustRegion:
    center: Configuration
    radius: int
    success_streak: int = 0
    failure_streak: int = 0
    alive: bool = True
    best_target: float = float("-inf")
    name: str = ""


@dataclass(frozen=True)
class BatchOutcome:
    improved: bool
    best_config: Configuration | None = None
    best_target: float | None = None


def init_regions(history: Sequence, s: Surrogate, count: int, radius: int,
                 *, existing_centers: Sequence[Configuration] = (),
                 name_offset: int = 0) -> list[TrustRegion]:
    """Regions centered on the top distinct evaluated configs by posterior mean."""
    seen: list[Configuration] = []
    for record in history:
        if record.source != "live":
            continue
        config = s.space.pin(record.config)
        if config not in seen:
            seen.append(config)
    if not seen:
        raise ValueError("no evaluated configurations to seed regions")
    mu, _ = s.predict_many(seen)
    ranked = sorted(zip(seen, mu), key=lambda cm: (-cm[1], s.space.key(cm[0])))
    taken = list(existing_centers)
    regions: list[TrustRegion] = []
    best_by_config = _best_targets(history, s.space)
    for config, mean in ranked:
        if len(regions) >= count:
            break
        if config in taken:
            continue
        taken.append(config)
        regions.append(TrustRegion(
            center=config, radius=radius,
            best_target=best_by_config.get(config, float(mean)),
            name=f"region-{name_offset + len(regions)}"))
    return regions


def _best_targets(history: Sequence, space: FlagSpace) -> dict[Configuration, float]:
    best: dict[Configuration, float] = {}
    for record in history:
        if record.source != "live" or record.corrected_target is None:
            continue
        if record.uninformative:
            continue
        config = space.pin(record.config)
        if record.corrected_target > best.get(config, float("-inf")):
            best[config] = record.corrected_target
    return best


def update_region(region: TrustRegion, outcome: BatchOutcome, *,
                  tau_succ: int = 3, tau_fail: int = 3,
                  r_max: int | None = None) -> TrustRegion:
    """Streak bookkeeping after one batch.

    Success moves the center to the improving point; tau_succ successes
    double the radius (capped), tau_fail failures halve it (integer floor),
    and a radius below one kills the region.  Dead regions never revive.
    """
    if not region.alive:
        return region
    if outcome.improved:
        updated = replace(
            region,
            success_streak=region.success_streak + 1,
            failure_streak=0,
            center=outcome.best_config if outcome.best_config is not None else region.center,
            best_target=(outcome.best_target
                         if outcome.best_target is not None else region.best_target))
        if updated.success_streak >= tau_succ:
            radius = updated.radius * 2
            if r_max is not None:
                radius = min(radius, r_max)
            updated = replace(updated, radius=radius, success_streak=0)
        return updated
    updated = replace(region, failure_streak=region.failure_streak + 1,
                      success_streak=0)
    if updated.failure_streak >= tau_fail:
        radius = updated.radius // 2
        updated = replace(updated, radius=radius, failure_streak=0)
        if radius < 1:
            updated = replace(updated, alive=False)
    return updated


def relax_region(region: TrustRegion, *, r_max: int) -> TrustRegion:
    """Widen a region whose safe pool came back empty.

    Locality is the only thing an empty pool can blame, so the ball doubles
    (capped at r_max); a region already at the cap has nowhere left to look
    and is killed.  Streaks are untouched: they track evaluation outcomes.
    """
    if not region.alive:
        return region
    if region.radius >= r_max:
        return replace(region, alive=False)
    return replace(region, radius=min(region.radius * 2, r_max))


@dataclass(frozen=True)
class FreezeAction:
    block: str
    pins: tuple[tuple[str, object], ...]


def freeze_blocks(s: Surrogate, history: Sequence, space: FlagSpace, *,
                  n_min: int = 8, collapse_ratio: float = 1e-3,
                  ) -> list[FreezeAction]:
    """Propose pinning blocks whose scale collapsed after enough evidence.

    A block qualifies when its fitted scale falls below ``collapse_ratio``
    times the largest block scale and at least ``n_min`` distinct value
    combinations of the block were observed.  Pins are the incumbent best
    config's values, so freezing never removes the incumbent itself.
    """
    if not s.scales:
        return []
    max_scale = max(s.scales.values())
    if max_scale <= 0:
        return []
    best_config = _incumbent(history, s, space)
    if best_config is None:
        return []
    actions: list[FreezeAction] = []
    for block, flags in space.blocks.items():
        scale = s.scales.get(block, 0.0)
        if scale >= collapse_ratio * max_scale:
            continue
        seen = {tuple(space.pin(r.config)[f] for f in flags)
                for r in history if r.source == "live"}
        if len(seen) < n_min:
            continue
        actions.append(FreezeAction(
            block, tuple((f, best_config[f]) for f in flags)))
    return actions


def _incumbent(history: Sequence, s: Surrogate,
               space: FlagSpace) -> Configuration | None:
    seen: list[Configuration] = []
    for record in history:
        if record.source != "live":
            continue
        config = space.pin(record.config)
        if config not in seen:
            seen.append(config)
    if not seen:
        return None
    mu, _ = s.predict_many(seen)
    ranked = sorted(zip(seen, mu), key=lambda cm: (-cm[1], space.key(cm[0])))
    return ranked[0][0]

"""Mixed-variable flag-configuration spaces.

Typed flags (boolean gates, numeric thresholds with finite candidate sets,
categorical presets) grouped into named blocks, with a deterministic latent
encoding, low-discrepancy initial designs, and Hamming-ball neighborhoods.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
import yaml
from scipy.stats import qmc

BOOLEAN = "boolean"
NUMERIC = "numeric"
CATEGORICAL = "categorical"

_KINDS = (BOOLEAN, NUMERIC, CATEGORICAL)


class SpaceError(ValueError):
    """Malformed space document or out-of-domain value."""


@dataclass(frozen=True)
class FlagDef:
    """One tunable flag: its kind, finite value domain, and block membership."""

    name: str
    kind: str
    values: tuple
    block: str
    warm_dependent: bool = False
    default: Any = None
    cost_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SpaceError(f"flag {self.name!r}: unknown kind {self.kind!r}")
        if not self.values:
            raise SpaceError(f"flag {self.name!r}: empty value domain")
        if self.kind == BOOLEAN and self.values != (False, True):
            raise SpaceError(f"flag {self.name!r}: boolean domain must be (False, True)")
        if self.kind == NUMERIC:
            vals = tuple(float(v) for v in self.values)
            if len(set(vals)) != len(vals) or list(vals) != sorted(vals):
                raise SpaceError(f"flag {self.name!r}: candidates must be sorted and distinct")
            object.__setattr__(self, "values", vals)
        if self.kind == CATEGORICAL:
            if len(set(self.values)) != len(self.values):
                raise SpaceError(f"flag {self.name!r}: duplicate levels")
            if len(self.values) < 2:
                raise SpaceError(f"flag {self.name!r}: a preset needs at least two levels")
        if self.default is None:
            object.__setattr__(self, "default", self.values[0])
        if self.default not in self.values:
            raise SpaceError(f"flag {self.name!r}: default {self.default!r} not in domain")
        if not math.isfinite(self.cost_weight):
            raise SpaceError(f"flag {self.name!r}: cost_weight must be finite")

    @property
    def dim(self) -> int:
        """Latent coordinates this flag occupies."""
        return len(self.values) if self.kind == CATEGORICAL else 1

    @staticmethod
    def boolean(name: str, block: str, *, warm_dependent: bool = False,
                default: bool = False, cost_weight: float = 0.0) -> "FlagDef":
        return FlagDef(name, BOOLEAN, (False, True), block,
                       warm_dependent=warm_dependent, default=default,
                       cost_weight=cost_weight)

    @staticmethod
    def numeric(name: str, candidates: Sequence[float], block: str, *,
                warm_dependent: bool = False, default: float | None = None,
                cost_weight: float = 0.0) -> "FlagDef":
        return FlagDef(name, NUMERIC, tuple(candidates), block,
                       warm_dependent=warm_dependent, default=default,
                       cost_weight=cost_weight)

    @staticmethod
    def categorical(name: str, levels: Sequence[str], block: str, *,
                    warm_dependent: bool = False, default: str | None = None,
                    cost_weight: float = 0.0) -> "FlagDef":
        return FlagDef(name, CATEGORICAL, tuple(levels), block,
                       warm_dependent=warm_dependent, default=default,
                       cost_weight=cost_weight)

    def encode_value(self, value: Any) -> np.ndarray:
        if self.kind == BOOLEAN:
            return np.array([1.0 if value else -1.0])
        if self.kind == NUMERIC:
            lo, hi = self.values[0], self.values[-1]
            if hi == lo:
                return np.array([0.0])
            return np.array([2.0 * (value - lo) / (hi - lo) - 1.0])
        out = np.full(len(self.values), -1.0)
        out[self.values.index(value)] = 1.0
        return out

    def decode_coords(self, coords: np.ndarray) -> Any:
        if self.kind == BOOLEAN:
            return bool(coords[0] >= 0.0)
        if self.kind == NUMERIC:
            lo, hi = self.values[0], self.values[-1]
            v = lo + (coords[0] + 1.0) / 2.0 * (hi - lo)
            return min(self.values, key=lambda c: abs(c - v))
        return self.values[int(np.argmax(coords))]

    def is_enabled(self, value: Any) -> bool:
        """Whether the flag is switched on: truthy for booleans, non-default otherwise."""
        if self.kind == BOOLEAN:
            return bool(value)
        return value != self.default


@dataclass(frozen=True)
class Configuration:
    """A total assignment of flag values, canonically ordered by flag name."""

    items: tuple[tuple[str, Any], ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted(self.items)))

    @staticmethod
    def of(mapping: Mapping[str, Any]) -> "Configuration":
        return Configuration(tuple(mapping.items()))

    def __getitem__(self, name: str) -> Any:
        for key, value in self.items:
            if key == name:
                return value
        raise KeyError(name)

    def get(self, name: str, default: Any = None) -> Any:
        for key, value in self.items:
            if key == name:
                return value
        return default

    def __contains__(self, name: str) -> bool:
        return any(key == name for key, _ in self.items)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.items)

    def replace(self, **changes: Any) -> "Configuration":
        mapping = self.as_dict()
        mapping.update(changes)
        return Configuration.of(mapping)


@dataclass(frozen=True)
class FlagSpace:
    """An ordered set of flags partitioned into blocks, with optional pins.

    ``excluded`` maps pruned flags (silenced or frozen) to the value they are
    pinned at; pinned flags never vary in designs, neighborhoods, or encodes.
    """

    flags: tuple[FlagDef, ...]
    excluded: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.flags]
        if len(set(names)) != len(names):
            dupe = next(n for n in names if names.count(n) > 1)
            raise SpaceError(f"duplicate flag name {dupe!r}")
        by_name = {f.name: f for f in self.flags}
        for name, value in self.excluded:
            if name not in by_name:
                raise SpaceError(f"excluded flag {name!r} is not in the space")
            if value not in by_name[name].values:
                raise SpaceError(f"pin for {name!r}: {value!r} not in its domain")

    # -- derived tables ----------------------------------------------------

    @cached_property
    def by_name(self) -> dict[str, FlagDef]:
        return {f.name: f for f in self.flags}

    @cached_property
    def pinned(self) -> dict[str, Any]:
        return dict(self.excluded)

    @cached_property
    def active_flags(self) -> tuple[FlagDef, ...]:
        return tuple(f for f in self.flags if f.name not in self.pinned)

    @cached_property
    def blocks(self) -> dict[str, tuple[str, ...]]:
        """Ordered partition of active flags into named blocks."""
        out: dict[str, list[str]] = {}
        for f in self.active_flags:
            out.setdefault(f.block, []).append(f.name)
        return {b: tuple(fs) for b, fs in out.items()}

    @cached_property
    def encode_dim(self) -> int:
        return sum(f.dim for f in self.active_flags)

    @cached_property
    def block_slices(self) -> dict[str, slice]:
        """Latent-coordinate span of each block, in flag document order."""
        out: dict[str, slice] = {}
        offset = 0
        for block, names in self.blocks.items():
            width = sum(self.by_name[n].dim for n in names)
            out[block] = slice(offset, offset + width)
            offset += width
        return out

    @cached_property
    def _encode_order(self) -> tuple[FlagDef, ...]:
        # Coordinates are laid out block by block so block slices are contiguous.
        order: list[FlagDef] = []
        for names in self.blocks.values():
            order.extend(self.by_name[n] for n in names)
        return tuple(order)

    def size(self) -> int:
        """Number of distinct configurations over active flags."""
        n = 1
        for f in self.active_flags:
            n *= len(f.values)
        return n

    # -- configurations ----------------------------------------------------

    def config(self, mapping: Mapping[str, Any]) -> Configuration:
        """Build a validated total configuration; pinned flags must agree."""
        items: list[tuple[str, Any]] = []
        for f in self.flags:
            pin = self.pinned.get(f.name)
            if f.name in self.pinned:
                if f.name in mapping and mapping[f.name] != pin:
                    raise SpaceError(f"flag {f.name!r} is pinned to {pin!r}")
                items.append((f.name, pin))
                continue
            if f.name not in mapping:
                raise SpaceError(f"missing assignment for flag {f.name!r}")
            value = mapping[f.name]
            if f.kind == NUMERIC:
                value = float(value)
            if value not in f.values:
                raise SpaceError(f"flag {f.name!r}: {value!r} not in domain")
            items.append((f.name, value))
        extra = set(mapping) - {f.name for f in self.flags}
        if extra:
            raise SpaceError(f"unknown flags {sorted(extra)}")
        return Configuration(tuple(items))

    def default_config(self) -> Configuration:
        return self.config({f.name: f.default for f in self.flags
                            if f.name not in self.pinned})

    def pin(self, config: Configuration) -> Configuration:
        """Overwrite pinned flags with their recorded values."""
        mapping = config.as_dict()
        mapping.update(self.pinned)
        return self.config({k: v for k, v in mapping.items() if k not in self.pinned})

    def project(self, assignment: Mapping[str, Any]) -> Configuration:
        """Map a foreign assignment onto this space.

        Missing flags get defaults, unknown flags are dropped, pinned flags
        are pinned.  Out-of-domain values fall back to the flag default.
        """
        mapping: dict[str, Any] = {}
        for f in self.flags:
            if f.name in self.pinned:
                continue
            value = assignment.get(f.name, f.default)
            if f.kind == NUMERIC and value is not None:
                try:
                    value = float(value)
                except (TypeError, ValueError):
                    value = f.default
            if value not in f.values:
                value = f.default
            mapping[f.name] = value
        return self.config(mapping)

    def exclude(self, pins: Mapping[str, Any]) -> "FlagSpace":
        """Return a space with additional flags pinned."""
        merged = dict(self.excluded)
        for name, value in pins.items():
            if name not in self.by_name:
                raise SpaceError(f"cannot pin unknown flag {name!r}")
            merged[name] = value
        return FlagSpace(self.flags, tuple(sorted(merged.items())))

    def key(self, config: Configuration) -> tuple:
        """Deterministic sort key (values in flag document order)."""
        return tuple(repr(config[f.name]) for f in self.flags)

    # -- encoding ------------------------------------------------------------

    def encode(self, config: Configuration) -> np.ndarray:
        """Deterministic latent embedding over active flags.

        Booleans map to -1/+1, numeric candidates affinely onto [-1, +1], and
        a k-level preset occupies k coordinates with +1 at the chosen level.
        """
        parts = [f.encode_value(config[f.name]) for f in self._encode_order]
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)

    def decode(self, vector: np.ndarray) -> Configuration:
        """Nearest legal configuration for a latent vector (inverse of encode)."""
        if len(vector) != self.encode_dim:
            raise SpaceError(f"expected {self.encode_dim} coordinates, got {len(vector)}")
        mapping: dict[str, Any] = {}
        offset = 0
        for f in self._encode_order:
            mapping[f.name] = f.decode_coords(np.asarray(vector[offset:offset + f.dim]))
            offset += f.dim
        return self.config(mapping)

    # -- neighborhoods -------------------------------------------------------

    def distance(self, a: Configuration, b: Configuration) -> int:
        """Hamming distance: number of active flags whose values differ."""
        return sum(1 for f in self.active_flags if a[f.name] != b[f.name])

    def hamming_neighbors(self, config: Configuration, radius: int) -> set[Configuration]:
        """All configurations within Hamming distance [1, radius] of ``config``.

        Pinned flags never vary.  Intended for enumerable balls; use
        ``sample_ball`` when the ball is large.
        """
        if radius < 0:
            raise SpaceError("radius must be nonnegative")
        out: set[Configuration] = set()
        flags = self.active_flags
        for d in range(1, min(radius, len(flags)) + 1):
            for combo in itertools.combinations(range(len(flags)), d):
                alt_sets = []
                for i in combo:
                    f = flags[i]
                    alt_sets.append([(f.name, v) for v in f.values if v != config[f.name]])
                for assignment in itertools.product(*alt_sets):
                    out.add(config.replace(**dict(assignment)))
        return out

    def ball_size(self, radius: int) -> int:
        """Exact count of configurations at Hamming distance in [1, radius]."""
        alts = [len(f.values) - 1 for f in self.active_flags]
        # e[d] = elementary symmetric polynomial of degree d over alternative counts
        e = [1] + [0] * len(alts)
        for a in alts:
            for d in range(len(alts), 0, -1):
                e[d] += a * e[d - 1]
        return sum(e[1:min(radius, len(alts)) + 1])

    def sample_ball(self, config: Configuration, radius: int, count: int,
                    seed: int) -> list[Configuration]:
        """Uniform sample (without replacement, best effort) from the Hamming ball.

        Exactly uniform over the ball via per-distance weights; duplicates are
        rejected up to a bounded number of retries.
        """
        flags = self.active_flags
        alts = [len(f.values) - 1 for f in flags]
        radius = min(radius, len(flags))
        # suffix[i][d]: symmetric weight of choosing d more flags from flags[i:]
        suffix = [[0] * (radius + 1) for _ in range(len(flags) + 1)]
        suffix[len(flags)][0] = 1
        for i in range(len(flags) - 1, -1, -1):
            for d in range(radius + 1):
                suffix[i][d] = suffix[i + 1][d]
                if d > 0:
                    suffix[i][d] += alts[i] * suffix[i + 1][d - 1]
        weights = np.array([suffix[0][d] for d in range(1, radius + 1)], dtype=float)
        if weights.sum() == 0:
            return []
        rng = np.random.default_rng(seed)
        seen: set[Configuration] = set()
        out: list[Configuration] = []
        attempts = 0
        while len(out) < count and attempts < 4 * count + 16:
            attempts += 1
            d = 1 + int(rng.choice(len(weights), p=weights / weights.sum()))
            changes: dict[str, Any] = {}
            remaining = d
            for i, f in enumerate(flags):
                if remaining == 0:
                    break
                total = suffix[i][remaining]
                take = alts[i] * suffix[i + 1][remaining - 1]
                if total > 0 and rng.random() < take / total:
                    options = [v for v in f.values if v != config[f.name]]
                    changes[f.name] = options[int(rng.integers(len(options)))]
                    remaining -= 1
            neighbor = config.replace(**changes)
            if neighbor not in seen:
                seen.add(neighbor)
                out.append(neighbor)
        return out

    def enumerate_all(self) -> Iterator[Configuration]:
        """Every configuration, in deterministic document order."""
        flags = self.active_flags
        for values in itertools.product(*(f.values for f in flags)):
            yield self.config(dict(zip((f.name for f in flags), values)))


@dataclass(frozen=True)
class SobolDesign:
    """Initial design; ``exhaustive`` marks a full enumeration fallback."""

    configs: tuple[Configuration, ...]
    exhaustive: bool = False

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configs)

    def __len__(self) -> int:
        return len(self.configs)

    def __getitem__(self, i: int) -> Configuration:
        return self.configs[i]


def sobol_init(space: FlagSpace, count: int, seed: int) -> SobolDesign:
    """Scrambled Sobol design of ``count`` distinct configurations.

    Each unit coordinate is rounded to a legal flag value (booleans at 0.5,
    numeric to the nearest candidate, presets by equal-width bins).  Rounding
    collisions are repaired with the nearest unused Hamming neighbor, scanning
    flags in document order.  If ``count`` exceeds the number of distinct
    configurations the full enumeration is returned, flagged ``exhaustive``.
    """
    if count <= 0:
        raise SpaceError("count must be positive")
    if count >= space.size():
        return SobolDesign(tuple(space.enumerate_all()), exhaustive=True)
    flags = space.active_flags
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # non power-of-two draws are fine here
        engine = qmc.Sobol(d=len(flags), scramble=True, seed=seed)
        unit = engine.random(count)
    used: set[Configuration] = set()
    out: list[Configuration] = []
    for row in unit:
        mapping: dict[str, Any] = {}
        for f, u in zip(flags, row):
            if f.kind == BOOLEAN:
                mapping[f.name] = bool(u >= 0.5)
            elif f.kind == NUMERIC:
                lo, hi = f.values[0], f.values[-1]
                v = lo + float(u) * (hi - lo)
                mapping[f.name] = min(f.values, key=lambda c: abs(c - v))
            else:
                k = len(f.values)
                mapping[f.name] = f.values[min(int(u * k), k - 1)]
        candidate = space.config(mapping)
        if candidate in used:
            candidate = _nearest_unused(space, candidate, used)
        used.add(candidate)
        out.append(candidate)
    return SobolDesign(tuple(out))


def _nearest_unused(space: FlagSpace, config: Configuration,
                    used: set[Configuration]) -> Configuration:
    flags = space.active_flags
    for radius in range(1, len(flags) + 1):
        for combo in itertools.combinations(range(len(flags)), radius):
            alt_sets = []
            for i in combo:
                f = flags[i]
                alt_sets.append([(f.name, v) for v in f.values if v != config[f.name]])
            for assignment in itertools.product(*alt_sets):
                neighbor = config.replace(**dict(assignment))
                if neighbor not in used:
                    return neighbor
    raise SpaceError("design exhausted the space")  # unreachable: count < size


def parse_space(document: str | Mapping[str, Any]) -> FlagSpace:
    """Parse a YAML/JSON space document into a FlagSpace.

    The document lists ``flags`` (name, kind, domain, warm_dependent,
    cost_weight, default) and a ``blocks`` mapping assigning every flag to
    exactly one named block.  Errors name the offending flag.
    """
    doc = yaml.safe_load(document) if isinstance(document, str) else document
    if not isinstance(doc, Mapping):
        raise SpaceError("space document must be a mapping")
    raw_flags = doc.get("flags")
    raw_blocks = doc.get("blocks")
    if not raw_flags:
        raise SpaceError("space document has no flags")
    if not raw_blocks:
        raise SpaceError("space document has no blocks")
    membership: dict[str, str] = {}
    for block, names in raw_blocks.items():
        for name in names:
            if name in membership:
                raise SpaceError(
                    f"flag {name!r} assigned to two blocks "
                    f"({membership[name]!r} and {block!r})")
            membership[name] = block
    flags: list[FlagDef] = []
    for entry in raw_flags:
        name = entry.get("name")
        if not name:
            raise SpaceError("flag entry without a name")
        if name not in membership:
            raise SpaceError(f"flag {name!r} assigned to zero blocks")
        kind = entry.get("kind", BOOLEAN)
        common = dict(
            block=membership[name],
            warm_dependent=bool(entry.get("warm_dependent", False)),
            cost_weight=float(entry.get("cost_weight", 0.0)),
        )
        if kind == BOOLEAN:
            flags.append(FlagDef.boolean(
                name, default=bool(entry.get("default", False)), **common))
        elif kind == NUMERIC:
            if "candidates" not in entry:
                raise SpaceError(f"flag {name!r}: numeric flag needs candidates")
            default = entry.get("default")
            flags.append(FlagDef.numeric(
                name, entry["candidates"],
                default=None if default is None else float(default), **common))
        elif kind == CATEGORICAL:
            if "levels" not in entry:
                raise SpaceError(f"flag {name!r}: categorical flag needs levels")
            flags.append(FlagDef.categorical(
                name, entry["levels"], default=entry.get("default"), **common))
        else:
            raise SpaceError(f"flag {name!r}: unknown kind {kind!r}")
    defined = {f.name for f in flags}
    for name in membership:
        if name not in defined:
            raise SpaceError(f"block member {name!r} is not a defined flag")
    return FlagSpace(tuple(flags))


def load_space(path: str) -> FlagSpace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_space(fh.read())

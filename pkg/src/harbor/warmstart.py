"""Cold-start correction for cross-session warm-up effects.

Observed pass rates under a partially warmed store mix the steady-state rate
with the cold baseline.  This module fits per-flag warm-up curves from
counter trajectories, inverts the mixture to recover the steady-state rate,
and propagates the extra uncertainty of that inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .space import BOOLEAN, Configuration, FlagSpace

W_MIN = 1e-6  # below this the mixture carries no usable evidence

_KAPPA_LO = 1e-6
_KAPPA_HI = 1e6


@dataclass(frozen=True)
class WarmupModel:
    """Per-flag warm-up fractions w_f(n) = 1 - exp(-n / kappa_f).

    Flags that never showed consumer activity are dead (w = 0 forever);
    non-warm-dependent flags are always fully warm (w = 1).
    """

    warm_flags: tuple[str, ...]
    kappas: Mapping[str, float]
    sigma2: Mapping[str, float]
    dead: tuple[str, ...] = ()
    default_kappa: float = 2.0
    default_sigma2: float = 0.01
    prior_floor: float = 0.25

    def warm_fraction_flag(self, flag: str, session_index: int) -> float:
        if flag not in self.warm_flags:
            return 1.0
        if flag in self.dead:
            return 0.0
        kappa = self.kappas.get(flag, self.default_kappa)
        return 1.0 - math.exp(-session_index / kappa)

    def sigma2_flag(self, flag: str) -> float:
        if flag not in self.warm_flags:
            return 0.0
        if flag in self.dead:
            return self.prior_floor
        return self.sigma2.get(flag, self.default_sigma2)


def fit_warm_curves(counter_logs: Mapping[str, Sequence[tuple[int, float]]],
                    warm_flags: Sequence[str], *, default_kappa: float = 2.0,
                    default_sigma2: float = 0.01,
                    prior_floor: float = 0.25) -> WarmupModel:
    """Fit per-flag warm-up curves from (session index, consumer counter) logs.

    Trajectories are normalized by their plateau (max observed value) and a
    single time constant is fit by least squares.  The per-flag variance is
    the residual variance of that fit.  Flags with no log keep the default
    time constant; all-zero trajectories mark the flag dead with maximal
    variance, pairing with silent-flag detection.
    """
    kappas: dict[str, float] = {}
    sigma2: dict[str, float] = {}
    dead: list[str] = []
    for flag in warm_flags:
        log = counter_logs.get(flag)
        if not log:
            continue
        pairs = sorted(log)
        sessions = np.array([n for n, _ in pairs], dtype=float)
        values = np.array([v for _, v in pairs], dtype=float)
        plateau = values.max()
        if plateau <= 0:
            dead.append(flag)
            sigma2[flag] = prior_floor
            continue
        y = values / plateau

        def ssr(kappa: float) -> float:
            return float(np.sum((y - (1.0 - np.exp(-sessions / kappa))) ** 2))

        result = minimize_scalar(ssr, bounds=(_KAPPA_LO, _KAPPA_HI), method="bounded")
        kappas[flag] = float(result.x)
        dof = max(1, len(y) - 1)
        sigma2[flag] = float(result.fun) / dof
    return WarmupModel(
        warm_flags=tuple(warm_flags), kappas=kappas, sigma2=sigma2,
        dead=tuple(dead), default_kappa=default_kappa,
        default_sigma2=default_sigma2, prior_floor=prior_floor)


def enabled_warm_flags(config: Configuration, space: FlagSpace) -> list[str]:
    return [f.name for f in space.active_flags
            if f.warm_dependent and f.is_enabled(config[f.name])]


def warm_fraction(config: Configuration, session_index: int, model: WarmupModel,
                  space: FlagSpace) -> tuple[float, str | None]:
    """Config-level warm fraction: the minimum over enabled warm flags.

    The whole mixture is only as warmed as its coldest enabled store.
    Returns the fraction and the limiting flag (None when no warm flag is
    enabled, in which case w = 1).
    """
    enabled = enabled_warm_flags(config, space)
    if not enabled:
        return 1.0, None
    limiting = min(enabled,
                   key=lambda f: (model.warm_fraction_flag(f, session_index), f))
    return model.warm_fraction_flag(limiting, session_index), limiting


def observation_variance(p_obs: float, m: int) -> float:
    """Binomial variance of the observed rate, floored at degenerate rates."""
    if p_obs <= 0.0 or p_obs >= 1.0:
        return 1.0 / (2 * m)
    return p_obs * (1.0 - p_obs) / m


def invert_warm(p_obs: float, p_base: float, w: float) -> tuple[float, bool]:
    """Invert the warm mixture to the steady-state rate.

    Solves p_obs = w * p_inf + (1 - w) * p_base for p_inf, clipping into
    [0, 1]; the flag reports whether clipping occurred.  Fractions at or
    below W_MIN carry no evidence and return the observation unchanged.
    """
    if w <= W_MIN:
        return p_obs, False
    raw = (p_obs - (1.0 - w) * p_base) / w
    clipped = raw < 0.0 or raw > 1.0
    return min(1.0, max(0.0, raw)), clipped


def corrected_variance(sigma2_obs: float, sigma2_base: float, sigma2_w: float,
                       p_obs: float, p_base: float, w: float,
                       clipped: bool = False, *,
                       prior_floor: float = 0.25) -> tuple[float, bool]:
    """First-order variance of the inverted rate.

    Propagates the three independent noise sources through the inversion.
    When the inversion clipped, the observation term is replaced by its
    worst-case Bernoulli value 1/(4 w^2); the base and warm-up terms are
    kept.  Fractions at or below W_MIN floor the variance at the prior.
    Returns (variance, uninformative).
    """
    if w <= W_MIN:
        return prior_floor, True
    obs_term = (0.25 / (w * w)) if clipped else sigma2_obs / (w * w)
    base_term = (1.0 - w) ** 2 * sigma2_base / (w * w)
    warm_term = (p_obs - p_base) ** 2 * sigma2_w / (w ** 4)
    return obs_term + base_term + warm_term, False


def apply_correction(record, model: WarmupModel, space: FlagSpace,
                     p_base: float, sigma2_base: float):
    """Return a copy of the record with corrected target and variance filled.

    Uses the record's own session index and the minimum-rule warm fraction;
    uninformative records keep the prior-floor variance and are flagged so
    downstream fits can skip them.
    """
    w, limiting = warm_fraction(record.config, record.session_index, model, space)
    sigma2_obs = observation_variance(record.raw_pass_rate, record.fidelity)
    sigma2_w = model.sigma2_flag(limiting) if limiting is not None else 0.0
    target, clipped = invert_warm(record.raw_pass_rate, p_base, w)
    variance, uninformative = corrected_variance(
        sigma2_obs, sigma2_base, sigma2_w, record.raw_pass_rate, p_base, w,
        clipped, prior_floor=model.prior_floor)
    return replace(record, corrected_target=target, corrected_variance=variance,
                   clipped=clipped, uninformative=uninformative)


def counter_logs_from_history(history: Sequence, space: FlagSpace,
                              ) -> dict[str, list[tuple[int, float]]]:
    """Collect per-flag (session index, per-task consumer counter) trajectories.

    Counter totals are normalized by fidelity so records at different subset
    sizes land on one curve.
    """
    logs: dict[str, list[tuple[int, float]]] = {}
    for record in history:
        for flag in enabled_warm_flags(record.config, space):
            value = record.counters.consumer_total(flag) / record.fidelity
            logs.setdefault(flag, []).append((record.session_index, value))
    for log in logs.values():
        log.sort()
    return logs

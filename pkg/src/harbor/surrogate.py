"""Block-additive surrogate over encoded configurations.

The kernel is a sum of per-block similarities plus one shared cross-block
product term; block scales are read off a weighted ridge fit in the explicit
feature space, then predictions come from the Gaussian posterior under the
fitted kernel and the per-record noise variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .space import Configuration, FlagSpace

_SCALE_FLOOR = 1e-8  # keeps prior variance positive when a fit collapses to zero


def _block_features(space: FlagSpace, configs: Sequence[Configuration]) -> np.ndarray:
    """Per-block unit-norm features: each coordinate x becomes (x, sqrt(1-x^2)).

    The companion coordinate is zero for -1/+1 encodes and only carries the
    in-between numeric candidates, so every block has exact unit
    self-similarity and block kernels stay inner products.
    """
    if not configs:
        return np.zeros((0, 2 * space.encode_dim))
    latents = np.stack([space.encode(c) for c in configs])
    comp = np.sqrt(np.clip(1.0 - latents ** 2, 0.0, None))
    out = np.zeros((len(configs), 2 * space.encode_dim))
    for block, sl in space.block_slices.items():
        width = sl.stop - sl.start
        scale = 1.0 / math.sqrt(width)
        out[:, 2 * sl.start: 2 * sl.start + width] = latents[:, sl] * scale
        out[:, 2 * sl.start + width: 2 * sl.stop] = comp[:, sl] * scale
    return out


def _feature_slices(space: FlagSpace) -> dict[str, slice]:
    return {block: slice(2 * sl.start, 2 * sl.stop)
            for block, sl in space.block_slices.items()}


def _block_kernels(space: FlagSpace, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack of per-block kernel matrices, shape (L, len(a), len(b))."""
    slices = _feature_slices(space)
    return np.stack([a[:, sl] @ b[:, sl].T for sl in slices.values()])


def _combine(blocks: np.ndarray, scales: np.ndarray, alpha_cross_sq: float) -> np.ndarray:
    total = np.tensordot(scales, blocks, axes=1)
    if len(scales) > 1:
        sum_k = blocks.sum(axis=0)
        sum_k2 = (blocks ** 2).sum(axis=0)
        total = total + alpha_cross_sq * 0.5 * (sum_k * sum_k - sum_k2)
    return total


def kernel(a: Configuration, b: Configuration, space: FlagSpace,
           scales: Mapping[str, float], alpha_cross_sq: float = 0.0) -> float:
    """Covariance between two configurations under given block scales."""
    fa = _block_features(space, [a])
    fb = _block_features(space, [b])
    blocks = _block_kernels(space, fa, fb)
    ordered = np.array([scales.get(name, 0.0) for name in space.blocks])
    return float(_combine(blocks, ordered, alpha_cross_sq)[0, 0])


def gram(space: FlagSpace, configs: Sequence[Configuration],
         scales: Mapping[str, float], alpha_cross_sq: float = 0.0) -> np.ndarray:
    feats = _block_features(space, configs)
    blocks = _block_kernels(space, feats, feats)
    ordered = np.array([scales.get(name, 0.0) for name in space.blocks])
    return _combine(blocks, ordered, alpha_cross_sq)


def prior_variance(space: FlagSpace, scales: Mapping[str, float],
                   alpha_cross_sq: float) -> float:
    """Kernel variance at any point: block kernels have unit self-similarity."""
    n_blocks = len(space.blocks)
    return (sum(scales.get(b, 0.0) for b in space.blocks)
            + alpha_cross_sq * n_blocks * (n_blocks - 1) / 2.0)


@dataclass(eq=False)
class Surrogate:
    """Fitted posterior over corrected pass rates."""

    space: FlagSpace
    scales: dict[str, float]
    alpha_cross_sq: float
    prior_mean: float
    lambda_main: float
    lambda_cross: float
    train_configs: tuple[Configuration, ...]
    noise: np.ndarray
    _features: np.ndarray = field(repr=False)
    _chol: tuple = field(repr=False)
    _weights: np.ndarray = field(repr=False)
    _scale_vector: np.ndarray = field(repr=False)

    def predict(self, config: Configuration) -> tuple[float, float]:
        mu, sigma = self.predict_many([config])
        return float(mu[0]), float(sigma[0])

    def predict_many(self, configs: Sequence[Configuration],
                     ) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at each configuration.

        Means are not clamped to [0, 1]; acquisition needs the raw posterior
        and reporting clamps at the edge of the system.
        """
        feats = _block_features(self.space, configs)
        blocks = _block_kernels(self.space, feats, self._features)
        cross = _combine(blocks, self._scale_vector, self.alpha_cross_sq)
        mu = self.prior_mean + cross @ self._weights
        kcc = prior_variance(self.space, self.scales, self.alpha_cross_sq)
        solved = cho_solve(self._chol, cross.T)
        var = np.clip(kcc - np.einsum("ij,ji->i", cross, solved), 1e-18, None)
        return mu, np.sqrt(var)

    @property
    def prior_sigma(self) -> float:
        return math.sqrt(prior_variance(self.space, self.scales, self.alpha_cross_sq))


def _training_data(history: Sequence, space: FlagSpace):
    from .warmstart import observation_variance  # fallback for raw records

    configs, targets, noise = [], [], []
    for record in history:
        if getattr(record, "uninformative", False):
            continue
        target = record.corrected_target
        variance = record.corrected_variance
        if target is None:
            target = record.raw_pass_rate
            variance = observation_variance(record.raw_pass_rate, record.fidelity)
        configs.append(space.pin(record.config))
        targets.append(float(target))
        noise.append(max(float(variance), 1e-12))
    return configs, np.array(targets), np.array(noise)


def fit(history: Sequence, space: FlagSpace, *, lambda_main: float = 1e-2,
        lambda_cross: float = 10.0, prior_mean: float | None = None) -> Surrogate:
    """Fit block scales and posterior state from informative records.

    Records are weighted by inverse corrected variance.  Block scales are the
    summed squared ridge weights of each block's feature group; the single
    cross scale aggregates all pairwise product features, penalized
    ``lambda_cross / lambda_main`` times harder so interaction evidence must
    earn its way in.
    """
    configs, targets, noise = _training_data(history, space)
    if not configs:
        raise ValueError("no informative records to fit")
    if prior_mean is None:
        weights = 1.0 / noise
        prior_mean = float(np.sum(weights * targets) / np.sum(weights))

    main = _block_features(space, configs)
    slices = _feature_slices(space)
    block_names = list(space.blocks)
    pairs = [(i, j) for i in range(len(block_names)) for j in range(i + 1, len(block_names))]
    cross_parts = [
        (main[:, slices[block_names[i]]][:, :, None]
         * main[:, slices[block_names[j]]][:, None, :]).reshape(len(configs), -1)
        for i, j in pairs]
    cross = np.concatenate(cross_parts, axis=1) if cross_parts else np.zeros((len(configs), 0))

    phi = np.concatenate([main, cross], axis=1)
    penalties = np.concatenate([
        np.full(main.shape[1], lambda_main),
        np.full(cross.shape[1], lambda_cross)])
    w = 1.0 / noise
    centered = targets - prior_mean
    normal = phi.T @ (phi * w[:, None]) + np.diag(penalties)
    beta = np.linalg.solve(normal, phi.T @ (w * centered))

    scales = {name: float(np.sum(beta[slices[name]] ** 2)) for name in block_names}
    alpha_cross_sq = float(np.sum(beta[main.shape[1]:] ** 2))
    if prior_variance(space, scales, alpha_cross_sq) < _SCALE_FLOOR:
        scales = {name: _SCALE_FLOOR for name in block_names}

    scale_vector = np.array([scales[name] for name in block_names])
    blocks = _block_kernels(space, main, main)
    cov = _combine(blocks, scale_vector, alpha_cross_sq) + np.diag(noise)
    chol = cho_factor(cov, lower=True)
    weights_vec = cho_solve(chol, centered)

    return Surrogate(
        space=space, scales=scales, alpha_cross_sq=alpha_cross_sq,
        prior_mean=prior_mean, lambda_main=lambda_main, lambda_cross=lambda_cross,
        train_configs=tuple(configs), noise=noise, _features=main,
        _chol=chol, _weights=weights_vec, _scale_vector=scale_vector)


@dataclass(frozen=True)
class AnovaEntry:
    name: str
    raw: float
    normalized: float


def block_anova(s: Surrogate) -> tuple[AnovaEntry, ...]:
    """Variance attribution: blocks sorted descending, cross term last."""
    total = sum(s.scales.values()) + s.alpha_cross_sq
    entries = [
        AnovaEntry(name, raw, raw / total if total > 0 else 0.0)
        for name, raw in sorted(s.scales.items(), key=lambda kv: (-kv[1], kv[0]))]
    if len(s.scales) > 1:
        entries.append(AnovaEntry(
            "cross", s.alpha_cross_sq,
            s.alpha_cross_sq / total if total > 0 else 0.0))
    return tuple(entries)


@dataclass(eq=False)
class CostModel:
    """Linear per-task cost over the latent encoding, floored at zero."""

    space: FlagSpace
    intercept: float
    coefficients: np.ndarray
    residual_std: float

    def predict(self, config: Configuration) -> float:
        return float(self.predict_many([config])[0])

    def predict_many(self, configs: Sequence[Configuration]) -> np.ndarray:
        if not configs:
            return np.zeros(0)
        latents = np.stack([self.space.encode(self.space.pin(c)) for c in configs])
        return np.clip(self.intercept + latents @ self.coefficients, 0.0, None)


def fit_cost_model(history: Sequence, space: FlagSpace) -> CostModel:
    """Ridge fit of mean per-task cost on the encoding; intercept-only when
    the history is degenerate."""
    records = [r for r in history]
    if not records:
        raise ValueError("no records to fit a cost model")
    configs = [space.pin(r.config) for r in records]
    costs = np.array([r.total_cost / r.fidelity for r in records])
    if len(records) < 2 or space.encode_dim == 0:
        return CostModel(space, float(costs.mean()), np.zeros(space.encode_dim),
                         float(costs.std()))
    latents = np.stack([space.encode(c) for c in configs])
    centered = latents - latents.mean(axis=0)
    if not np.any(np.abs(centered) > 1e-12):
        return CostModel(space, float(costs.mean()), np.zeros(space.encode_dim),
                         float(costs.std()))
    ridge = 1e-8 * len(records)
    normal = centered.T @ centered + ridge * np.eye(latents.shape[1])
    coef = np.linalg.solve(normal, centered.T @ (costs - costs.mean()))
    intercept = float(costs.mean() - latents.mean(axis=0) @ coef)
    residuals = costs - (intercept + latents @ coef)
    return CostModel(space, intercept, coef, float(np.sqrt(np.mean(residuals ** 2))))

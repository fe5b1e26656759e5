import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harbor.acquisition import (
    EMPTY_POOL,
    INFEASIBLE,
    OK,
    BatchProposal,
    FrontPoint,
    ParetoFront,
    dominates,
    ehvi,
    hypervolume,
    hypervolume_gain,
    safety_filter,
    select_batch,
)
from harbor.trustregion import TrustRegion

from .conftest import bool_space, mixed_space


class FakeSurrogate:
    """Deterministic stand-in exposing just the posterior interface."""

    def __init__(self, space, mu_fn, sigma_fn=None):
        self.space = space
        self._mu = mu_fn
        self._sigma = sigma_fn or (lambda c: 0.0)

    def predict(self, config):
        return float(self._mu(config)), float(self._sigma(config))

    def predict_many(self, configs):
        return (np.array([self._mu(c) for c in configs], dtype=float),
                np.array([self._sigma(c) for c in configs], dtype=float))


class FakeCostModel:
    def __init__(self, cost_fn=lambda c: 1.0, residual_std=0.0):
        self._cost = cost_fn
        self.residual_std = residual_std

    def predict(self, config):
        return float(self._cost(config))

    def predict_many(self, configs):
        return np.array([self._cost(c) for c in configs], dtype=float)


# ----------------------------------------------------------------- dominance


def test_dominates_basics():
    assert dominates((0.8, 1.0), (0.7, 1.5))
    assert dominates((0.8, 1.0), (0.8, 1.5))
    assert not dominates((0.8, 1.0), (0.8, 1.0))
    assert not dominates((0.9, 2.0), (0.7, 1.0))


def test_front_keeps_only_nondominated():
    pts = [FrontPoint(0.5, 1.0), FrontPoint(0.4, 1.5), FrontPoint(0.7, 2.0),
           FrontPoint(0.7, 2.5)]
    front = ParetoFront.from_points(pts, None, 0.0, 3.0)
    kept = [(p.mu, p.cost) for p in front.points]
    assert kept == [(0.5, 1.0), (0.7, 2.0)]


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 3)), max_size=12))
@settings(max_examples=100)
def test_front_matches_bruteforce_dominance(raw):
    pts = [FrontPoint(mu, cost) for mu, cost in raw]
    front = ParetoFront.from_points(pts, None, 0.0, 5.0)
    kept = [(p.mu, p.cost) for p in front.points]
    # no kept point dominates another
    for a in kept:
        for b in kept:
            assert not dominates(a, b)
    # every input point is weakly covered by something kept
    for mu, cost in raw:
        assert any(k == (mu, cost) or dominates(k, (mu, cost)) for k in kept)


# --------------------------------------------------------------- hypervolume


def test_hypervolume_rectangles():
    assert hypervolume([(0.5, 1.0)], 0.0, 2.0) == pytest.approx(0.5)
    assert hypervolume([(0.3, 0.5), (0.6, 1.2)], 0.0, 2.0) == pytest.approx(0.69)


def test_hypervolume_ignores_dominated_and_out_of_box():
    base = hypervolume([(0.6, 1.0)], 0.0, 2.0)
    assert hypervolume([(0.6, 1.0), (0.5, 1.5)], 0.0, 2.0) == pytest.approx(base)
    assert hypervolume([(0.6, 1.0), (-0.1, 0.5), (0.9, 2.5)], 0.0, 2.0) == \
        pytest.approx(base)
    assert hypervolume([], 0.0, 2.0) == 0.0


@given(
    st.lists(st.tuples(st.floats(0, 1), st.floats(0, 2)), max_size=8),
    st.tuples(st.floats(-0.5, 1.2), st.floats(0, 2.5)),
)
@settings(max_examples=200)
def test_gain_equals_hypervolume_difference(raw, point):
    front = ParetoFront.from_points(
        [FrontPoint(mu, cost) for mu, cost in raw], None, 0.0, 2.0)
    mu, cost = point
    direct = (hypervolume([(p.mu, p.cost) for p in front.points] + [(mu, cost)],
                          0.0, 2.0)
              - front.hypervolume())
    via_strips = float(hypervolume_gain(front, np.array(mu), np.array(cost)))
    assert via_strips == pytest.approx(direct, abs=1e-10)


def test_gain_vectorizes():
    front = ParetoFront.from_points(
        [FrontPoint(0.4, 0.8), FrontPoint(0.7, 1.5)], None, 0.0, 2.0)
    mus = np.array([[0.2, 0.9], [0.5, 0.0]])
    costs = np.array([[0.5, 0.1], [3.0, 0.2]])
    gains = hypervolume_gain(front, mus, costs)
    assert gains.shape == (2, 2)
    for i in range(2):
        for j in range(2):
            one = float(hypervolume_gain(front, np.array(mus[i, j]),
                                         np.array(costs[i, j])))
            assert gains[i, j] == pytest.approx(one)


# ---------------------------------------------------------------------- ehvi


def one_flag_space():
    return bool_space(1)


def test_ehvi_point_mass_arithmetic():
    space = one_flag_space()
    cfg = space.default_config()
    s = FakeSurrogate(space, lambda c: 0.7, lambda c: 0.0)
    cm = FakeCostModel(lambda c: 0.9)
    front = ParetoFront(None, (FrontPoint(0.5, 1.0),), 0.0, 2.0)
    # strips: (0, 0.5] covered to 1.0, (0.5, inf) covered to 2.0
    expected = 0.5 * (1.0 - 0.9) + 0.2 * (2.0 - 0.9)
    assert ehvi(cfg, s, cm, front, samples=16, seed=1) == pytest.approx(expected)


def test_ehvi_dominated_point_mass_is_zero():
    space = one_flag_space()
    cfg = space.default_config()
    s = FakeSurrogate(space, lambda c: 0.4)
    cm = FakeCostModel(lambda c: 1.5)
    front = ParetoFront(None, (FrontPoint(0.5, 1.0),), 0.0, 2.0)
    assert ehvi(cfg, s, cm, front, samples=16, seed=1) == 0.0


def test_ehvi_scales_costs_by_front_fidelity():
    space = one_flag_space()
    cfg = space.default_config()
    s = FakeSurrogate(space, lambda c: 0.7)
    cm = FakeCostModel(lambda c: 0.9)
    per_task = ParetoFront(None, (FrontPoint(0.5, 1.0),), 0.0, 2.0)
    total_m4 = ParetoFront(4, (FrontPoint(0.5, 4.0),), 0.0, 8.0)
    a = ehvi(cfg, s, cm, per_task, samples=8, seed=3)
    b = ehvi(cfg, s, cm, total_m4, samples=8, seed=3)
    assert b == pytest.approx(4 * a)


def test_ehvi_shrinks_as_front_grows():
    space = one_flag_space()
    cfg = space.default_config()
    s = FakeSurrogate(space, lambda c: 0.6, lambda c: 0.2)
    cm = FakeCostModel(lambda c: 1.0, residual_std=0.1)
    small = ParetoFront(None, (FrontPoint(0.4, 1.2),), 0.0, 3.0)
    grown = ParetoFront(None, (FrontPoint(0.4, 1.2), FrontPoint(0.65, 1.6)),
                        0.0, 3.0)
    assert ehvi(cfg, s, cm, grown, samples=512, seed=7) <= \
        ehvi(cfg, s, cm, small, samples=512, seed=7)


# ------------------------------------------------------------- safety filter


def test_safety_filter_lcb_rule():
    space = bool_space(2)
    cfgs = list(space.enumerate_all())
    mus = {cfgs[0]: 0.50, cfgs[1]: 0.60, cfgs[2]: 0.449, cfgs[3]: 0.45}
    sigmas = {cfgs[0]: 0.02, cfgs[1]: 0.15, cfgs[2]: 0.0, cfgs[3]: 0.0}
    s = FakeSurrogate(space, mus.__getitem__, sigmas.__getitem__)
    kept = safety_filter(cfgs, s, r0=0.5, delta=0.05, eta=0.1)
    # z(0.9) = 1.2816: LCBs are 0.474, 0.408, 0.449, 0.450
    assert kept == [cfgs[0], cfgs[3]]


def test_safety_filter_boundary_inclusive():
    space = bool_space(1)
    cfgs = list(space.enumerate_all())
    s = FakeSurrogate(space, lambda c: 0.45, lambda c: 0.0)
    assert safety_filter(cfgs, s, r0=0.5, delta=0.05, eta=0.2) == cfgs


def test_safety_filter_preserves_order_and_set():
    space = bool_space(3)
    cfgs = list(space.enumerate_all())
    rng = np.random.default_rng(1)
    mus = {c: float(rng.uniform(0.3, 0.7)) for c in cfgs}
    s = FakeSurrogate(space, mus.__getitem__, lambda c: 0.05)
    kept = safety_filter(cfgs, s, r0=0.5, delta=0.1, eta=0.1)
    flipped = safety_filter(cfgs[::-1], s, r0=0.5, delta=0.1, eta=0.1)
    assert set(kept) == set(flipped)
    assert kept == [c for c in cfgs if c in set(kept)]


def test_safety_filter_empty_input():
    space = bool_space(1)
    s = FakeSurrogate(space, lambda c: 1.0)
    assert safety_filter([], s, 0.5, 0.05, 0.1) == []


# -------------------------------------------------------------- select_batch


def region_at(center, radius=2):
    return TrustRegion(center=center, radius=radius, name="r0")


def test_select_batch_dead_region_rejected():
    space = bool_space(2)
    s = FakeSurrogate(space, lambda c: 0.5)
    dead = TrustRegion(center=space.default_config(), radius=1, alive=False)
    with pytest.raises(ValueError):
        select_batch(dead, s, FakeCostModel(), {}, [2], 1, r0=0.5, delta=0.1,
                     eta=0.1)


def test_select_batch_empty_pool_signal():
    space = bool_space(3)
    s = FakeSurrogate(space, lambda c: 0.0, lambda c: 0.0)
    prop = select_batch(region_at(space.default_config()), s, FakeCostModel(),
                        {}, [4], 2, r0=0.9, delta=0.0, eta=0.1)
    assert prop.status == EMPTY_POOL
    assert prop.configs == ()


def test_select_batch_point_mass_matches_bruteforce_argmax():
    space = bool_space(4)
    center = space.default_config()
    rng = np.random.default_rng(8)
    mus = {c: float(rng.uniform(0.4, 0.9)) for c in space.enumerate_all()}
    costs = {c: float(rng.uniform(0.5, 1.5)) for c in space.enumerate_all()}
    s = FakeSurrogate(space, mus.__getitem__)
    cm = FakeCostModel(costs.__getitem__)
    m = 4
    front = ParetoFront(m, (FrontPoint(0.5, m * 1.0),), 0.0, m * 3.0)
    prop = select_batch(region_at(center, radius=2), s, cm, {m: front}, [m],
                        1, r0=0.0, delta=0.0, eta=0.1, seed=5)
    pool = sorted(space.hamming_neighbors(center, 2), key=space.key)
    scores = [
        float(hypervolume_gain(front, np.array(mus[c]), np.array(m * costs[c])))
        / (m * costs[c])
        for c in pool
    ]
    assert prop.status == OK
    assert prop.fidelity == m
    assert prop.configs == (pool[int(np.argmax(scores))],)


def test_select_batch_prefers_cheapest_fidelity_on_ties():
    space = bool_space(3)
    s = FakeSurrogate(space, lambda c: 0.6)
    prop = select_batch(region_at(space.default_config()), s, FakeCostModel(),
                        {}, [4, 8, 16], 2, r0=0.0, delta=0.0, eta=0.1)
    # the default front box scales linearly with m, so ratios tie exactly
    assert prop.status == OK
    assert prop.fidelity == 4


def test_select_batch_diversity_discount():
    space = bool_space(3, blocks=3)
    X = space.default_config()
    a = X.replace(f0=True)
    ab = X.replace(f0=True, f1=True)
    c = X.replace(f2=True)
    mus = {cfg: 0.05 for cfg in space.enumerate_all()}
    mus[a] = 0.9
    mus[ab] = 0.8   # distance 1 from the first pick
    mus[c] = 0.8    # distance 2 from the first pick
    s = FakeSurrogate(space, mus.__getitem__)
    prop = select_batch(region_at(X, radius=2), s, FakeCostModel(), {}, [2],
                        2, r0=0.0, delta=0.0, eta=0.1, d_div=2)
    assert prop.configs == (a, c)


def test_select_batch_trims_to_budget_then_infeasible():
    space = bool_space(2)
    s = FakeSurrogate(space, lambda c: 0.7)
    cm = FakeCostModel(lambda c: 1.0)
    region = region_at(space.default_config(), radius=1)
    full = select_batch(region, s, cm, {}, [4], 2, r0=0.0, delta=0.0, eta=0.1,
                        remaining_budget=100.0)
    assert len(full.configs) == 2
    assert full.predicted_cost == pytest.approx(8.0)
    trimmed = select_batch(region, s, cm, {}, [4], 2, r0=0.0, delta=0.0,
                           eta=0.1, remaining_budget=5.0)
    assert trimmed.status == OK
    assert len(trimmed.configs) == 1
    broke = select_batch(region, s, cm, {}, [4], 2, r0=0.0, delta=0.0,
                         eta=0.1, remaining_budget=0.5)
    assert broke.status == INFEASIBLE
    assert broke.configs == ()


def test_select_batch_falls_back_to_cheaper_fidelity():
    space = bool_space(2)
    s = FakeSurrogate(space, lambda c: 0.7)
    cm = FakeCostModel(lambda c: 1.0)
    # the m=2 front box is closed (tiny cost_ref) so m=8 wins the score...
    fronts = {2: ParetoFront(2, (), 0.0, 0.5)}
    prop = select_batch(region_at(space.default_config(), radius=1), s, cm,
                        fronts, [2, 8], 1, r0=0.0, delta=0.0, eta=0.1,
                        remaining_budget=3.0)
    # ...but only m=2 fits the remaining budget
    assert prop.status == OK
    assert prop.fidelity == 2


def test_select_batch_deterministic_and_inside_region():
    space = mixed_space()
    sub = space.exclude({"mode": "exact"})
    center = sub.default_config()
    rng = np.random.default_rng(0)
    s = FakeSurrogate(sub, lambda c: 0.6, lambda c: 0.05)
    cm = FakeCostModel(lambda c: 1.0, residual_std=0.02)
    a = select_batch(region_at(center, radius=2), s, cm, {}, [4], 3,
                     r0=0.5, delta=0.1, eta=0.2, seed=11)
    b = select_batch(region_at(center, radius=2), s, cm, {}, [4], 3,
                     r0=0.5, delta=0.1, eta=0.2, seed=11)
    assert a == b
    for cfg in a.configs:
        assert cfg["mode"] == "exact"  # pins survive
        assert 1 <= sub.distance(center, cfg) <= 2

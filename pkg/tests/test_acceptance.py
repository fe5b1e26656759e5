"""End-to-end acceptance checks for the whole engine.

Each test pins one externally observable guarantee with fixed tolerances:
front recovery on a fully enumerable space, safety of the evaluation
stream, warm-up inversion calibration, kernel validity, silent-flag
retirement, trust-region reaction to deceptive structure, interval
agreement with direct root finding, budget accounting, the sampled
hypervolume-gain estimator against a closed form, interaction detection,
and bit-level replay determinism.

Run with ``pytest -v`` for one verdict line per criterion; add ``-s`` to
see the measured numbers behind each verdict.  These tests drive full
optimization runs, so the module takes a few minutes.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from harbor.acquisition import FrontPoint, ParetoFront, ehvi
from harbor.bruteforce import enumerate_truth, score_front, true_baseline
from harbor.driver import RunConfig, run, wilson_interval
from harbor.evaluator import SimSpec, SimulatorAdapter, baseline_config
from harbor.space import Configuration, FlagDef, FlagSpace
from harbor.surrogate import fit, gram
from harbor.warmstart import corrected_variance, invert_warm

from .conftest import make_record

# ------------------------------------------------------------------ fixtures
#
# The reference workload: eight boolean flags over three blocks, 256 total
# configurations, one real pairwise interaction, two warm-up-dependent
# flags, and premium-priced flags so the true safe front has several cost
# tiers.  Small enough to brute-force, rich enough to exercise every
# subsystem at once.


def eight_flag_space() -> FlagSpace:
    blocks = {"f0": "ingest", "f1": "ingest", "f2": "ingest",
              "f3": "exec", "f4": "exec", "f5": "exec",
              "f6": "report", "f7": "report"}
    weights = {"f0": 0.25, "f1": 0.0, "f2": -0.125, "f3": 0.5,
               "f4": 0.0, "f5": 0.25, "f6": 0.0, "f7": 0.125}
    warm = {"f0", "f5"}
    return FlagSpace(flags=tuple(
        FlagDef(n, "boolean", (False, True), blocks[n],
                warm_dependent=(n in warm), cost_weight=weights[n])
        for n in sorted(blocks)))


def eight_flag_sim(space: FlagSpace, **overrides) -> SimSpec:
    kwargs = dict(
        space=space,
        tasks=tuple(f"task-{i:03d}" for i in range(16)),
        base_logits=tuple(0.3 for _ in range(16)),
        linear={"f0": (0.5,), "f1": (0.35,), "f2": (-0.3,), "f3": (0.45,),
                "f4": (-0.25,), "f5": (0.3,), "f6": (0.2,), "f7": (-0.4,)},
        couplings=(("f0", "f3", 0.45),),
        warm_kappa={"f0": 2.0, "f5": 3.0},
        cost_overheads={"f3": 0.5, "f5": 0.25},
        cost_noise=0.0,
        seed=29,
    )
    kwargs.update(overrides)
    return SimSpec(**kwargs)


def search_config(seed: int, **overrides) -> RunConfig:
    """The pinned search settings used by the end-to-end criteria."""
    kwargs = dict(budget_search=40.0, budget_deploy=1.6, delta=0.1, eta=0.2,
                  fidelities=(8, 16), sobol_count=16, batch_size=2,
                  region_count=3, lambda_cross=50.0, seed=seed)
    kwargs.update(overrides)
    return RunConfig(**kwargs)


# ------------------------------------------------- 1: front recovery quality


def test_criterion_01_recovers_true_safe_front():
    """On the 256-config space, ten seeded runs at 40 units each must land
    within 90% of the true safe front's hypervolume on at least 8 seeds,
    each run under 60 seconds wall clock."""
    space = eight_flag_space()
    sim = eight_flag_sim(space)
    assert len(enumerate_truth(sim)) == 256
    r0, _ = true_baseline(sim, baseline_config(space))
    successes = 0
    for seed in range(10):
        started = time.monotonic()
        rr = run(search_config(seed), space, SimulatorAdapter(sim))
        elapsed = time.monotonic() - started
        assert elapsed < 60.0
        assert rr.total_units <= 40.0 + 1e-9
        found = [(e.config, e.mean, e.cost) for e in rr.front]
        _, _, ratio = score_front(found, sim, r0=r0, delta=0.1,
                                  deploy_budget=1.6)
        print(f"seed {seed}: hv ratio {ratio:.3f} "
              f"units {rr.total_units:.1f} elapsed {elapsed:.1f}s")
        successes += ratio >= 0.90
    print(f"criterion 1: {successes}/10 seeds at >= 0.90")
    assert successes >= 8


# ------------------------------------------------ 2: safe evaluation stream


def test_criterion_02_search_rarely_evaluates_truly_unsafe_configs():
    """Across 50 seeded runs, at most eta + 0.05 of the distinct
    configurations evaluated during the search phase may be truly unsafe
    (long-run rate below baseline - delta)."""
    space = eight_flag_space()
    sim = eight_flag_sim(space)
    truth = {o.config: o.pass_rate for o in enumerate_truth(sim)}
    r0, _ = true_baseline(sim, baseline_config(space))
    bound = r0 - 0.1
    unsafe = total = 0
    for seed in range(100, 150):
        rr = run(search_config(seed, budget_search=18.0), space,
                 SimulatorAdapter(sim))
        seen: set[Configuration] = set()
        for rec in rr.history:
            if rec.source != "live" or rec.phase != "search":
                continue
            cfg = space.pin(rec.config)
            if cfg in seen:
                continue
            seen.add(cfg)
            total += 1
            unsafe += truth[cfg] < bound
    frac = unsafe / total
    print(f"criterion 2: {unsafe}/{total} truly unsafe -> {frac:.4f} "
          f"(limit 0.25)")
    assert total > 100
    assert frac <= 0.2 + 0.05


# ------------------------------------------- 3: warm-up inversion calibration


def test_criterion_03_warm_inversion_is_calibrated():
    """Feeding the inversion data drawn exactly from its assumed mixture:
    the estimator must be unbiased to within two standard errors whenever
    the warm fraction is at least 0.3, and its propagated variance must
    match Monte Carlo within 15% on unclipped samples."""
    rng = np.random.default_rng(97)
    p_inf, p_base, kappa, m, reps = 0.8, 0.5, 3.0, 200, 1000
    checked = skipped = 0
    for n in range(1, 11):
        w = 1.0 - math.exp(-n / kappa)
        p_mix = w * p_inf + (1 - w) * p_base
        draws = rng.binomial(m, p_mix, size=reps) / m
        ests = np.array([invert_warm(p, p_base, w)[0] for p in draws])
        se = ests.std(ddof=1) / math.sqrt(reps)
        dev = abs(float(ests.mean()) - p_inf)
        print(f"n {n:2d} w {w:.3f} |bias| {dev:.5f} 2se {2 * se:.5f}")
        if w >= 0.3:
            checked += 1
            assert dev <= 2 * se
        else:
            skipped += 1
    assert checked >= 8 and skipped >= 1

    for n in (2, 4, 8):
        w = 1.0 - math.exp(-n / kappa)
        p_mix = w * p_inf + (1 - w) * p_base
        s_obs, s_base, s_w = 0.03, 0.02, 0.05
        k = 20_000
        po = p_mix + s_obs * rng.standard_normal(k)
        pb = p_base + s_base * rng.standard_normal(k)
        wh = w + s_w * rng.standard_normal(k)
        raw = (po - (1 - wh) * pb) / wh
        mc_var = float(raw.var(ddof=1))
        formula, _ = corrected_variance(s_obs**2, s_base**2, s_w**2,
                                        p_mix, p_base, w)
        rel = abs(formula - mc_var) / mc_var
        print(f"n {n} variance: formula {formula:.6f} mc {mc_var:.6f} "
              f"rel {rel:.4f}")
        assert rel <= 0.15


# --------------------------------------------------- 4: kernel validity


def test_criterion_04_random_gram_matrices_stay_psd():
    """100 random 30x30 covariance matrices over random mixed spaces,
    scales, and interaction strengths: smallest eigenvalue >= -1e-8."""
    rng = np.random.default_rng(12345)
    worst = math.inf
    for trial in range(100):
        flags = []
        for i in range(int(rng.integers(4, 9))):
            block = f"b{int(rng.integers(0, 3))}"
            kind = ("boolean", "numeric", "categorical")[int(rng.integers(0, 3))]
            if kind == "boolean":
                flags.append(FlagDef(f"f{i}", kind, (False, True), block))
            elif kind == "numeric":
                cands = tuple(sorted(float(v) for v in rng.uniform(0, 4, 3)))
                flags.append(FlagDef(f"f{i}", kind, cands, block,
                                     default=cands[0]))
            else:
                flags.append(FlagDef(f"f{i}", kind, ("a", "b", "c"), block))
        space = FlagSpace(flags=tuple(flags))
        configs = [
            Configuration.of({f.name: f.values[int(rng.integers(0, len(f.values)))]
                              for f in flags})
            for _ in range(30)
        ]
        scales = {b: float(rng.uniform(0, 2)) for b in space.blocks}
        g = gram(space, configs, scales, float(rng.uniform(0, 1)))
        assert g.shape == (30, 30)
        low = float(np.linalg.eigvalsh(g).min())
        worst = min(worst, low)
        assert low >= -1e-8
    print(f"criterion 4: worst eigenvalue over 100 grams {worst:.2e}")


# --------------------------------------------- 5: silent flag retirement


def test_criterion_05_silent_flag_retired_after_three_on_observations():
    """A flag whose consumer counters never move must be excluded after
    exactly its first three on-observations and never proposed again."""
    space = eight_flag_space()
    sim = eight_flag_sim(space, silent_gates=("f6",))
    rr = run(search_config(5, budget_search=18.0), space,
             SimulatorAdapter(sim))
    entries = [s for s in rr.silent_flags if s["flag"] == "f6"]
    assert len(entries) == 1
    entry = entries[0]
    assert entry["on_observations"] == 3
    assert entry["mean_consumer_counter"] == 0.0
    detected = entry["session"]
    on_sessions = sorted(
        r.session_index for r in rr.history
        if r.source == "live" and r.config is not None and r.config["f6"])
    print(f"criterion 5: on-sessions {on_sessions}, detected at {detected}")
    assert len(on_sessions) == 3
    assert on_sessions[-1] == detected
    assert all(s <= detected for s in on_sessions)
    assert "f6" in rr.space.pinned and rr.space.pinned["f6"] is False


# ------------------------------------- 6: reaction to deceptive landscapes


def test_criterion_06_regions_shrink_and_die_on_deceptive_landscape():
    """On a landscape whose global structure contradicts every local
    gradient (value only in same-block pairs, no single-flag effects), at
    least one trust region must shrink and at least one must be killed
    within ten iterations."""
    flags = tuple(
        FlagDef(f"g{i}", "boolean", (False, True), f"pair{i // 2}")
        for i in range(6))
    space = FlagSpace(flags=flags)
    sim = SimSpec(
        space=space,
        tasks=tuple(f"task-{i:03d}" for i in range(12)),
        base_logits=tuple(0.5 for _ in range(12)),
        linear={},
        couplings=(("g0", "g1", 1.5), ("g2", "g3", 1.5), ("g4", "g5", 1.5)),
        seed=7,
    )
    rc = RunConfig(budget_search=40.0, budget_deploy=3.0, delta=0.1, eta=0.2,
                   fidelities=(4, 12), sobol_count=16, batch_size=2,
                   region_count=3, seed=0, max_iterations=10,
                   freeze_min_projections=999)
    rr = run(rc, space, SimulatorAdapter(sim))
    shrinks = [e for e in rr.region_log
               if e["iteration"] <= 10
               and e.get("radius_after", math.inf) < e.get("radius", 0)]
    kills = [e for e in rr.region_log
             if e["iteration"] <= 10 and e.get("alive") is False]
    print(f"criterion 6: {len(shrinks)} shrink events, {len(kills)} kill "
          f"events within 10 iterations")
    assert len(shrinks) >= 1
    assert len(kills) >= 1


# ------------------------------------ 7: interval versus direct root finding


def test_criterion_07_wilson_matches_score_test_root_finding():
    """The closed-form score interval must agree with a numeric inversion
    of the score test to 1e-9 for every k in 0..n, n in 1..100, at levels
    0.8, 0.9, and 0.95."""
    worst = 0.0
    for level in (0.8, 0.9, 0.95):
        z = float(norm.ppf(0.5 + level / 2.0))
        for n in range(1, 101):
            for k in range(0, n + 1):
                lo, hi = wilson_interval(k, n, level)
                phat = k / n

                def g(p: float) -> float:
                    return n * (phat - p) ** 2 - z * z * p * (1.0 - p)

                if k == 0:
                    ref_lo = 0.0
                    ref_hi = brentq(g, 1e-12, 1.0 - 1e-12, xtol=1e-12)
                elif k == n:
                    ref_lo = brentq(g, 1e-12, 1.0 - 1e-12, xtol=1e-12)
                    ref_hi = 1.0
                else:
                    ref_lo = brentq(g, 1e-12, phat, xtol=1e-12)
                    ref_hi = brentq(g, phat, 1.0 - 1e-12, xtol=1e-12)
                err = max(abs(lo - ref_lo), abs(hi - ref_hi))
                worst = max(worst, err)
                assert err <= 1e-9
    print(f"criterion 7: worst endpoint error {worst:.2e}")


# ------------------------------------------------- 8: budget accounting


def test_criterion_08_spend_never_exceeds_budget_and_parts_add_up():
    """Every run: recorded spend stays within the search budget, and the
    per-phase ledger totals sum exactly to the recorded grand total."""
    space = eight_flag_space()
    sim = eight_flag_sim(space)
    for seed, budget in ((0, 12.0), (7, 17.5), (23, 40.0)):
        rr = run(search_config(seed, budget_search=budget), space,
                 SimulatorAdapter(sim))
        assert rr.total_units <= budget + 1e-9
        assert math.fsum(rr.phase_totals.values()) == rr.total_raw_cost
        acc: dict[str, float] = {}
        for row in rr.ledger:
            live = [r.total_cost for r in rr.history
                    if r.source == "live" and r.phase == row.phase
                    and r.fidelity == row.fidelity]
            assert math.fsum(live) == row.raw_cost
            acc[row.phase] = acc.get(row.phase, 0.0) + row.raw_cost
        assert acc == rr.phase_totals
        live_total = math.fsum(r.total_cost for r in rr.history
                               if r.source == "live")
        assert abs(live_total - rr.total_raw_cost) <= 1e-9 * max(
            1.0, rr.total_raw_cost)
        print(f"seed {seed} budget {budget}: spent {rr.total_units:.3f} "
              f"units, raw {rr.total_raw_cost:.6f}, parts add up")


# --------------------------------- 9: sampled gain versus closed form


class _ConstSurrogate:
    """Posterior that is the same Gaussian everywhere."""

    def __init__(self, space: FlagSpace, mu: float, sigma: float):
        self.space = space
        self.mu, self.sigma = mu, sigma

    def predict(self, config: Configuration) -> tuple[float, float]:
        return self.mu, self.sigma


class _ConstCost:
    def __init__(self, c: float):
        self.c = c
        self.residual_std = 0.0

    def predict(self, config: Configuration) -> float:
        return self.c


def test_criterion_09_sampled_hypervolume_gain_matches_closed_form():
    """With a one-point front, a Gaussian rate posterior, and a
    deterministic cost, the expected dominated-area gain has a closed
    form; the 10,000-sample estimate must land within 2% on 20 random
    instances."""
    space = FlagSpace(flags=(FlagDef("x", "boolean", (False, True), "b"),))
    cfg = space.default_config()
    rng = np.random.default_rng(41)
    worst = 0.0
    for i in range(20):
        a1 = float(rng.uniform(0.2, 0.7))
        b1 = float(rng.uniform(0.5, 1.2))
        c = float(rng.uniform(0.2, b1))
        m = float(rng.uniform(a1, a1 + 0.4))
        s = float(rng.uniform(0.05, 0.3))
        big_r = 2.0

        def eplus(a: float) -> float:
            # E[(X - a)+] for X ~ N(m, s^2)
            d = (m - a) / s
            return s * float(norm.pdf(d)) + (m - a) * float(norm.cdf(d))

        e1, e2 = eplus(0.0), eplus(a1)
        closed = e1 * (big_r - c) - (e1 - e2) * (big_r - max(c, b1))
        front = ParetoFront.from_points([FrontPoint(a1, b1)], None,
                                        mu_ref=0.0, cost_ref=big_r)
        sampled = ehvi(cfg, _ConstSurrogate(space, m, s), _ConstCost(c),
                       front, samples=10_000, seed=1000 + i)
        rel = abs(sampled - closed) / closed
        worst = max(worst, rel)
        assert rel <= 0.02
    print(f"criterion 9: worst relative error {worst:.4f} over 20 instances")


# ------------------------------------------- 10: interaction detection


def test_criterion_10_cross_scale_separates_additive_from_coupled():
    """Fit on exhaustive noiseless data: an additive landscape must leave
    the interaction scale at most 1e-3 of the largest block scale, and one
    real coupling must push it at least 10x the additive value."""
    space = eight_flag_space()
    zero = tuple(0.0 for _ in range(16))
    results = {}
    for name, sim in (
            ("additive", eight_flag_sim(space, couplings=(),
                                        base_logits=zero)),
            ("coupled", eight_flag_sim(space,
                                       couplings=(("f0", "f3", 0.9),),
                                       base_logits=zero))):
        records = [make_record(space, o.config, [1], corrected=o.pass_rate,
                               variance=1e-4, session=i + 1)
                   for i, o in enumerate(enumerate_truth(sim))]
        s = fit(records, space)
        results[name] = (s.alpha_cross_sq, max(s.scales.values()))
        print(f"{name}: cross scale {s.alpha_cross_sq:.8f}, "
              f"largest block scale {max(s.scales.values()):.6f}")
    add_cross, add_max = results["additive"]
    cpl_cross, cpl_max = results["coupled"]
    assert add_cross <= 1e-3 * add_max
    assert cpl_cross >= 10.0 * add_cross
    assert cpl_cross > 1e-3 * cpl_max


# ------------------------------------------------ 11: replay determinism


def test_criterion_11_identical_settings_replay_byte_identical(tmp_path):
    """Two runs with the same settings and seed must write byte-identical
    history files."""
    space = eight_flag_space()
    sim = eight_flag_sim(space)
    paths = [tmp_path / "first.jsonl", tmp_path / "second.jsonl"]
    for path in paths:
        run(search_config(11, budget_search=18.0, history_path=str(path)),
            space, SimulatorAdapter(sim))
    first, second = (p.read_bytes() for p in paths)
    assert len(first) > 0
    assert first == second
    print(f"criterion 11: {len(first)} bytes, byte-identical replay")

"""Acceptance gate: each test pins one shipped guarantee or behavior
end to end, with its tolerances written out inline.  Tests share no
fixtures, so a failure points at exactly one guarantee."""

import math
import time
from importlib import resources

import numpy as np
import pytest
from scipy.special import expit

from npeo.core import GroupScores, NpEoConfig
from npeo.eo_calibrator import (
    PosteriorMixture,
    calibrate_mp,
    calibrate_op,
    mixture_cdf,
    search_pair,
    violation_prob,
)
from npeo.errors import Infeasible, NoViablePair
from npeo.harness import load_spec, run_repetitions
from npeo.np_threshold import np_order, order_tail
from npeo.oracle import (
    bayes_oracle,
    check_prior_invariance,
    load_model,
    np_eo_oracle,
    np_oracle,
)
from oracles import (
    BruteForceSelector,
    binom_tail,
    random_model,
    sample_mixture,
)


def _preset(name):
    return resources.as_file(resources.files("npeo").joinpath("presets", name))


def test_c1_two_group_oracle_reproduction():
    with _preset("demo.model") as path:
        model = load_model(path)
    start = time.perf_counter()
    bayes = bayes_oracle(model)
    np_sol = np_oracle(model, 0.1)
    np_eo = np_eo_oracle(model, 0.1, 0.1)
    elapsed = time.perf_counter() - start

    assert bayes.threshold_a == pytest.approx(2.0, abs=0.01)
    assert bayes.report.r0 == pytest.approx(0.137, abs=0.002)
    assert bayes.report.r1 == pytest.approx(0.137, abs=0.002)
    assert bayes.report.l1 == pytest.approx(0.23, abs=0.005)

    assert np_sol.threshold_a == pytest.approx(2.58, abs=0.01)
    assert np_sol.threshold_a == np_sol.threshold_b
    assert np_sol.report.r1 == pytest.approx(0.198, abs=0.002)
    assert np_sol.report.l1 == pytest.approx(0.24, abs=0.005)

    assert np_eo.threshold_a == pytest.approx(3.20, abs=0.01)
    assert np_eo.threshold_b == pytest.approx(2.53, abs=0.01)
    assert np_eo.report.r0 == pytest.approx(0.100, abs=0.001)
    assert np_eo.report.r1 == pytest.approx(0.262, abs=0.002)
    assert np_eo.report.l1 == pytest.approx(0.100, abs=0.001)

    assert elapsed < 1.0, f"oracle solves took {elapsed:.3f}s"


def test_c2_order_rule_exactness_and_boundary():
    # minimal feasible size at alpha = delta = 0.1 with the halved delta
    assert np_order(29, 0.1, 0.05) == 29
    with pytest.raises(Infeasible):
        np_order(28, 0.1, 0.05)

    rng = np.random.default_rng(314)
    for _ in range(50):
        n = int(rng.integers(5, 401))
        k = int(rng.integers(1, n + 1))
        alpha = float(rng.uniform(0.02, 0.3))
        lib = order_tail(n, k, alpha)
        ref = binom_tail(n, k, 1.0 - alpha)
        assert abs(lib - ref) <= 1e-10, (n, k, alpha, lib, ref)


def test_c3_uniform_scores_violation_frequency():
    n, alpha, delta, reps = 200, 0.1, 0.1, 2000
    k = np_order(n, alpha, delta)
    analytic = binom_tail(n, k, 1.0 - alpha)
    rng = np.random.default_rng(42)
    scores = rng.random((reps, n))
    # exact type I error of the threshold rule on uniform scores
    kth = np.partition(scores, k - 1, axis=1)[:, k - 1]
    freq = float(np.mean(1.0 - kth > alpha))
    se = math.sqrt(analytic * (1.0 - analytic) / reps)
    assert freq <= delta, f"empirical violation frequency {freq} above delta"
    assert abs(freq - analytic) <= 3.0 * se, (freq, analytic, se)


def test_c4_mixture_engine_vs_monte_carlo():
    rng = np.random.default_rng(2026)
    start = time.perf_counter()
    configs = []
    pool = []
    for _ in range(200):
        n = int(rng.integers(40, 601))
        l = int(rng.integers(0, int(0.8 * n) + 1))
        k = int(rng.integers(l + 1, n + 1))
        draws = sample_mixture(rng, l, n, k, 1_000_000)
        mix = PosteriorMixture(l, n, k)
        points = np.quantile(draws, rng.uniform(0.05, 0.95, 2))
        for t in (*points, rng.uniform()):
            got = mixture_cdf(mix, float(t))
            ref = float(np.mean(draws <= t))
            assert abs(got - ref) <= 0.002, (l, n, k, t, got, ref)
        configs.append(mix)
        pool.append(draws)
    for idx in range(0, 200, 2):
        eps = float(rng.uniform(0.05, 0.5))
        got = violation_prob(configs[idx], configs[idx + 1], eps)
        ref = float(np.mean(np.abs(pool[idx] - pool[idx + 1]) > eps))
        assert abs(got - ref) <= 0.005, (configs[idx], configs[idx + 1], eps)
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0, f"mixture comparison took {elapsed:.1f}s"


def test_c5_pair_search_matches_brute_force():
    rng = np.random.default_rng(77)
    feasible = 0
    for _ in range(100):
        n_a = int(rng.integers(4, 31))
        n_b = int(rng.integers(4, 31))
        l_a = int(rng.integers(0, n_a))
        l_b = int(rng.integers(0, n_b))
        eps = float(rng.uniform(0.08, 0.45))
        gamma = float(rng.uniform(0.02, 0.6))
        brute = BruteForceSelector(eps).select(l_a, l_b, n_a, n_b, gamma)
        try:
            pair = search_pair(l_a, l_b, n_a, n_b, eps, gamma)
        except NoViablePair:
            assert brute is None, (l_a, l_b, n_a, n_b, eps, gamma)
            continue
        assert brute is not None
        assert (pair.i, pair.j) == (brute[0], brute[1])
        feasible += 1
    assert feasible >= 40, f"only {feasible} feasible instances drawn"


def test_c6_benchmark_preset_reproduction():
    with _preset("benchmark.spec") as path:
        spec = load_spec(path)
    assert spec.reps == 200
    report = run_repetitions(spec, ("op", "mp"))
    op = report.methods["op"]
    mp = report.methods["mp"]

    assert op.failures == 0 and mp.failures == 0
    assert op.avg_r0 == pytest.approx(0.038, abs=0.015)
    assert op.avg_r1 == pytest.approx(0.599, abs=0.05)
    assert op.avg_l1 == pytest.approx(0.151, abs=0.03)
    assert op.np_violation_rate <= 0.01
    assert op.eo_violation_rate <= 0.08

    assert mp.avg_r0 == pytest.approx(0.082, abs=0.02)
    assert mp.avg_r1 == pytest.approx(0.449, abs=0.05)
    assert mp.np_violation_rate <= 0.08
    assert mp.eo_violation_rate <= 0.06

    assert report.seconds < 1800.0, f"benchmark took {report.seconds:.0f}s"


def test_c7_oracle_prior_invariance():
    rng = np.random.default_rng(909)
    checked = 0
    while checked < 50:
        model = random_model(rng)
        alpha = float(rng.uniform(0.05, 0.2))
        eps = float(rng.uniform(0.05, 0.3))
        new_p0 = float(rng.uniform(0.05, 0.95))
        result = check_prior_invariance(model, alpha, eps, new_p0, tol=1e-7)
        assert result.invariant, (model, alpha, eps, new_p0)
        checked += 1


def _random_scores(rng):
    n0a, n0b = int(rng.integers(60, 140)), int(rng.integers(60, 140))
    n1a, n1b = int(rng.integers(40, 120)), int(rng.integers(40, 120))
    return GroupScores(
        class0_a=rng.normal(0.0, 1.0, n0a),
        class0_b=rng.normal(0.2, 1.1, n0b),
        class1_a=rng.normal(1.1, 1.0, n1a),
        class1_b=rng.normal(1.6, 1.2, n1b),
    )


def test_c8_monotone_transform_leaves_orders_fixed():
    transforms = (
        lambda x: 3.0 * x + 2.0,
        lambda x: x**3 + x,
        lambda x: expit(x),
        lambda x: np.arctan(x),
    )
    rng = np.random.default_rng(1234)
    runs = 0
    while runs < 20:
        scores = _random_scores(rng)
        config = NpEoConfig(
            alpha=float(rng.uniform(0.1, 0.2)),
            delta=float(rng.uniform(0.05, 0.15)),
            epsilon=float(rng.uniform(0.25, 0.5)),
            gamma=float(rng.uniform(0.3, 0.7)),
        )
        transform = transforms[runs % len(transforms)]
        mapped = GroupScores(
            class0_a=transform(scores.class0_a),
            class0_b=transform(scores.class0_b),
            class1_a=transform(scores.class1_a),
            class1_b=transform(scores.class1_b),
        )
        try:
            base = calibrate_op(scores, config)
        except NoViablePair:
            continue
        moved = calibrate_op(mapped, config)
        assert (moved.order_a, moved.order_b) == (base.order_a, base.order_b)
        if runs % 4 == 0:
            base_mp = calibrate_mp(scores, config)
            moved_mp = calibrate_mp(mapped, config)
            assert (moved_mp.order_a, moved_mp.order_b) == (
                base_mp.order_a,
                base_mp.order_b,
            )
        runs += 1

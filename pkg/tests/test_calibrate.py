import numpy as np
import pytest
from scipy.special import expit

from npeo.core import GroupScores, NpEoConfig
from npeo.eo_calibrator import _SelectionEngine, calibrate_mp, calibrate_op
from npeo.errors import EmptyCandidates, Infeasible, NoViablePair
from npeo.np_threshold import l_count, np_order, pivot


def _gaussian_scores(rng, n0_a, n1_a, n0_b, n1_b, gap=2.5):
    return GroupScores(
        class0_a=rng.normal(0.0, 1.0, n0_a),
        class0_b=rng.normal(0.2, 1.0, n0_b),
        class1_a=rng.normal(gap, 1.0, n1_a),
        class1_b=rng.normal(gap - 0.3, 1.0, n1_b),
    )


CONFIG = NpEoConfig(alpha=0.15, delta=0.1, epsilon=0.3, gamma=0.4)


def test_op_uses_the_stated_order_statistics():
    rng = np.random.default_rng(42)
    scores = _gaussian_scores(rng, 60, 40, 70, 50)
    clf = calibrate_op(scores, CONFIG)
    k0_a = np_order(60, CONFIG.alpha, CONFIG.delta)
    k0_b = np_order(70, CONFIG.alpha, CONFIG.delta)
    assert clf.pivot_a == pivot(scores.class0_a, k0_a)
    assert clf.pivot_b == pivot(scores.class0_b, k0_b)
    assert clf.threshold_a == pivot(scores.class1_a, clf.order_a)
    assert clf.threshold_b == pivot(scores.class1_b, clf.order_b)
    # selected orders sit strictly above the l counts
    assert clf.order_a > l_count(scores.class1_a, clf.pivot_a)
    assert clf.order_b > l_count(scores.class1_b, clf.pivot_b)
    assert clf.threshold_a >= clf.pivot_a
    assert clf.threshold_b >= clf.pivot_b


def test_op_is_deterministic_and_engine_neutral():
    rng = np.random.default_rng(43)
    scores = _gaussian_scores(rng, 55, 35, 65, 45)
    plain = calibrate_op(scores, CONFIG)
    shared = calibrate_op(scores, CONFIG, _engine=_SelectionEngine(CONFIG.epsilon))
    assert (plain.order_a, plain.order_b) == (shared.order_a, shared.order_b)
    assert plain.threshold_a == shared.threshold_a
    assert plain.threshold_b == shared.threshold_b


def test_half_delta_raises_the_pivots():
    rng = np.random.default_rng(44)
    scores = _gaussian_scores(rng, 80, 40, 80, 40)
    whole = calibrate_op(scores, CONFIG)
    halved = calibrate_op(
        scores,
        NpEoConfig(alpha=0.15, delta=0.1, epsilon=0.3, gamma=0.4, use_half_delta=True),
    )
    assert halved.pivot_a >= whole.pivot_a
    assert halved.pivot_b >= whole.pivot_b


@pytest.mark.parametrize(
    "transform",
    [lambda x: x**3, expit, lambda x: 2.0 * x + 1.0],
    ids=["cube", "expit", "affine"],
)
def test_monotone_transform_preserves_orders(transform):
    rng = np.random.default_rng(45)
    scores = _gaussian_scores(rng, 50, 30, 60, 35)
    base = calibrate_op(scores, CONFIG)
    mapped = calibrate_op(
        GroupScores(
            class0_a=transform(scores.class0_a),
            class0_b=transform(scores.class0_b),
            class1_a=transform(scores.class1_a),
            class1_b=transform(scores.class1_b),
        ),
        CONFIG,
    )
    assert (mapped.order_a, mapped.order_b) == (base.order_a, base.order_b)
    assert mapped.threshold_a == pytest.approx(float(transform(base.threshold_a)))
    assert mapped.threshold_b == pytest.approx(float(transform(base.threshold_b)))


def test_op_infeasible_when_class0_too_small():
    rng = np.random.default_rng(46)
    scores = _gaussian_scores(rng, 20, 30, 60, 35)
    with pytest.raises(Infeasible):
        calibrate_op(scores, NpEoConfig(alpha=0.1, delta=0.05, epsilon=0.3, gamma=0.4))


def test_mp_single_pivot_pair_equals_op():
    # at the feasibility boundary k* = n0, only one pivot pair exists,
    # and with zero type I slack it is exactly the op pair
    rng = np.random.default_rng(47)
    scores = _gaussian_scores(rng, 29, 20, 29, 24)
    config = NpEoConfig(alpha=0.1, delta=0.05, epsilon=0.35, gamma=0.6, eta=0.0)
    op = calibrate_op(scores, config)
    mp = calibrate_mp(scores, config)
    assert (mp.order_a, mp.order_b) == (op.order_a, op.order_b)
    assert mp.threshold_a == op.threshold_a
    assert mp.threshold_b == op.threshold_b
    assert mp.pivot_a == op.pivot_a
    assert mp.pivot_b == op.pivot_b


@pytest.mark.parametrize("seed", [101, 202, 303])
def test_mp_never_worse_than_op_without_slack(seed):
    rng = np.random.default_rng(seed)
    scores = _gaussian_scores(rng, 60, 40, 60, 45)
    config = NpEoConfig(alpha=0.15, delta=0.1, epsilon=0.3, gamma=0.4, eta=0.0)
    op = calibrate_op(scores, config)
    mp = calibrate_mp(scores, config)
    # the op pivot pair is inside the mp enumeration, so the winner's
    # implied empirical type II error can only be lower
    assert mp.order_a + mp.order_b <= op.order_a + op.order_b


def test_mp_empty_candidates():
    rng = np.random.default_rng(48)
    scores = GroupScores(
        class0_a=rng.uniform(10.0, 11.0, 40),
        class0_b=rng.uniform(10.0, 11.0, 40),
        class1_a=rng.uniform(0.0, 1.0, 15),
        class1_b=rng.uniform(0.0, 1.0, 15),
    )
    with pytest.raises(EmptyCandidates):
        calibrate_mp(scores, NpEoConfig(alpha=0.15, delta=0.1, epsilon=0.3, gamma=0.4))


def test_mp_no_viable_pair():
    rng = np.random.default_rng(49)
    scores = GroupScores(
        class0_a=rng.normal(0.0, 1.0, 40),
        class0_b=rng.normal(0.0, 1.0, 40),
        class1_a=rng.normal(3.0, 1.0, 6),
        class1_b=rng.normal(3.0, 1.0, 6),
    )
    with pytest.raises(NoViablePair):
        calibrate_mp(scores, NpEoConfig(alpha=0.15, delta=0.1, epsilon=0.01, gamma=0.01))


def test_calibrators_attach_the_scorer():
    rng = np.random.default_rng(50)
    scores = _gaussian_scores(rng, 40, 30, 40, 30)
    config = NpEoConfig(alpha=0.2, delta=0.15, epsilon=0.3, gamma=0.5)

    def scorer(features, group_codes):
        return np.asarray(features)[:, 0]

    clf = calibrate_op(scores, config, scorer)
    assert clf.scorer is scorer
    preds = clf.predict(np.array([[clf.threshold_a + 1.0], [clf.threshold_a - 1.0]]), np.array([0, 0]))
    assert preds.tolist() == [1, 0]

"""Posterior mixtures over attainable error rates and order-pair selection.

Thresholding at the i-th class-1 order statistic yields a classifier
whose population type II error is itself random.  Conditional on l
class-1 scores sitting at or below the class-0 pivot, that error is
modeled as

    F = G + (1 - G) * B,   G ~ N(l/n, (l/n)(1 - l/n)/n) truncated to [0, 1],
                           B ~ Beta(i - l, n - i + 1),

with G and B independent: G is the (approximately Gaussian) class-1
mass below the pivot and B the rank fluctuation above it.  A candidate
order pair (i, j), one order per group, is accepted when the two
implied error laws differ by more than epsilon with probability at most
gamma.  The calibrators then turn accepted pairs into per-group score
thresholds.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import betainc, betaincinv, ndtr

from .core import GroupScores, GroupThresholdClassifier, NpEoConfig, Scorer
from .errors import EmptyCandidates, NoViablePair
from .np_threshold import l_count, np_order, pivot

_GL_X, _GL_W = np.polynomial.legendre.leggauss(128)
_WINDOW_SD = 8.0
_GRID_CELLS = 512
#: beta CDF values below this are treated as exact 0 (and symmetrically 1)
_TINY = 1e-16
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# the moment prefilter only fires when Chebyshev puts the violation
# probability at least this far above gamma, so grid-level error in the
# quadrature can never flip its verdict
_PREFILTER_MARGIN = 1e-3
_PREFILTER_GAMMA_MAX = 0.995


@dataclass(frozen=True)
class PosteriorMixture:
    """Parameters (l, n, k) of one attainable-error law.

    l counts class-1 scores at or below the class-0 pivot, n is the
    class-1 sample size, and k the candidate order, with 0 <= l < k <= n.
    """

    l: int
    n: int
    k: int

    def __post_init__(self):
        if not (0 <= self.l < self.k <= self.n):
            raise ValueError(
                f"need 0 <= l < k <= n, got l={self.l}, k={self.k}, n={self.n}"
            )

    @property
    def gauss_mean(self) -> float:
        return self.l / self.n

    @property
    def gauss_var(self) -> float:
        m = self.l / self.n
        return m * (1.0 - m) / self.n

    @property
    def beta_a(self) -> int:
        return self.k - self.l

    @property
    def beta_b(self) -> int:
        return self.n - self.k + 1

    @property
    def degenerate(self) -> bool:
        """True when G collapses to a point mass at l/n."""

        return self.gauss_var <= 0.0


class FeasiblePair(NamedTuple):
    """An accepted order pair and its disparity violation probability."""

    i: int
    j: int
    violation: float


@lru_cache(maxsize=4096)
def _gauss_window(l: int, n: int):
    """Location, scale, truncation mass and mean +/- 8 sd window of the
    truncated Gaussian factor."""

    m = l / n
    s = math.sqrt(m * (1.0 - m) / n)
    lo = max(0.0, m - _WINDOW_SD * s)
    hi = min(1.0, m + _WINDOW_SD * s)
    mass = float(ndtr((1.0 - m) / s) - ndtr((0.0 - m) / s))
    return m, s, mass, lo, hi


@lru_cache(maxsize=65536)
def _beta_window(a: int, b: int) -> tuple[float, float]:
    """Arguments outside (qlo, qhi) give a Beta(a, b) CDF of 0 or 1
    to within float precision."""

    qlo = float(betaincinv(a, b, _TINY))
    # upper quantile through the mirrored law to keep precision near 1
    qhi = 1.0 - float(betaincinv(b, a, _TINY))
    return qlo, qhi


def _cdf_grid(mixture: PosteriorMixture, ts: np.ndarray) -> np.ndarray:
    """CDF of the mixture law at every point of ``ts``.

    The conditional Beta CDF is 0 wherever the Gaussian draw already
    exceeds t, and the whole CDF is 1 for t >= 1.  Rows whose value is
    0 or 1 to float precision are short-circuited before the quadrature.
    """

    ts = np.asarray(ts, dtype=float)
    out = np.empty(ts.shape, dtype=float)
    above = ts >= 1.0
    below = ts <= 0.0
    mid = ~(above | below)
    out[above] = 1.0
    out[below] = 0.0
    if not mid.any():
        return out
    t = ts[mid]
    a, b = mixture.beta_a, mixture.beta_b
    if mixture.degenerate:
        g0 = mixture.gauss_mean
        x = (t - g0) / (1.0 - g0)
        out[mid] = betainc(a, b, np.clip(x, 0.0, 1.0))
        return out
    m, s, mass, glo, ghi = _gauss_window(mixture.l, mixture.n)
    qlo, qhi = _beta_window(a, b)
    # (t - g)/(1 - g) falls in g, so its extremes sit at the window ends
    x_at_lo = (t - glo) / (1.0 - glo)
    force0 = x_at_lo <= qlo
    if ghi < 1.0:
        with np.errstate(invalid="ignore"):
            x_at_hi = (t - ghi) / (1.0 - ghi)
        force1 = (t > ghi) & (x_at_hi >= qhi)
    else:
        force1 = np.zeros(t.shape, dtype=bool)
    vals = np.empty(t.shape, dtype=float)
    vals[force0] = 0.0
    vals[force1] = 1.0
    inner = ~(force0 | force1)
    if inner.any():
        ti = t[inner]
        # the conditional Beta CDF vanishes for g > t, so the nodes stop
        # at min(t, hi); placed per point, the integrand has no kink
        # inside the node span and Gauss-Legendre converges fast
        half = 0.5 * (np.minimum(ti, ghi) - glo)
        g = glo + half[:, None] * (_GL_X + 1.0)[None, :]
        z = (g - m) / s
        w = _GL_W[None, :] * half[:, None] * np.exp(-0.5 * z * z) / (
            s * _SQRT_2PI * mass
        )
        x = (ti[:, None] - g) / (1.0 - g)
        np.clip(x, 0.0, 1.0, out=x)
        # entries outside the beta window are 0 or 1 to float precision,
        # so the special function only runs on the live block
        cell = (x >= qhi).astype(float)
        live = (x > qlo) & (x < qhi)
        if live.any():
            cell[live] = betainc(a, b, x[live])
        vals[inner] = np.sum(cell * w, axis=1)
    out[mid] = vals
    np.clip(out, 0.0, 1.0, out=out)
    return out


def mixture_cdf(mixture: PosteriorMixture, t: float) -> float:
    """P(F <= t) for the mixture law, via 128-node Gauss-Legendre
    quadrature over the truncated Gaussian factor."""

    return float(_cdf_grid(mixture, np.array([t]))[0])


def violation_prob(
    mix_a: PosteriorMixture,
    mix_b: PosteriorMixture,
    epsilon: float,
    cells: int = _GRID_CELLS,
) -> float:
    """P(|F_a - F_b| > epsilon) for two independent mixture laws.

    Computed as 1 - integral of [CDF_a(t + eps) - CDF_a(t - eps)]
    against dCDF_b(t), the integral taken as a Stieltjes sum over a
    uniform grid of ``cells`` intervals on [0, 1] with the band
    evaluated at interval midpoints.  The result is clamped to [0, 1].
    """

    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if epsilon >= 1.0:
        # both laws live on [0, 1], so the gap can never exceed 1
        return 0.0
    edges = np.linspace(0.0, 1.0, cells + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    weights = np.diff(_cdf_grid(mix_b, edges))
    band = _cdf_grid(mix_a, mids + epsilon) - _cdf_grid(mix_a, mids - epsilon)
    close = float(weights @ band)
    return float(min(max(1.0 - close, 0.0), 1.0))


@lru_cache(maxsize=8192)
def _gauss_moments(l: int, n: int) -> tuple[float, float]:
    """Mean and variance of the truncated Gaussian factor."""

    if l == 0:
        return 0.0, 0.0
    m = l / n
    s = math.sqrt(m * (1.0 - m) / n)
    za = (0.0 - m) / s
    zb = (1.0 - m) / s
    pa = math.exp(-0.5 * za * za) / _SQRT_2PI
    pb = math.exp(-0.5 * zb * zb) / _SQRT_2PI
    mass = ndtr(zb) - ndtr(za)
    mg = m + s * (pa - pb) / mass
    vg = (s * s) * (
        1.0 + (za * pa - zb * pb) / mass - ((pa - pb) / mass) ** 2
    )
    return mg, max(vg, 0.0)


def _moment_arrays(l: int, n: int, k_arr: np.ndarray):
    """Mixture mean and variance for a whole vector of candidate orders.

    G is shared across the orders, so only the Beta factor varies:
    a = k - l, b = n - k + 1, a + b = n - l + 1 fixed.
    """

    mg, vg = _gauss_moments(l, n)
    mg2 = vg + mg * mg
    a = k_arr - float(l)
    denom = n - l + 1.0
    mb = a / denom
    mb2 = a * (a + 1.0) / (denom * (denom + 1.0))
    mean = mg + (1.0 - mg) * mb
    second = mg2 + 2.0 * (mg - mg2) * mb + (1.0 - 2.0 * mg + mg2) * mb2
    var = np.maximum(second - mean * mean, 0.0)
    return mean, var


@lru_cache(maxsize=65536)
def _mixture_moments(l: int, n: int, k: int) -> tuple[float, float]:
    """Exact mean and standard deviation of the mixture law."""

    mean, var = _moment_arrays(l, n, np.array([float(k)]))
    return float(mean[0]), math.sqrt(float(var[0]))


class _SelectionEngine:
    """Shared state for one epsilon: fixed grids plus CDF and violation caches.

    All cached quantities are pure functions of (l, n, k) and the grids,
    so reusing an engine across calls changes nothing numerically.  The
    vector cache is bounded; overflow evicts the least recently used
    entries, which only costs recomputation.
    """

    def __init__(self, epsilon: float, cells: int = _GRID_CELLS, max_vectors: int = 30000):
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.epsilon = float(epsilon)
        self.cells = int(cells)
        edges = np.linspace(0.0, 1.0, self.cells + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        self._edges = edges
        self._hi = mids + self.epsilon
        self._lo = mids - self.epsilon
        self._vectors: OrderedDict[tuple, np.ndarray] = OrderedDict()
        self._violations: dict[tuple, float] = {}
        self._max_vectors = max_vectors

    def _cached(self, key, compute) -> np.ndarray:
        vec = self._vectors.get(key)
        if vec is None:
            vec = compute()
            self._vectors[key] = vec
            if len(self._vectors) > self._max_vectors:
                self._vectors.popitem(last=False)
        else:
            self._vectors.move_to_end(key)
        return vec

    def _weights(self, l: int, n: int, k: int) -> np.ndarray:
        """Cell masses of the mixture law over the grid."""

        return self._cached(
            (l, n, k, "w"),
            lambda: np.diff(_cdf_grid(PosteriorMixture(l, n, k), self._edges)),
        )

    def _band(self, l: int, n: int, k: int) -> np.ndarray:
        """CDF(mid + eps) - CDF(mid - eps) at the grid midpoints."""

        def compute():
            mix = PosteriorMixture(l, n, k)
            return _cdf_grid(mix, self._hi) - _cdf_grid(mix, self._lo)

        return self._cached((l, n, k, "band"), compute)

    def violation(self, l_a: int, n_a: int, i: int, l_b: int, n_b: int, j: int) -> float:
        key = (l_a, n_a, i, l_b, n_b, j)
        cached = self._violations.get(key)
        if cached is not None:
            return cached
        close = float(self._weights(l_b, n_b, j) @ self._band(l_a, n_a, i))
        value = float(min(max(1.0 - close, 0.0), 1.0))
        self._violations[key] = value
        return value

    def admissible(
        self,
        l_a: int,
        n_a: int,
        i_arr: np.ndarray,
        l_b: int,
        n_b: int,
        j_arr: np.ndarray,
        gamma: float,
    ) -> np.ndarray:
        """Mask of candidates the moment prefilter cannot rule out.

        Chebyshev on the difference of the two laws: with mean gap d and
        combined variance v, P(|F_a - F_b| <= epsilon) <= v / (d - eps)^2
        whenever d > eps, so the violation probability is at least
        1 - v / (d - eps)^2.  A candidate is dropped only when that
        lower bound clears gamma by a fixed margin, keeping the filter
        conservative against quadrature error in the retained values.
        """

        if gamma > _PREFILTER_GAMMA_MAX:
            return np.ones(i_arr.shape, dtype=bool)
        mean_a, var_a = _moment_arrays(l_a, n_a, i_arr)
        mean_b, var_b = _moment_arrays(l_b, n_b, j_arr)
        spread = np.sqrt((var_a + var_b) / (1.0 - gamma - _PREFILTER_MARGIN))
        return np.abs(mean_a - mean_b) <= self.epsilon + spread

    def certainly_infeasible(
        self, l_a: int, n_a: int, i: int, l_b: int, n_b: int, j: int, gamma: float
    ) -> bool:
        """Scalar form of the prefilter; True means violation > gamma for sure."""

        mask = self.admissible(
            l_a, n_a, np.array([float(i)]), l_b, n_b, np.array([float(j)]), gamma
        )
        return not bool(mask[0])


def _search(
    engine: _SelectionEngine,
    l_a: int,
    l_b: int,
    n_a1: int,
    n_b1: int,
    gamma: float,
    cap: int | None = None,
) -> FeasiblePair | None:
    """First feasible pair by ascending i + j; None when the range is empty.

    Within one sum, candidates are tried balanced first (smallest
    |(i - l_a) - (j - l_b)|), then by smaller i.  ``cap`` is an
    exclusive bound on i + j - 2: pairs at or above it are not examined.
    """

    s_lo = l_a + l_b + 2
    s_hi = n_a1 + n_b1
    if cap is not None:
        s_hi = min(s_hi, cap + 1)
    for s in range(s_lo, s_hi + 1):
        i_lo = max(l_a + 1, s - n_b1)
        i_hi = min(n_a1, s - l_b - 1)
        if i_lo > i_hi:
            continue
        i_arr = np.arange(i_lo, i_hi + 1)
        j_arr = s - i_arr
        keep = engine.admissible(l_a, n_a1, i_arr, l_b, n_b1, j_arr, gamma)
        if not keep.any():
            continue
        i_arr = i_arr[keep]
        j_arr = j_arr[keep]
        balance = np.abs((i_arr - l_a) - (j_arr - l_b))
        for idx in np.lexsort((i_arr, balance)):
            i = int(i_arr[idx])
            j = int(j_arr[idx])
            value = engine.violation(l_a, n_a1, i, l_b, n_b1, j)
            if value <= gamma:
                return FeasiblePair(i, j, value)
    return None


def search_pair(
    l_a: int,
    l_b: int,
    n_a1: int,
    n_b1: int,
    epsilon: float,
    gamma: float,
) -> FeasiblePair:
    """Smallest-sum order pair whose disparity violation is at most gamma.

    Candidates run over i in (l_a, n_a1], j in (l_b, n_b1].  Pairs are
    examined by ascending i + j, balanced first within a sum, then by
    smaller i, and the first feasible pair wins; any pair with the same
    sum has the same implied empirical type II error, so this is the
    argmin under that objective.

    Raises
    ------
    EmptyCandidates
        When l_a = n_a1 or l_b = n_b1 (no order above a pivot).
    NoViablePair
        When no candidate pair passes the criterion.
    """

    _check_search_args(l_a, l_b, n_a1, n_b1, gamma)
    engine = _SelectionEngine(epsilon)
    found = _search(engine, l_a, l_b, n_a1, n_b1, gamma)
    if found is None:
        raise NoViablePair(
            f"no order pair meets epsilon={epsilon}, gamma={gamma} "
            f"for l=({l_a}, {l_b}), n=({n_a1}, {n_b1})"
        )
    return found


def _check_search_args(l_a, l_b, n_a1, n_b1, gamma):
    if not (0 <= l_a <= n_a1 and 0 <= l_b <= n_b1):
        raise ValueError("l counts must lie in [0, n] for each group")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if l_a >= n_a1 or l_b >= n_b1:
        raise EmptyCandidates(
            f"no class-1 orders above the pivot: l=({l_a}, {l_b}), "
            f"n=({n_a1}, {n_b1})"
        )


def calibrate_op(
    scores: GroupScores,
    config: NpEoConfig,
    scorer: Scorer | None = None,
    _engine: _SelectionEngine | None = None,
) -> GroupThresholdClassifier:
    """Calibrate per-group thresholds from one pivot pair.

    Each group's class-0 scores fix a pivot through the (alpha, delta)
    order rule, delta being halved first when the config says so.  The
    pivots give the l counts, the pair search picks class-1 orders, and
    the classifier thresholds at those order statistics.  Thresholds
    never fall below their pivots because every candidate order lies
    strictly above the l count.
    """

    scores.require_nonempty()
    delta = config.effective_delta
    k0_a = np_order(scores.n0_a, config.alpha, delta)
    k0_b = np_order(scores.n0_b, config.alpha, delta)
    pivot_a = pivot(scores.class0_a, k0_a)
    pivot_b = pivot(scores.class0_b, k0_b)
    l_a = l_count(scores.class1_a, pivot_a)
    l_b = l_count(scores.class1_b, pivot_b)
    _check_search_args(l_a, l_b, scores.n1_a, scores.n1_b, config.gamma)
    engine = _engine if _engine is not None else _SelectionEngine(config.epsilon)
    found = _search(engine, l_a, l_b, scores.n1_a, scores.n1_b, config.gamma)
    if found is None:
        raise NoViablePair(
            f"no order pair meets epsilon={config.epsilon}, "
            f"gamma={config.gamma} above pivots ({pivot_a}, {pivot_b})"
        )
    return GroupThresholdClassifier(
        scorer=scorer,
        threshold_a=pivot(scores.class1_a, found.i),
        threshold_b=pivot(scores.class1_b, found.j),
        order_a=found.i,
        order_b=found.j,
        pivot_a=pivot_a,
        pivot_b=pivot_b,
    )


def calibrate_mp(
    scores: GroupScores,
    config: NpEoConfig,
    scorer: Scorer | None = None,
    _engine: _SelectionEngine | None = None,
) -> GroupThresholdClassifier:
    """Calibrate thresholds over every pivot pair of matched total size.

    The (alpha - eta, delta) order rule applied per group fixes m, the
    total count of class-0 scores above the two pivots.  Every pivot
    pair (u, v) leaving the same total m above is then tried: each pair
    yields its own l counts and pair search, and the candidate with the
    smallest empirical type II error (i + j - 2 over the class-1 total)
    wins.  Pivot pairs whose l_a + l_b already reaches the incumbent
    value cannot improve on it (i > l_a and j > l_b force
    i + j - 2 >= l_a + l_b) and are skipped without a search.
    """

    scores.require_nonempty()
    alpha = config.alpha - config.effective_eta
    k0_a = np_order(scores.n0_a, alpha, config.delta)
    k0_b = np_order(scores.n0_b, alpha, config.delta)
    n0_a, n0_b = scores.n0_a, scores.n0_b
    m = (n0_a - k0_a) + (n0_b - k0_b)
    engine = _engine if _engine is not None else _SelectionEngine(config.epsilon)
    best: tuple[int, FeasiblePair, float, float] | None = None
    any_candidates = False
    searched: dict[tuple[int, int], tuple[float, FeasiblePair | None]] = {}
    u_lo = max(1, n0_a - m)
    u_hi = min(n0_a, n0_a + n0_b - m - 1)
    for u in range(u_lo, u_hi + 1):
        v = n0_b - m + (n0_a - u)
        pivot_a = pivot(scores.class0_a, u)
        pivot_b = pivot(scores.class0_b, v)
        l_a = l_count(scores.class1_a, pivot_a)
        l_b = l_count(scores.class1_b, pivot_b)
        if l_a >= scores.n1_a or l_b >= scores.n1_b:
            continue
        any_candidates = True
        cap = None
        if best is not None:
            cap = best[0]
            if l_a + l_b >= cap:
                continue
        cap_bound = math.inf if cap is None else cap
        seen = searched.get((l_a, l_b))
        if seen is not None and seen[0] >= cap_bound:
            # adjacent pivot pairs often repeat the l counts; the search
            # order is fixed, so the earlier (no looser capped) scan
            # already determines this one
            prev = seen[1]
            if prev is not None and prev.i + prev.j - 2 < cap_bound:
                found = prev
            else:
                found = None
        else:
            found = _search(engine, l_a, l_b, scores.n1_a, scores.n1_b, config.gamma, cap)
            searched[(l_a, l_b)] = (cap_bound, found)
        if found is None:
            continue
        value = found.i + found.j - 2
        if best is None or value < best[0]:
            best = (value, found, pivot_a, pivot_b)
    if best is None:
        if not any_candidates:
            raise EmptyCandidates(
                "every pivot pair leaves some group without candidate orders"
            )
        raise NoViablePair(
            f"no pivot pair admits an order pair at epsilon={config.epsilon}, "
            f"gamma={config.gamma}"
        )
    _, found, pivot_a, pivot_b = best
    return GroupThresholdClassifier(
        scorer=scorer,
        threshold_a=pivot(scores.class1_a, found.i),
        threshold_b=pivot(scores.class1_b, found.j),
        order_a=found.i,
        order_b=found.j,
        pivot_a=pivot_a,
        pivot_b=pivot_b,
    )

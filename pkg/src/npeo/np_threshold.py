"""Order selection for distribution-free type I error control.

With n class-0 scores held out and sorted ascending, thresholding at
the k-th smallest score gives a classifier whose type I error exceeds
alpha with probability

    P(Bin(n, 1 - alpha) >= k),

no matter what the score distribution is (continuity is enough).
``np_order`` returns the smallest k making that tail at most delta, so
the guarantee P(R0 > alpha) <= delta holds with the least conservative
threshold available.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betainc

from .errors import Infeasible, OutOfRange


def order_tail(n: int, k: int, alpha: float) -> float:
    """Tail probability P(Bin(n, 1 - alpha) >= k).

    Evaluated through the regularized incomplete beta function,
    I_{1-alpha}(k, n - k + 1), which equals the binomial upper tail for
    integer k in 1..n.  k <= 0 returns 1 and k > n returns 0.
    """

    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    return float(betainc(k, n - k + 1, 1.0 - alpha))


def min_calibration_size(alpha: float, delta: float) -> int:
    """Smallest n for which some order meets the (alpha, delta) guarantee.

    The loosest usable order is k = n with tail (1 - alpha)^n, so
    feasibility needs n >= log(delta) / log(1 - alpha).
    """

    _check_levels(alpha, delta)
    return int(math.ceil(math.log(delta) / math.log1p(-alpha)))


def np_order(n: int, alpha: float, delta: float) -> int:
    """Smallest order k in 1..n with P(Bin(n, 1 - alpha) >= k) <= delta.

    Parameters
    ----------
    n : int
        Number of held-out class-0 scores.
    alpha : float
        Target type I error level, in (0, 1).
    delta : float
        Tolerated probability of exceeding alpha, in (0, 1).

    Returns
    -------
    int
        The selected order k*, found by binary search; the tail is
        nonincreasing in k, so the first k at or below delta is unique.

    Raises
    ------
    Infeasible
        If even k = n fails, i.e. (1 - alpha)^n > delta.
    """

    _check_levels(alpha, delta)
    if n < 1:
        raise OutOfRange(f"n must be at least 1, got {n}")
    # log-space feasibility check avoids underflow for large n
    if n * math.log1p(-alpha) > math.log(delta):
        raise Infeasible(
            f"n={n} cannot meet alpha={alpha}, delta={delta}; "
            f"need n >= {min_calibration_size(alpha, delta)}"
        )
    lo, hi = 1, n
    while lo < hi:
        mid = (lo + hi) // 2
        if order_tail(n, mid, alpha) <= delta:
            hi = mid
        else:
            lo = mid + 1
    return lo


def pivot(sorted_scores, k: int) -> float:
    """k-th smallest element (1-indexed) of an ascending score sequence."""

    scores = np.asarray(sorted_scores)
    if not 1 <= k <= scores.size:
        raise OutOfRange(f"order {k} outside 1..{scores.size}")
    return float(scores[k - 1])


def l_count(sorted_scores, pivot_value: float) -> int:
    """Number of scores at or below the pivot (weak inequality).

    A score exactly equal to the pivot counts, matching the strict >
    prediction rule: such a sample would be classified 0.
    """

    scores = np.asarray(sorted_scores)
    return int(np.searchsorted(scores, pivot_value, side="right"))


def _check_levels(alpha: float, delta: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")

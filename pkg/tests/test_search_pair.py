import numpy as np
import pytest

from npeo.eo_calibrator import FeasiblePair, _search, _SelectionEngine, search_pair
from npeo.errors import EmptyCandidates, NoViablePair
from oracles import BruteForceSelector


def test_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(12):
        n_a1 = int(rng.integers(3, 18))
        n_b1 = int(rng.integers(3, 18))
        l_a = int(rng.integers(0, n_a1))
        l_b = int(rng.integers(0, n_b1))
        epsilon = float(rng.uniform(0.05, 0.5))
        gamma = float(rng.uniform(0.05, 0.9))
        brute = BruteForceSelector(epsilon).select(l_a, l_b, n_a1, n_b1, gamma)
        if brute is None:
            with pytest.raises(NoViablePair):
                search_pair(l_a, l_b, n_a1, n_b1, epsilon, gamma)
        else:
            found = search_pair(l_a, l_b, n_a1, n_b1, epsilon, gamma)
            assert (found.i, found.j) == (brute[0], brute[1])
            assert found.violation == pytest.approx(brute[2], abs=1e-12)
            checked += 1
    assert checked >= 4


def test_empty_candidate_ranges():
    with pytest.raises(EmptyCandidates):
        search_pair(5, 2, 5, 10, 0.2, 0.5)  # l_a == n_a1
    with pytest.raises(EmptyCandidates):
        search_pair(2, 10, 5, 10, 0.2, 0.5)


def test_no_viable_pair():
    # three samples a side cannot pin the laws inside a 0.01 band
    with pytest.raises(NoViablePair):
        search_pair(0, 0, 3, 3, 0.01, 0.001)


def test_gamma_one_accepts_first_candidate():
    found = search_pair(2, 4, 9, 11, 0.3, 1.0)
    assert (found.i, found.j) == (3, 5)
    assert found.violation <= 1.0


def test_argument_checks():
    with pytest.raises(ValueError):
        search_pair(-1, 0, 5, 5, 0.2, 0.5)
    with pytest.raises(ValueError):
        search_pair(0, 0, 5, 5, 0.2, 0.0)
    with pytest.raises(ValueError):
        search_pair(0, 0, 5, 5, 0.2, 1.5)


def test_cap_truncates_the_scan():
    engine = _SelectionEngine(0.2)
    full = _search(engine, 1, 1, 12, 12, 0.4)
    assert isinstance(full, FeasiblePair)
    value = full.i + full.j - 2
    # an exclusive cap at the winner's value hides it
    assert _search(engine, 1, 1, 12, 12, 0.4, cap=value) is None
    again = _search(engine, 1, 1, 12, 12, 0.4, cap=value + 1)
    assert again == full


def test_search_is_deterministic_across_engines():
    a = search_pair(3, 5, 14, 17, 0.25, 0.3)
    b = search_pair(3, 5, 14, 17, 0.25, 0.3)
    assert a == b

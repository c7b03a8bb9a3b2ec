"""Factor-number selectors."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfactor import default_tuning, k_by_ratio, k_by_threshold
from qfactor.errors import TooFewEigenvalues


def test_ratio_picks_largest_gap():
    # [TRIVIAL] ratios are 2, 50, 1.1 -> k = 2
    ev = np.array([10.0, 5.0, 0.1, 0.09])
    assert k_by_ratio(ev, 3) == 2


def test_ratio_tie_goes_to_smallest_k():
    ev = np.array([8.0, 4.0, 2.0, 1.0])
    assert k_by_ratio(ev, 3) == 1


def test_ratio_zero_denominator_wins():
    ev = np.array([5.0, 1.0, 0.0, 0.0])
    assert k_by_ratio(ev, 3) == 2


def test_ratio_skips_zero_over_zero():
    ev = np.array([5.0, 1.0, 0.0, 0.0, 0.0])
    # positions 3 and 4 are 0/0 and skipped; best finite ratio is k=1
    assert k_by_ratio(ev, 4) == 2


def test_ratio_all_zero_falls_back():
    assert k_by_ratio(np.zeros(4), 3) == 1


def test_ratio_requires_enough_eigenvalues():
    with pytest.raises(TooFewEigenvalues):
        k_by_ratio(np.array([1.0, 0.5]), 2)
    with pytest.raises(ValueError):
        k_by_ratio(np.array([1.0, 0.5]), 0)


def test_threshold_count_inclusive():
    ev = np.array([3.0, 1.0, 0.5, 0.1])
    assert k_by_threshold(ev, 0.5) == 3
    assert k_by_threshold(ev, 0.500001) == 2
    assert k_by_threshold(ev, 10.0) == 0


def test_default_tuning_values():
    kmax, lam = default_tuning(100, 7)
    assert kmax == 3
    # [TRIVIAL] lambda = 1/log(100)
    assert lam == pytest.approx(1.0 / np.log(100.0))


def test_default_tuning_guards():
    with pytest.raises(ValueError):
        default_tuning(2, 7)
    with pytest.raises(ValueError):
        default_tuning(100, 1)


@given(st.lists(st.floats(0.0, 1e6), min_size=4, max_size=10),
       st.integers(1, 3))
@settings(max_examples=100, deadline=None)
def test_ratio_in_range(values, kmax):
    ev = np.sort(np.asarray(values))[::-1]
    k = k_by_ratio(ev, kmax)
    assert 1 <= k <= kmax


@given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=10),
       st.floats(1e-6, 1e6))
@settings(max_examples=100, deadline=None)
def test_threshold_monotone_in_lambda(values, lam):
    ev = np.sort(np.asarray(values))[::-1]
    assert k_by_threshold(ev, lam) >= k_by_threshold(ev, 2.0 * lam)

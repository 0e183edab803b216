import math

import pytest
from hypothesis import given, strategies as st

from fhsim.metrics import cdf, percentile

floats = st.floats(-1e6, 1e6, allow_nan=False)


def test_cdf_examples():
    assert cdf([5]) == [(5, 1.0)]
    assert dict(cdf([1, 2, 3, 4]))[2] == 0.5
    assert cdf([3, 1, 4, 2]) == cdf([1, 2, 3, 4])


def test_cdf_empty():
    with pytest.raises(ValueError):
        cdf([])


def test_percentile_examples():
    assert percentile([10, 20, 30, 40], 0.5) == 20
    xs = [7, 3, 9, 1]
    assert percentile(xs, 0.0) == 1 and percentile(xs, 1.0) == 9
    assert all(percentile([4.5] * 6, p) == 4.5 for p in (0, 0.05, 0.5, 0.95, 1))


def test_percentile_rejects_bad_input():
    with pytest.raises(ValueError):
        percentile([], 0.5)
    with pytest.raises(ValueError):
        percentile([1], 1.5)


@given(st.lists(floats, min_size=1, max_size=50))
def test_cdf_monotone_to_one(xs):
    pts = cdf(xs)
    assert all(a[0] <= b[0] and a[1] < b[1] for a, b in zip(pts, pts[1:]))
    assert pts[-1][1] == 1.0 and pts[0][1] > 0


@given(st.lists(floats, min_size=1, max_size=50), st.floats(0, 1))
def test_percentile_consistent_with_cdf(xs, p):
    v = percentile(xs, p)
    pts = cdf(xs)
    # smallest value whose CDF reaches p
    first = next(x for x, q in pts if q >= p - 1e-12)
    assert v == first
    assert min(xs) <= v <= max(xs)
